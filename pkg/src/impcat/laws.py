"""Algebraic laws of the derived combinators, as checkable equations.

Each law names its metavariables (guards b, predicates p, commands c) and
an optional side condition on one of them (total / deterministic, checked
semantically before the law is asserted).  The law suites sample random
arguments over random models and demand exact semantic equality in every
backend.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import combinators as cb
from .backends import eval_term
from .combinators import Elaborator, OMEGA, UPSILON
from .gen import ModelBundle, random_command, random_guard, random_pred
from .kernel import Term, typecheck
from .models import Model


def sem_eq(t1: Term, t2: Term, ctx, idx, model: Model, backend: str) -> bool:
    m1 = eval_term(t1, ctx, idx, model, backend)
    m2 = eval_term(t2, ctx, idx, model, backend)
    return m1.equal(m2)


def sem_leq(t1: Term, t2: Term, ctx, idx, model: Model, backend: str) -> bool:
    m1 = eval_term(t1, ctx, idx, model, backend)
    m2 = eval_term(t2, ctx, idx, model, backend)
    return m1.leq(m2)


@dataclass(frozen=True)
class Law:
    name: str
    group: str                     # "guard" | "pred" | "cmd"
    metavars: str                  # e.g. "bb" = two guards, "p" = one predicate
    build: Callable[..., tuple[Term, Term]]
    # side condition: (index into metavars, "total" | "det" | "total_det")
    condition: Optional[tuple[int, str]] = None


def _g(o):  # tiny aliases to keep the tables readable
    return o


GUARD_LAWS: list[Law] = [
    Law("and-commutative", "guard", "bb",
        lambda b1, b2: (cb.g_and(b1, b2), cb.g_and(b2, b1))),
    Law("and-associative", "guard", "bbb",
        lambda b1, b2, b3: (cb.g_and(cb.g_and(b1, b2), b3),
                            cb.g_and(b1, cb.g_and(b2, b3)))),
    Law("and-unit", "guard", "b", lambda b: (cb.g_and(b, cb.mk_L()), b)),
    Law("or-commutative", "guard", "bb",
        lambda b1, b2: (cb.g_or(b1, b2), cb.g_or(b2, b1))),
    Law("or-associative", "guard", "bbb",
        lambda b1, b2, b3: (cb.g_or(cb.g_or(b1, b2), b3),
                            cb.g_or(b1, cb.g_or(b2, b3)))),
    Law("or-unit", "guard", "b", lambda b: (cb.g_or(b, cb.mk_R()), b)),
    Law("not-de-morgan", "guard", "bb",
        lambda b1, b2: (cb.g_not(cb.g_and(b1, b2)),
                        cb.g_or(cb.g_not(b2), cb.g_not(b1)))),
    Law("not-involutive", "guard", "b", lambda b: (cb.g_not(cb.g_not(b)), b)),
    Law("and-annihilator-total", "guard", "b",
        lambda b: (cb.g_and(b, cb.mk_R()), cb.mk_R()), condition=(0, "total")),
    Law("or-annihilator-total", "guard", "b",
        lambda b: (cb.g_or(b, cb.mk_L()), cb.mk_L()), condition=(0, "total")),
    Law("and-idempotent-det", "guard", "b",
        lambda b: (cb.g_and(b, b), b), condition=(0, "det")),
    Law("or-idempotent-det", "guard", "b",
        lambda b: (cb.g_or(b, b), b), condition=(0, "det")),
]

PRED_LAWS: list[Law] = [
    Law("and-commutative", "pred", "pp",
        lambda p, q: (cb.p_and(p, q), cb.p_and(q, p))),
    Law("and-associative", "pred", "ppp",
        lambda p, q, r: (cb.p_and(p, cb.p_and(q, r)), cb.p_and(cb.p_and(p, q), r))),
    Law("and-top", "pred", "p", lambda p: (cb.p_and(p, cb.p_top()), p)),
    Law("and-bot", "pred", "p",
        lambda p: (cb.p_and(p, cb.p_bot()), cb.p_bot())),
    Law("and-distributes-cond", "pred", "pppb",
        lambda p, q, r, b: (cb.p_and(p, cb.p_cond(q, b, r)),
                            cb.p_cond(cb.p_and(p, q), b, cb.p_and(p, r)))),
    Law("total-collapses", "pred", "p",
        lambda p: (p, cb.p_top()), condition=(0, "total")),
    Law("and-idempotent-det", "pred", "p",
        lambda p: (cb.p_and(p, p), p), condition=(0, "det")),
]


def _cmd_laws(e: Elaborator) -> list[Law]:
    return [
        Law("seq-associative", "cmd", "ccc",
            lambda c1, c2, c3: (e.seq(e.seq(c1, c2), c3),
                                e.seq(c1, e.seq(c2, c3)))),
        Law("skip-right-unit", "cmd", "c", lambda c: (e.seq(c, e.skip()), c)),
        Law("skip-left-unit", "cmd", "c", lambda c: (e.seq(e.skip(), c), c)),
        Law("abort-left", "cmd", "c", lambda c: (e.seq(e.abort(), c), e.abort())),
        Law("abort-right", "cmd", "c", lambda c: (e.seq(c, e.abort()), e.abort())),
        Law("if-left-const", "cmd", "cc",
            lambda c1, c2: (e.ifelse(cb.mk_L(), c1, c2), c1)),
        Law("if-right-const", "cmd", "cc",
            lambda c1, c2: (e.ifelse(cb.mk_R(), c1, c2), c2)),
        Law("if-not-swaps", "cmd", "ccb",
            lambda c1, c2, b: (e.ifelse(cb.g_not(b), c1, c2), e.ifelse(b, c2, c1))),
        Law("while-unfolds", "cmd", "cb",
            lambda c, b: (e.while_(b, c),
                          e.ifelse(b, e.seq(c, e.while_(b, c)), e.skip()))),
        Law("while-abort-asserts", "cmd", "b",
            lambda b: (e.while_(b, e.abort()),
                       e.assert_(cb.lift_guard(cb.g_not(b))))),
        Law("if-distributes-seq", "cmd", "ccbc",
            lambda c1, c2, b, d: (e.seq(e.ifelse(b, c1, c2), d),
                                  e.ifelse(b, e.seq(c1, d), e.seq(c2, d)))),
        Law("assert-merges", "cmd", "pp",
            lambda p, q: (e.seq(e.assert_(p), e.assert_(q)),
                          e.assert_(cb.p_and(p, q)))),
        Law("assert-guard-if", "cmd", "b",
            lambda b: (e.assert_(cb.lift_guard(b)),
                       e.ifelse(b, e.skip(), e.abort()))),
        Law("assert-top-skip", "cmd", "",
            lambda: (e.assert_(cb.p_top()), e.skip())),
        Law("assert-bot-abort", "cmd", "",
            lambda: (e.assert_(cb.p_bot()), e.abort())),
        Law("assert-cond-if", "cmd", "ppb",
            lambda p, q, b: (e.assert_(cb.p_cond(p, b, q)),
                             e.ifelse(b, e.assert_(p), e.assert_(q)))),
    ]


def law_catalog(e: Elaborator) -> dict[str, list[Law]]:
    return {"guard": GUARD_LAWS, "pred": PRED_LAWS, "cmd": _cmd_laws(e)}


def _sample_metavar(kind: str, bundle: ModelBundle, rng: random.Random) -> Term:
    if kind == "b":
        return random_guard(bundle, rng, depth=rng.randint(0, 1))
    if kind == "p":
        return random_pred(bundle, rng, depth=rng.randint(0, 2))
    if kind == "c":
        return random_command(bundle, rng, depth=rng.randint(0, 2))
    raise ValueError(kind)


def _check_condition(term: Term, cond: str, bundle: ModelBundle, backend: str,
                     shape: str) -> bool:
    ctx = bundle.elab.state
    idx = OMEGA if shape == "b" else UPSILON
    m = eval_term(term, ctx, idx, bundle.model, backend)
    if cond == "total":
        return m.is_total()
    if cond == "det":
        return m.is_deterministic()
    return m.is_total() and m.is_deterministic()


def run_law(law: Law, bundle: ModelBundle, rng: random.Random,
            backends: Sequence[str]) -> tuple[bool, int]:
    """Sample one instantiation of the law; returns (checked, failures).

    When the law carries a side condition, the conditioned argument is
    sampled with a bias towards satisfying it and re-checked semantically
    per backend; backends where it fails are skipped.  checked is False
    when no backend accepted the sample.
    """
    elab = bundle.elab
    args = [_sample_metavar(kind, bundle, rng) for kind in law.metavars]
    if law.condition is not None:
        i, cond = law.condition
        if law.metavars[i] == "b":
            args[i] = random_guard(bundle, rng, depth=rng.randint(0, 1),
                                   total=(cond == "total"), det=(cond == "det"))
    lhs, rhs = law.build(*args)
    if law.group == "guard":
        ctx, idx = elab.state, OMEGA
    elif law.group == "pred":
        ctx, idx = elab.state, UPSILON
    else:
        ctx, idx = elab.state, elab.psi
    failures = 0
    checked = False
    for backend in backends:
        if law.condition is not None:
            i, cond = law.condition
            if not _check_condition(args[i], cond, bundle, backend,
                                    law.metavars[i]):
                continue
        checked = True
        if not sem_eq(lhs, rhs, ctx, idx, bundle.model, backend):
            failures += 1
    return (checked, failures)
