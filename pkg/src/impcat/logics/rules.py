"""The rule-soundness harness.

Every derivation rule of the correctness, incorrectness, outcome-style,
relational correctness and relational incorrectness systems is checked by
random instantiation: sample the rule's metavariables over a random model,
verify the premises and side conditions semantically, and then demand the
conclusion.  A violation would be an implementation bug, so it is returned
as a replayable counterexample bundle (terms plus the full model).

Premise-bearing rules mix rejection sampling with fallback instantiations
that satisfy the premises by construction, so every attempt budget yields
enough applicable instances.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .. import combinators as cb
from ..backends import (Morphism, eval_term, m_assert, m_branch, m_ifelse,
                        m_seq, m_while)
from ..combinators import Elaborator, OMEGA, UPSILON
from ..gen import (ModelBundle, closed_guard, random_bundle, random_command,
                   random_guard, random_morphism, random_pred, random_state,
                   random_sub_morphism, random_expr)
from ..kernel import Term
from ..models import BACKENDS
from .couplings import (CouplingWitness, SideConditionViolated, couple_ifelse4,
                        couple_ifelse_det, couple_product, couple_seq,
                        couple_swap, couple_while_det, couple_while_gen,
                        is_coupling, project)
from .triples import Triple, check_triple, rel_validity


@dataclass
class Attempt:
    applicable: bool
    failure: Optional[dict] = None


@dataclass(frozen=True)
class Rule:
    rule_id: str
    theorem: str
    run: Callable[[ModelBundle, random.Random, str], Attempt]
    relational: bool = False


# ---------------------------------------------------------------------------
# Shared helpers


def _ev(bundle, backend, term, ctx, idx):
    return eval_term(term, ctx, idx, bundle.model, backend)


def _guard_m(bundle, backend, b, elab=None):
    e = elab or bundle.elab
    return _ev(bundle, backend, b, e.state, OMEGA)


def _pred_m(bundle, backend, p, elab=None):
    e = elab or bundle.elab
    return _ev(bundle, backend, p, e.state, UPSILON)


def _hoare(bundle, backend, p, c, q) -> bool:
    t = Triple("assert-correct", p, c, q)
    return check_triple(t, bundle.elab, bundle.model, backend).valid


def _outcome(bundle, backend, p, c, q) -> bool:
    t = Triple("pred-correct", p, c, q)
    return check_triple(t, bundle.elab, bundle.model, backend).valid


def _incorr(bundle, backend, s, c, t_post) -> bool:
    t = Triple("state-incorrect", s, c, t_post)
    return check_triple(t, bundle.elab, bundle.model, backend).valid


def _pred_leq(bundle, backend, p, q, elab=None) -> bool:
    e = elab or bundle.elab
    return _pred_m(bundle, backend, p, e).leq(_pred_m(bundle, backend, q, e))


def _state_geq(bundle, backend, s, t) -> bool:
    e = bundle.elab
    ms = _ev(bundle, backend, s, (), e.psi)
    mt = _ev(bundle, backend, t, (), e.psi)
    return mt.leq(ms)


def _fail(rule_id, backend, bundle, pieces) -> Attempt:
    from ..surface import dump_model, print_term
    info = {"rule": rule_id, "backend": backend,
            "model": dump_model(bundle.model)}
    for k, v in pieces.items():
        info[k] = print_term(v) if hasattr(v, "label") or hasattr(v, "gen") \
            else repr(v)
    return Attempt(True, failure=info)


def _search(rng, tries, sample, good):
    for _ in range(tries):
        x = sample()
        if good(x):
            return x
    return None


# ---------------------------------------------------------------------------
# Assertion-correctness rules (Hoare-style)


def _mk_hoare_rules() -> list[Rule]:
    rules = []

    def add(name, fn):
        rules.append(Rule(f"hoare.{name}", "assert-correctness", fn))

    def skip(bundle, rng, backend):
        p = random_pred(bundle, rng, depth=1)
        e = bundle.elab
        if not _hoare(bundle, backend, p, e.skip(), p):
            return _fail("hoare.skip", backend, bundle, {"p": p})
        return Attempt(True)
    add("skip", skip)

    def comp(bundle, rng, backend):
        e = bundle.elab
        c1 = random_command(bundle, rng, depth=2)
        c2 = random_command(bundle, rng, depth=2)
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1),
                     random_pred(bundle, rng, 1)),
            lambda pqr: _hoare(bundle, backend, pqr[0], c1, pqr[1])
            and _hoare(bundle, backend, pqr[1], c2, pqr[2]))
        if found is None:
            found = (cb.p_bot(), cb.p_bot(), random_pred(bundle, rng, 1)) \
                if rng.random() < 0.5 else \
                (random_pred(bundle, rng, 1), cb.p_top(), cb.p_top())
            if not (_hoare(bundle, backend, found[0], c1, found[1])
                    and _hoare(bundle, backend, found[1], c2, found[2])):
                return Attempt(False)
        p, q, r = found
        if not _hoare(bundle, backend, p, e.seq(c1, c2), r):
            return _fail("hoare.comp", backend, bundle,
                         {"p": p, "q": q, "r": r, "c1": c1, "c2": c2})
        return Attempt(True)
    add("comp", comp)

    def assign(bundle, rng, backend):
        e = bundle.elab
        x, ty = rng.choice(list(e.state))
        expr = random_expr(bundle, rng, ty, total_det=True)
        em = _ev(bundle, backend, expr, e.state, ((cb.EXPR_EPS, (ty,)),))
        if not (em.is_total() and em.is_deterministic()):
            return Attempt(False)
        p = random_pred(bundle, rng, depth=1)
        pre = cb.p_subst(p, x, expr)
        cmd = e.assign_expr(x, expr)
        if not _hoare(bundle, backend, pre, cmd, p):
            return _fail("hoare.assign", backend, bundle,
                         {"p": p, "x": cb.expr_var(x), "e": expr})
        return Attempt(True)
    add("assign", assign)

    def choice(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1)
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda pq: _hoare(bundle, backend, pq[0], c1, pq[1])
            and _hoare(bundle, backend, pq[0], c2, pq[1]))
        if found is None:
            found = (cb.p_bot(), random_pred(bundle, rng, 1)) \
                if rng.random() < 0.5 else (random_pred(bundle, rng, 1), cb.p_top())
            if not (_hoare(bundle, backend, found[0], c1, found[1])
                    and _hoare(bundle, backend, found[0], c2, found[1])):
                return Attempt(False)
        p, q = found
        if not _hoare(bundle, backend, p, e.ifelse(b, c1, c2), q):
            return _fail("hoare.choice", backend, bundle,
                         {"p": p, "q": q, "b": b, "c1": c1, "c2": c2})
        return Attempt(True)
    add("choice", choice)

    def loop(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1)
        c = random_command(bundle, rng, depth=1, loops=False)
        p = _search(rng, 10, lambda: random_pred(bundle, rng, 1),
                    lambda p: _hoare(bundle, backend, p, c, p))
        if p is None:
            p = cb.p_top() if rng.random() < 0.5 else cb.p_bot()
            if not _hoare(bundle, backend, p, c, p):
                return Attempt(False)
        if not _hoare(bundle, backend, p, e.while_(b, c), p):
            return _fail("hoare.loop", backend, bundle, {"p": p, "b": b, "c": c})
        return Attempt(True)
    add("loop", loop)

    def unroll(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1)
        c = random_command(bundle, rng, depth=1, loops=False)
        w = e.while_(b, c)
        unrolled = e.ifelse(b, e.seq(c, w), e.skip())
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda pq: _hoare(bundle, backend, pq[0], unrolled, pq[1]))
        if found is None:
            found = (cb.p_bot(), random_pred(bundle, rng, 1))
            if not _hoare(bundle, backend, found[0], unrolled, found[1]):
                return Attempt(False)
        p, q = found
        if not _hoare(bundle, backend, p, w, q):
            return _fail("hoare.unroll", backend, bundle,
                         {"p": p, "q": q, "b": b, "c": c})
        return Attempt(True)
    add("unroll", unroll)

    def ifelse(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, det=True)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_deterministic():
            return Attempt(False)
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        pre1 = lambda p: cb.p_and(p, cb.lift_guard(b))
        pre2 = lambda p: cb.p_and(p, cb.lift_guard(cb.g_not(b)))
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda pq: _hoare(bundle, backend, pre1(pq[0]), c1, pq[1])
            and _hoare(bundle, backend, pre2(pq[0]), c2, pq[1]))
        if found is None:
            found = (random_pred(bundle, rng, 1), cb.p_top())
            if not (_hoare(bundle, backend, pre1(found[0]), c1, found[1])
                    and _hoare(bundle, backend, pre2(found[0]), c2, found[1])):
                return Attempt(False)
        p, q = found
        if not _hoare(bundle, backend, p, e.ifelse(b, c1, c2), q):
            return _fail("hoare.ifelse", backend, bundle,
                         {"p": p, "q": q, "b": b, "c1": c1, "c2": c2})
        return Attempt(True)
    add("ifelse", ifelse)

    def while_rule(bundle, rng, backend, rule_id="hoare.while"):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, det=True)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_deterministic():
            return Attempt(False)
        c = random_command(bundle, rng, depth=1, loops=False)
        inv = lambda p: cb.p_and(cb.lift_guard(b), p)
        p = _search(rng, 10, lambda: random_pred(bundle, rng, 1),
                    lambda p: _hoare(bundle, backend, inv(p), c, p))
        if p is None:
            p = cb.p_top() if rng.random() < 0.5 else cb.p_bot()
            if not _hoare(bundle, backend, inv(p), c, p):
                return Attempt(False)
        post = cb.p_and(p, cb.lift_guard(cb.g_not(b)))
        if not _hoare(bundle, backend, p, e.while_(b, c), post):
            return _fail(rule_id, backend, bundle, {"p": p, "b": b, "c": c})
        return Attempt(True)
    add("while", while_rule)

    def monotone(bundle, rng, backend):
        e = bundle.elab
        c = random_command(bundle, rng, depth=2)
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda pq: _hoare(bundle, backend, pq[0], c, pq[1]))
        if found is None:
            found = (cb.p_bot(), random_pred(bundle, rng, 1))
            if not _hoare(bundle, backend, found[0], c, found[1]):
                return Attempt(False)
        p2, q2 = found
        p1 = cb.p_and(p2, random_pred(bundle, rng, 1))
        q1 = cb.p_top()
        if not (_pred_leq(bundle, backend, p1, p2)
                and _pred_leq(bundle, backend, q2, q1)):
            return Attempt(False)
        if not _hoare(bundle, backend, p1, c, q1):
            return _fail("hoare.monotone", backend, bundle,
                         {"p1": p1, "p2": p2, "q2": q2, "c": c})
        return Attempt(True)
    add("monotone", monotone)

    def and_rule(bundle, rng, backend):
        e = bundle.elab
        c = random_command(bundle, rng, depth=2)
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1),
                     random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda t: _hoare(bundle, backend, t[0], c, t[1])
            and _hoare(bundle, backend, t[2], c, t[3]))
        if found is None:
            found = (cb.p_bot(), random_pred(bundle, rng, 1), cb.p_bot(),
                     random_pred(bundle, rng, 1))
            if not (_hoare(bundle, backend, found[0], c, found[1])
                    and _hoare(bundle, backend, found[2], c, found[3])):
                return Attempt(False)
        p1, q1, p2, q2 = found
        if not _hoare(bundle, backend, cb.p_and(p1, p2), c, cb.p_and(q1, q2)):
            return _fail("hoare.and", backend, bundle,
                         {"p1": p1, "q1": q1, "p2": p2, "q2": q2, "c": c})
        return Attempt(True)
    add("and", and_rule)

    def fail_rule(bundle, rng, backend):
        e = bundle.elab
        p = random_pred(bundle, rng, 1)
        q = random_pred(bundle, rng, 1)
        if not _hoare(bundle, backend, p, e.abort(), q):
            return _fail("hoare.fail", backend, bundle, {"p": p, "q": q})
        return Attempt(True)
    add("fail", fail_rule)

    def assert_rule(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1)
        p = random_pred(bundle, rng, 1)
        r = random_pred(bundle, rng, 1)
        # premise: q and r == bot; build q as the lift of a guard that
        # contradicts r, or fall back to bot
        q = _search(rng, 6, lambda: random_pred(bundle, rng, 1),
                    lambda q: _pred_leq(bundle, backend, cb.p_and(q, r),
                                        cb.p_bot()))
        if q is None:
            q = cb.p_bot()
        pre = cb.p_cond(p, b, q)
        post = cb.p_and(p, cb.lift_guard(b))
        if not _hoare(bundle, backend, pre, e.assert_(r), post):
            return _fail("hoare.assert", backend, bundle,
                         {"p": p, "q": q, "r": r, "b": b})
        return Attempt(True)
    add("assert", assert_rule)

    def top(bundle, rng, backend):
        e = bundle.elab
        p = random_pred(bundle, rng, 1)
        c = random_command(bundle, rng, depth=2)
        if not _hoare(bundle, backend, p, c, cb.p_top()):
            return _fail("hoare.top", backend, bundle, {"p": p, "c": c})
        return Attempt(True)
    add("top", top)

    def bot(bundle, rng, backend):
        e = bundle.elab
        q = random_pred(bundle, rng, 1)
        c = random_command(bundle, rng, depth=2)
        if not _hoare(bundle, backend, cb.p_bot(), c, q):
            return _fail("hoare.bot", backend, bundle, {"q": q, "c": c})
        return Attempt(True)
    add("bot", bot)

    rules.append(Rule("prop1.while-invariant", "loop-invariant principle",
                      lambda b, r, k: while_rule(b, r, k,
                                                 rule_id="prop1.while-invariant")))
    return rules


# ---------------------------------------------------------------------------
# State-incorrectness rules


def _mk_incorr_rules() -> list[Rule]:
    rules = []

    def add(name, fn):
        rules.append(Rule(f"incorr.{name}", "state-incorrectness", fn))

    def skip(bundle, rng, backend):
        s = random_state(bundle, rng, depth=1)
        if not _incorr(bundle, backend, s, bundle.elab.skip(), s):
            return _fail("incorr.skip", backend, bundle, {"s": s})
        return Attempt(True)
    add("skip", skip)

    def comp(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        t = e.seq(s, c1) if rng.random() < 0.7 else e.s_bot()
        r = e.seq(t, c2) if rng.random() < 0.7 else e.s_bot()
        if not (_incorr(bundle, backend, s, c1, t)
                and _incorr(bundle, backend, t, c2, r)):
            return Attempt(False)
        if not _incorr(bundle, backend, s, e.seq(c1, c2), r):
            return _fail("incorr.comp", backend, bundle,
                         {"s": s, "t": t, "r": r, "c1": c1, "c2": c2})
        return Attempt(True)
    add("comp", comp)

    def comp_error(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        if not _incorr(bundle, backend, s, c1, e.s_bot()):
            return Attempt(False)
        if not _incorr(bundle, backend, s, e.seq(c1, c2), e.s_bot()):
            return _fail("incorr.comp-error", backend, bundle,
                         {"s": s, "c1": c1, "c2": c2})
        return Attempt(True)
    add("comp-error", comp_error)

    def assign(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        pairs = [(x, y) for x, tx in e.state for y, ty in e.state if tx == ty]
        x, y = rng.choice(pairs)
        post = e.cosubst(s, x, y)
        if not _incorr(bundle, backend, s, e.var_assign((x,), (y,)), post):
            return _fail("incorr.assign", backend, bundle, {"s": s})
        return Attempt(True)
    add("assign", assign)

    def sample(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        x, ty = rng.choice(list(e.state))
        samplers = [n for n in bundle.inventory["sampler"]
                    if bundle.model.signature.generators[n].branches == ((ty,),)]
        s0 = cb.expr_gen(rng.choice(samplers), ())
        post = e.mute(s, x, s0)
        if not _incorr(bundle, backend, s, e.sample(x, s0), post):
            return _fail("incorr.sample", backend, bundle, {"s": s})
        return Attempt(True)
    add("sample", sample)

    def choice_side(left):
        def fn(bundle, rng, backend):
            e = bundle.elab
            s = random_state(bundle, rng, depth=1)
            b = random_guard(bundle, rng, depth=1)
            c1 = random_command(bundle, rng, depth=1)
            c2 = random_command(bundle, rng, depth=1)
            guard_pred = cb.lift_guard(b) if left else \
                cb.lift_guard(cb.g_not(b))
            branch_cmd = c1 if left else c2
            obs = e.observe(s, guard_pred)
            t = e.seq(obs, branch_cmd) if rng.random() < 0.7 else e.s_bot()
            if not _incorr(bundle, backend, obs, branch_cmd, t):
                return Attempt(False)
            name = "incorr.choice-left" if left else "incorr.choice-right"
            if not _incorr(bundle, backend, s, e.ifelse(b, c1, c2), t):
                return _fail(name, backend, bundle,
                             {"s": s, "b": b, "c1": c1, "c2": c2, "t": t})
            return Attempt(True)
        return fn
    add("choice-left", choice_side(True))
    add("choice-right", choice_side(False))

    def convex(bundle, rng, backend):
        e = bundle.elab
        b = closed_guard(bundle, rng)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_central_constant():
            return Attempt(False)
        c = random_command(bundle, rng, depth=1)
        s1 = random_state(bundle, rng, depth=1)
        s2 = random_state(bundle, rng, depth=1)
        t1 = e.seq(s1, c) if rng.random() < 0.7 else e.s_bot()
        t2 = e.seq(s2, c) if rng.random() < 0.7 else e.s_bot()
        if not (_incorr(bundle, backend, s1, c, t1)
                and _incorr(bundle, backend, s2, c, t2)):
            return Attempt(False)
        pre = e.s_choice(s1, b, s2)
        post = e.s_choice(t1, b, t2)
        if not _incorr(bundle, backend, pre, c, post):
            return _fail("incorr.convex", backend, bundle,
                         {"s1": s1, "s2": s2, "b": b, "c": c})
        return Attempt(True)
    add("convex", convex)

    def iter_zero(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        b = random_guard(bundle, rng, depth=1)
        c = random_command(bundle, rng, depth=1, loops=False)
        post = e.observe(s, cb.lift_guard(cb.g_not(b)))
        if not _incorr(bundle, backend, s, e.while_(b, c), post):
            return _fail("incorr.iter-zero", backend, bundle,
                         {"s": s, "b": b, "c": c})
        return Attempt(True)
    add("iter-zero", iter_zero)

    def iter_rule(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        b = random_guard(bundle, rng, depth=1, total=True, det=True)
        c = random_command(bundle, rng, depth=1, loops=False)
        w = e.while_(b, c)
        obs = e.observe(s, cb.lift_guard(b))
        body = e.seq(c, w)
        t = e.seq(obs, body) if rng.random() < 0.7 else e.s_bot()
        if not _incorr(bundle, backend, obs, body, t):
            return Attempt(False)
        if not _incorr(bundle, backend, s, w, t):
            return _fail("incorr.iter", backend, bundle,
                         {"s": s, "b": b, "c": c, "t": t})
        return Attempt(True)
    add("iter", iter_rule)

    def monotone(bundle, rng, backend):
        e = bundle.elab
        c = random_command(bundle, rng, depth=1)
        s2 = random_state(bundle, rng, depth=1)
        t2 = e.seq(s2, c) if rng.random() < 0.7 else e.s_bot()
        if not _incorr(bundle, backend, s2, c, t2):
            return Attempt(False)
        # s1 >= s2 and t1 <= t2 by construction
        s1 = s2
        p = random_pred(bundle, rng, 1)
        s2b = e.observe(s2, p)
        if not _state_geq(bundle, backend, s1, s2b):
            return Attempt(False)
        if not _incorr(bundle, backend, s2b, c, e.seq(s2b, c)):
            return Attempt(False)
        t1 = e.observe(e.seq(s2b, c), random_pred(bundle, rng, 1))
        if not _state_geq(bundle, backend, e.seq(s2b, c), t1):
            return Attempt(False)
        if not _incorr(bundle, backend, s1, c, t1):
            return _fail("incorr.monotone", backend, bundle,
                         {"s1": s1, "c": c, "t1": t1})
        return Attempt(True)
    add("monotone", monotone)

    def assert_rule(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        p = random_pred(bundle, rng, 1)
        if not _incorr(bundle, backend, s, e.assert_(p), e.observe(s, p)):
            return _fail("incorr.assert", backend, bundle, {"s": s, "p": p})
        return Attempt(True)
    add("assert", assert_rule)

    def fail_rule(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        if not _incorr(bundle, backend, s, e.abort(), e.s_bot()):
            return _fail("incorr.fail", backend, bundle, {"s": s})
        return Attempt(True)
    add("fail", fail_rule)

    def bot(bundle, rng, backend):
        e = bundle.elab
        s = random_state(bundle, rng, depth=1)
        c = random_command(bundle, rng, depth=2)
        if not _incorr(bundle, backend, s, c, e.s_bot()):
            return _fail("incorr.bot", backend, bundle, {"s": s, "c": c})
        return Attempt(True)
    add("bot", bot)
    return rules


# ---------------------------------------------------------------------------
# Predicate-correctness rules (outcome-style)


def _mk_outcome_rules() -> list[Rule]:
    rules = []

    def add(name, fn):
        rules.append(Rule(f"outcome.{name}", "predicate-correctness", fn))

    def cq(bundle, c, q):
        """The predicate 'run c, then test q'."""
        from ..kernel import subst_label
        return subst_label(c, cb.CMD_ETA, bundle.elab.vars, q)

    def skip(bundle, rng, backend):
        p = random_pred(bundle, rng, 1)
        if not _outcome(bundle, backend, p, bundle.elab.skip(), p):
            return _fail("outcome.skip", backend, bundle, {"p": p})
        return Attempt(True)
    add("skip", skip)

    def comp(bundle, rng, backend):
        e = bundle.elab
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        r = random_pred(bundle, rng, 1)
        q = cq(bundle, c2, r) if rng.random() < 0.7 else cb.p_bot()
        p = cq(bundle, c1, q) if rng.random() < 0.7 else cb.p_bot()
        if not (_outcome(bundle, backend, p, c1, q)
                and _outcome(bundle, backend, q, c2, r)):
            return Attempt(False)
        if not _outcome(bundle, backend, p, e.seq(c1, c2), r):
            return _fail("outcome.comp", backend, bundle,
                         {"p": p, "q": q, "r": r, "c1": c1, "c2": c2})
        return Attempt(True)
    add("comp", comp)

    def assign(bundle, rng, backend):
        e = bundle.elab
        x, ty = rng.choice(list(e.state))
        expr = random_expr(bundle, rng, ty)
        em = _ev(bundle, backend, expr, e.state, ((cb.EXPR_EPS, (ty,)),))
        if not em.is_deterministic():
            return Attempt(False)
        p = random_pred(bundle, rng, 1)
        if not _outcome(bundle, backend, cb.p_subst(p, x, expr),
                        e.assign_expr(x, expr), p):
            return _fail("outcome.assign", backend, bundle, {"p": p, "e": expr})
        return Attempt(True)
    add("assign", assign)

    def sample(bundle, rng, backend):
        e = bundle.elab
        x, ty = rng.choice(list(e.state))
        samplers = [n for n in bundle.inventory["sampler"]
                    if bundle.model.signature.generators[n].branches == ((ty,),)]
        s0 = cb.expr_gen(rng.choice(samplers), ())
        p = random_pred(bundle, rng, 1)
        if not _outcome(bundle, backend, cb.p_subst(p, x, s0),
                        e.sample(x, s0), p):
            return _fail("outcome.sample", backend, bundle, {"p": p})
        return Attempt(True)
    add("sample", sample)

    def unroll(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1)
        c = random_command(bundle, rng, depth=1, loops=False)
        w = e.while_(b, c)
        unrolled = e.ifelse(b, e.seq(c, w), e.skip())
        q = random_pred(bundle, rng, 1)
        p = cq(bundle, unrolled, q) if rng.random() < 0.7 else cb.p_bot()
        if not _outcome(bundle, backend, p, unrolled, q):
            return Attempt(False)
        if not _outcome(bundle, backend, p, w, q):
            return _fail("outcome.unroll", backend, bundle,
                         {"p": p, "q": q, "b": b, "c": c})
        return Attempt(True)
    add("unroll", unroll)

    def choice(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, total=True)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_total():
            return Attempt(False)
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda pq: _outcome(bundle, backend, pq[0], c1, pq[1])
            and _outcome(bundle, backend, pq[0], c2, pq[1]))
        if found is None:
            q = random_pred(bundle, rng, 1)
            p = cb.p_and(cq(bundle, c1, q), cq(bundle, c2, q))
            found = (p, q)
            if not (_outcome(bundle, backend, p, c1, q)
                    and _outcome(bundle, backend, p, c2, q)):
                return Attempt(False)
        p, q = found
        if not _outcome(bundle, backend, p, e.ifelse(b, c1, c2), q):
            return _fail("outcome.choice", backend, bundle,
                         {"p": p, "q": q, "b": b, "c1": c1, "c2": c2})
        return Attempt(True)
    add("choice", choice)

    def ifelse(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, total=True, det=True)
        bm = _guard_m(bundle, backend, b)
        if not (bm.is_total() and bm.is_deterministic()):
            return Attempt(False)
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        pre1 = lambda p: cb.p_and(cb.lift_guard(b), p)
        pre2 = lambda p: cb.p_and(cb.lift_guard(cb.g_not(b)), p)
        found = _search(
            rng, 10,
            lambda: (random_pred(bundle, rng, 1), random_pred(bundle, rng, 1)),
            lambda pq: _outcome(bundle, backend, pre1(pq[0]), c1, pq[1])
            and _outcome(bundle, backend, pre2(pq[0]), c2, pq[1]))
        if found is None:
            found = (cb.p_bot(), random_pred(bundle, rng, 1))
            if not (_outcome(bundle, backend, pre1(found[0]), c1, found[1])
                    and _outcome(bundle, backend, pre2(found[0]), c2, found[1])):
                return Attempt(False)
        p, q = found
        if not _outcome(bundle, backend, p, e.ifelse(b, c1, c2), q):
            return _fail("outcome.ifelse", backend, bundle,
                         {"p": p, "q": q, "b": b, "c1": c1, "c2": c2})
        return Attempt(True)
    add("ifelse", ifelse)

    def assert_rule(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, det=True)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_deterministic():
            return Attempt(False)
        p = random_pred(bundle, rng, 1)
        r = random_pred(bundle, rng, 1)
        q = cb.p_and(cb.lift_guard(cb.g_not(b)), r)
        notb_q = cb.p_and(cb.lift_guard(cb.g_not(b)), q)
        # premise: (not b)# and q == bot
        if not (_pred_leq(bundle, backend, notb_q, cb.p_bot())
                and _pred_leq(bundle, backend, cb.p_bot(), notb_q)):
            q = cb.p_bot()
        if not _outcome(bundle, backend, cb.p_cond(p, b, q),
                        e.assert_(cb.lift_guard(b)), p):
            return _fail("outcome.assert", backend, bundle,
                         {"p": p, "q": q, "b": b})
        return Attempt(True)
    add("assert", assert_rule)

    def convex(bundle, rng, backend):
        e = bundle.elab
        b = closed_guard(bundle, rng)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_central_constant():
            return Attempt(False)
        c = random_command(bundle, rng, depth=1)
        q1 = random_pred(bundle, rng, 1)
        q2 = random_pred(bundle, rng, 1)
        p1 = cq(bundle, c, q1) if rng.random() < 0.7 else cb.p_bot()
        p2 = cq(bundle, c, q2) if rng.random() < 0.7 else cb.p_bot()
        if not (_outcome(bundle, backend, p1, c, q1)
                and _outcome(bundle, backend, p2, c, q2)):
            return Attempt(False)
        if not _outcome(bundle, backend, cb.p_cond(p1, b, p2), c,
                        cb.p_cond(q1, b, q2)):
            return _fail("outcome.convex", backend, bundle,
                         {"p1": p1, "p2": p2, "q1": q1, "q2": q2, "b": b,
                          "c": c})
        return Attempt(True)
    add("convex", convex)

    def monotone(bundle, rng, backend):
        e = bundle.elab
        c = random_command(bundle, rng, depth=1)
        q2 = random_pred(bundle, rng, 1)
        p2 = cq(bundle, c, q2) if rng.random() < 0.7 else cb.p_bot()
        if not _outcome(bundle, backend, p2, c, q2):
            return Attempt(False)
        p1 = cb.p_and(p2, random_pred(bundle, rng, 1))
        q1 = cb.p_top()
        if not (_pred_leq(bundle, backend, p1, p2)
                and _pred_leq(bundle, backend, q2, q1)):
            return Attempt(False)
        if not _outcome(bundle, backend, p1, c, q1):
            return _fail("outcome.monotone", backend, bundle,
                         {"p1": p1, "c": c, "q1": q1})
        return Attempt(True)
    add("monotone", monotone)

    def bot(bundle, rng, backend):
        e = bundle.elab
        q = random_pred(bundle, rng, 1)
        c = random_command(bundle, rng, depth=2)
        if not _outcome(bundle, backend, cb.p_bot(), c, q):
            return _fail("outcome.bot", backend, bundle, {"q": q, "c": c})
        return Attempt(True)
    add("bot", bot)
    return rules


def nonrel_rules() -> list[Rule]:
    return _mk_hoare_rules() + _mk_incorr_rules() + _mk_outcome_rules()


# ---------------------------------------------------------------------------
# Relational rules (shared between the correctness and incorrectness shapes)


@dataclass
class RelCtx:
    bundle: ModelBundle        # program 1 (the bundle's own context)
    b2: ModelBundle            # program 2 (renamed context, same model)
    joint: ModelBundle         # predicates over both contexts
    joint_swapped: ModelBundle

    @property
    def e1(self) -> Elaborator:
        return self.bundle.elab

    @property
    def e2(self) -> Elaborator:
        return self.b2.elab


def _relctx(bundle: ModelBundle) -> RelCtx:
    e1 = bundle.elab
    e2 = Elaborator(state=tuple((x + "r", ty) for x, ty in e1.state))
    ej = Elaborator(state=e1.state + e2.state)
    ejs = Elaborator(state=e2.state + e1.state)
    mk = lambda e: ModelBundle(model=bundle.model, elab=e,
                               inventory=bundle.inventory)
    return RelCtx(bundle=bundle, b2=mk(e2), joint=mk(ej), joint_swapped=mk(ejs))


def _beq(b1: Term, b2: Term) -> Term:
    """Predicate over the joint context: both guards take the same branch."""
    return cb.pick(b1, cb.pick(b2, cb.p_top(), cb.p_bot()),
                   cb.pick(b2, cb.p_bot(), cb.p_top()))


def _btensor(p1: Term, p2: Term) -> Term:
    return cb.p_and(p1, p2)


def _ev_cmd1(rc: RelCtx, backend, c):
    return _ev(rc.bundle, backend, c, rc.e1.state, rc.e1.psi)


def _ev_cmd2(rc: RelCtx, backend, d):
    return _ev(rc.b2, backend, d, rc.e2.state, rc.e2.psi)


def _ev_joint_pred(rc: RelCtx, backend, p, swapped=False):
    e = rc.joint_swapped.elab if swapped else rc.joint.elab
    return _ev(rc.joint, backend, p, e.state, UPSILON)


def _rel_holds(rc: RelCtx, backend, shape, pre, post, cm, dm,
               w: CouplingWitness, swapped=False) -> bool:
    if not is_coupling(w.h, cm, dm):
        return False
    pre_m = _ev_joint_pred(rc, backend, pre, swapped)
    post_m = _ev_joint_pred(rc, backend, post, swapped)
    return rel_validity(shape, pre_m, project(w.h), post_m).valid


def _total_cmd(rc: RelCtx, rng, backend, side: int, depth=1):
    """A total command with its morphism, or None."""
    bundle = rc.bundle if side == 1 else rc.b2
    for _ in range(6):
        c = random_command(bundle, rng, depth=depth, total_only=True,
                           loops=False)
        m = _ev_cmd1(rc, backend, c) if side == 1 else _ev_cmd2(rc, backend, c)
        if m.is_total():
            return c, m
    return None


def _total_guard(rc: RelCtx, rng, backend, side: int, det=False):
    bundle = rc.bundle if side == 1 else rc.b2
    for _ in range(6):
        b = random_guard(bundle, rng, depth=0, total=True, det=det)
        e = rc.e1 if side == 1 else rc.e2
        m = _ev(bundle, backend, b, e.state, OMEGA)
        if m.is_total() and (not det or m.is_deterministic()):
            return b, m
    return None


def _shape_fallbacks(shape, rng, rc):
    """Predicate fallbacks making a premise triple valid outright."""
    if shape == "rel-assert-correct":
        if rng.random() < 0.5:
            return ("pre", cb.p_bot())
        return ("post", cb.p_top())
    if rng.random() < 0.5:
        return ("pre", cb.p_top())
    return ("post", cb.p_bot())


def _sample_rel_premise(rc, rng, backend, shape, c=None, cm=None, d=None,
                        dm=None, tries=8):
    """A premise triple with a product witness; None if sampling failed."""
    if c is None:
        got = _total_cmd(rc, rng, backend, 1)
        if got is None:
            return None
        c, cm = got
    if d is None:
        got = _total_cmd(rc, rng, backend, 2)
        if got is None:
            return None
        d, dm = got
    try:
        w = couple_product(cm, dm)
    except SideConditionViolated:
        return None
    for _ in range(tries):
        p = random_pred(rc.joint, rng, depth=1)
        q = random_pred(rc.joint, rng, depth=1)
        if _rel_holds(rc, backend, shape, p, q, cm, dm, w):
            return (c, cm, d, dm, w, p, q)
    kind, fixed = _shape_fallbacks(shape, rng, rc)
    p = fixed if kind == "pre" else random_pred(rc.joint, rng, depth=1)
    q = fixed if kind == "post" else random_pred(rc.joint, rng, depth=1)
    if _rel_holds(rc, backend, shape, p, q, cm, dm, w):
        return (c, cm, d, dm, w, p, q)
    return None


def _mk_rel_rules(shape: str, prefix: str) -> list[Rule]:
    rules = []

    def add(name, fn):
        rules.append(Rule(f"{prefix}.{name}", shape, fn, relational=True))

    def skip(bundle, rng, backend):
        rc = _relctx(bundle)
        p = random_pred(rc.joint, rng, depth=1)
        skip1 = _ev_cmd1(rc, backend, rc.e1.skip())
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        w = couple_product(skip1, skip2)
        if not _rel_holds(rc, backend, shape, p, p, skip1, skip2, w):
            return _fail(f"{prefix}.skip", backend, bundle, {"p": p})
        return Attempt(True)
    add("skip", skip)

    def comp(bundle, rng, backend):
        rc = _relctx(bundle)
        first = _sample_rel_premise(rc, rng, backend, shape)
        if first is None:
            return Attempt(False)
        c1, cm1, d1, dm1, g1, p, q = first
        second = None
        got1 = _total_cmd(rc, rng, backend, 1)
        got2 = _total_cmd(rc, rng, backend, 2)
        if got1 is None or got2 is None:
            return Attempt(False)
        c2, cm2 = got1
        d2, dm2 = got2
        try:
            g2 = couple_product(cm2, dm2)
        except SideConditionViolated:
            return Attempt(False)
        r = None
        for _ in range(8):
            cand = random_pred(rc.joint, rng, depth=1)
            if _rel_holds(rc, backend, shape, q, cand, cm2, dm2, g2):
                r = cand
                break
        if r is None:
            cand = cb.p_top() if shape == "rel-assert-correct" else cb.p_bot()
            if _rel_holds(rc, backend, shape, q, cand, cm2, dm2, g2):
                r = cand
            else:
                return Attempt(False)
        w = couple_seq(g1.h, g2.h, cm1, dm1, cm2, dm2)
        cm = cm1.then(cm2)
        dm = dm1.then(dm2)
        if not _rel_holds(rc, backend, shape, p, r, cm, dm, w):
            return _fail(f"{prefix}.comp", backend, bundle,
                         {"p": p, "q": q, "r": r, "c1": c1, "c2": c2,
                          "d1": d1, "d2": d2})
        return Attempt(True)
    add("comp", comp)

    def assign(bundle, rng, backend):
        rc = _relctx(bundle)
        x1, ty1 = rng.choice(list(rc.e1.state))
        x2, ty2 = rng.choice(list(rc.e2.state))
        if shape == "rel-assert-correct":
            e1t = random_expr(rc.bundle, rng, ty1, total_det=True)
            e2t = random_expr(rc.b2, rng, ty2, total_det=True)
            m1 = _ev(rc.bundle, backend, e1t, rc.e1.state,
                     ((cb.EXPR_EPS, (ty1,)),))
            m2 = _ev(rc.b2, backend, e2t, rc.e2.state, ((cb.EXPR_EPS, (ty2,)),))
            if not (m1.is_total() and m1.is_deterministic()
                    and m2.is_total() and m2.is_deterministic()):
                return Attempt(False)
        else:
            v1 = rng.choice([v for v, t in rc.e1.state if t == ty1])
            v2 = rng.choice([v for v, t in rc.e2.state if t == ty2])
            e1t, e2t = cb.expr_var(v1), cb.expr_var(v2)
        p = random_pred(rc.joint, rng, depth=1)
        pre = cb.p_subst(cb.p_subst(p, x1, e1t), x2, e2t)
        a1 = rc.e1.assign_expr(x1, e1t)
        a2 = rc.e2.assign_expr(x2, e2t)
        am1 = _ev_cmd1(rc, backend, a1)
        am2 = _ev_cmd2(rc, backend, a2)
        try:
            w = couple_product(am1, am2)
        except SideConditionViolated:
            return Attempt(False)
        if not _rel_holds(rc, backend, shape, pre, p, am1, am2, w):
            return _fail(f"{prefix}.assign", backend, bundle,
                         {"p": p, "e1": e1t, "e2": e2t})
        return Attempt(True)
    add("assign", assign)

    def choice(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1)
        g2 = _total_guard(rc, rng, backend, 2)
        if g1 is None or g2 is None:
            return Attempt(False)
        b1, bm1 = g1
        b2, bm2 = g2
        got = [_total_cmd(rc, rng, backend, 1), _total_cmd(rc, rng, backend, 2),
               _total_cmd(rc, rng, backend, 1), _total_cmd(rc, rng, backend, 2)]
        if any(g is None for g in got):
            return Attempt(False)
        (c1, cm1), (c2, cm2), (d1, dm1), (d2, dm2) = got
        try:
            wg = couple_product(cm1, cm2)
            wgp = couple_product(cm1, dm2)
            whp = couple_product(dm1, cm2)
            wh = couple_product(dm1, dm2)
        except SideConditionViolated:
            return Attempt(False)
        pq = None
        for _ in range(8):
            p = random_pred(rc.joint, rng, depth=1)
            q = random_pred(rc.joint, rng, depth=1)
            if all(_rel_holds(rc, backend, shape, p, q, a, b, w)
                   for (a, b, w) in ((cm1, cm2, wg), (cm1, dm2, wgp),
                                     (dm1, cm2, whp), (dm1, dm2, wh))):
                pq = (p, q)
                break
        if pq is None:
            kind, fixed = _shape_fallbacks(shape, rng, rc)
            p = fixed if kind == "pre" else random_pred(rc.joint, rng, 1)
            q = fixed if kind == "post" else random_pred(rc.joint, rng, 1)
            if not all(_rel_holds(rc, backend, shape, p, q, a, b, w)
                       for (a, b, w) in ((cm1, cm2, wg), (cm1, dm2, wgp),
                                         (dm1, cm2, whp), (dm1, dm2, wh))):
                return Attempt(False)
            pq = (p, q)
        p, q = pq
        try:
            w = couple_ifelse4(bm1, bm2, wg, wgp, whp, wh, cm1, cm2, dm1, dm2)
        except SideConditionViolated:
            return Attempt(False)
        if1 = m_ifelse(bm1, cm1, dm1)
        if2 = m_ifelse(bm2, cm2, dm2)
        if not _rel_holds(rc, backend, shape, p, q, if1, if2, w):
            return _fail(f"{prefix}.choice", backend, bundle,
                         {"p": p, "q": q, "b1": b1, "b2": b2})
        return Attempt(True)
    add("choice", choice)

    def ifelse(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1, det=True)
        g2 = _total_guard(rc, rng, backend, 2, det=True)
        if g1 is None or g2 is None:
            return Attempt(False)
        b1, bm1 = g1
        b2, bm2 = g2
        got = [_total_cmd(rc, rng, backend, 1), _total_cmd(rc, rng, backend, 2),
               _total_cmd(rc, rng, backend, 1), _total_cmd(rc, rng, backend, 2)]
        if any(g is None for g in got):
            return Attempt(False)
        (c1, cm1), (c2, cm2), (d1, dm1), (d2, dm2) = got
        try:
            wg = couple_product(cm1, cm2)
            wh = couple_product(dm1, dm2)
        except SideConditionViolated:
            return Attempt(False)
        both = _btensor(cb.lift_guard(b1), cb.lift_guard(b2))
        neither = _btensor(cb.lift_guard(cb.g_not(b1)),
                           cb.lift_guard(cb.g_not(b2)))
        p = None
        for _ in range(8):
            cand = random_pred(rc.joint, rng, depth=1)
            q_cand = random_pred(rc.joint, rng, depth=1)
            if (_rel_holds(rc, backend, shape, cb.p_and(both, cand), q_cand,
                           cm1, cm2, wg)
                    and _rel_holds(rc, backend, shape,
                                   cb.p_and(neither, cand), q_cand,
                                   dm1, dm2, wh)):
                p, q = cand, q_cand
                break
        if p is None:
            p = cb.p_bot()
            q = random_pred(rc.joint, rng, depth=1)
            if not (_rel_holds(rc, backend, shape, cb.p_and(both, p), q,
                               cm1, cm2, wg)
                    and _rel_holds(rc, backend, shape, cb.p_and(neither, p),
                                   q, dm1, dm2, wh)):
                return Attempt(False)
        try:
            w = couple_ifelse_det(bm1, bm2, wg, wh, cm1, cm2, dm1, dm2)
        except SideConditionViolated:
            return Attempt(False)
        if1 = m_ifelse(bm1, cm1, dm1)
        if2 = m_ifelse(bm2, cm2, dm2)
        pre = cb.p_and(_beq(b1, b2), p)
        if not _rel_holds(rc, backend, shape, pre, q, if1, if2, w):
            return _fail(f"{prefix}.ifelse", backend, bundle,
                         {"p": p, "q": q, "b1": b1, "b2": b2})
        return Attempt(True)
    add("ifelse", ifelse)

    def loop(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1)
        g2 = _total_guard(rc, rng, backend, 2)
        if g1 is None or g2 is None:
            return Attempt(False)
        b1, bm1 = g1
        b2, bm2 = g2
        got1 = _total_cmd(rc, rng, backend, 1)
        got2 = _total_cmd(rc, rng, backend, 2)
        if got1 is None or got2 is None:
            return Attempt(False)
        c1, cm1 = got1
        c2, cm2 = got2
        skip1 = _ev_cmd1(rc, backend, rc.e1.skip())
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        try:
            wg = couple_product(cm1, cm2)
            wh1 = couple_product(cm1, skip2)
            wh2 = couple_product(skip1, cm2)
        except SideConditionViolated:
            return Attempt(False)
        p = None
        for _ in range(8):
            cand = random_pred(rc.joint, rng, depth=1)
            if (_rel_holds(rc, backend, shape, cand, cand, cm1, cm2, wg)
                    and _rel_holds(rc, backend, shape, cand, cand, cm1, skip2,
                                   wh1)
                    and _rel_holds(rc, backend, shape, cand, cand, skip1, cm2,
                                   wh2)):
                p = cand
                break
        if p is None:
            p = cb.p_bot() if shape == "rel-assert-correct" else cb.p_top()
            if not (_rel_holds(rc, backend, shape, p, p, cm1, cm2, wg)
                    and _rel_holds(rc, backend, shape, p, p, cm1, skip2, wh1)
                    and _rel_holds(rc, backend, shape, p, p, skip1, cm2, wh2)):
                return Attempt(False)
        try:
            w = couple_while_gen(bm1, bm2, wg, wh1, wh2, cm1, cm2)
        except SideConditionViolated:
            return Attempt(False)
        w1 = m_while(bm1, cm1)
        w2 = m_while(bm2, cm2)
        if not _rel_holds(rc, backend, shape, p, p, w1, w2, w):
            return _fail(f"{prefix}.loop", backend, bundle,
                         {"p": p, "b1": b1, "b2": b2, "c1": c1, "c2": c2})
        return Attempt(True)
    add("loop", loop)

    def while_rule(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1, det=True)
        g2 = _total_guard(rc, rng, backend, 2, det=True)
        if g1 is None or g2 is None:
            return Attempt(False)
        b1, bm1 = g1
        b2, bm2 = g2
        got1 = _total_cmd(rc, rng, backend, 1)
        got2 = _total_cmd(rc, rng, backend, 2)
        if got1 is None or got2 is None:
            return Attempt(False)
        c1, cm1 = got1
        c2, cm2 = got2
        try:
            wg = couple_product(cm1, cm2)
        except SideConditionViolated:
            return Attempt(False)
        both = _btensor(cb.lift_guard(b1), cb.lift_guard(b2))
        agree = _beq(b1, b2)
        p = None
        for _ in range(8):
            cand = random_pred(rc.joint, rng, depth=1)
            if _rel_holds(rc, backend, shape, cb.p_and(both, cand),
                          cb.p_and(agree, cand), cm1, cm2, wg):
                p = cand
                break
        if p is None:
            p = cb.p_bot()
            if not _rel_holds(rc, backend, shape, cb.p_and(both, p),
                              cb.p_and(agree, p), cm1, cm2, wg):
                return Attempt(False)
        try:
            w = couple_while_det(bm1, bm2, wg, cm1, cm2)
        except SideConditionViolated:
            return Attempt(False)
        w1 = m_while(bm1, cm1)
        w2 = m_while(bm2, cm2)
        pre = cb.p_and(agree, p)
        post = cb.p_and(_btensor(cb.lift_guard(cb.g_not(b1)),
                                 cb.lift_guard(cb.g_not(b2))), p)
        if not _rel_holds(rc, backend, shape, pre, post, w1, w2, w):
            return _fail(f"{prefix}.while", backend, bundle,
                         {"p": p, "b1": b1, "b2": b2, "c1": c1, "c2": c2})
        return Attempt(True)
    add("while", while_rule)

    def monotone(bundle, rng, backend):
        rc = _relctx(bundle)
        prem = _sample_rel_premise(rc, rng, backend, shape)
        if prem is None:
            return Attempt(False)
        c, cm, d, dm, w, p2, q2 = prem
        r = random_pred(rc.joint, rng, depth=1)
        if shape == "rel-assert-correct":
            p1, q1 = cb.p_and(p2, r), cb.p_top()
            ok = (_pred_leq(rc.joint, backend, p1, p2, rc.joint.elab)
                  and _pred_leq(rc.joint, backend, q2, q1, rc.joint.elab))
        else:
            p1, q1 = cb.p_top(), cb.p_and(q2, r)
            ok = (_pred_leq(rc.joint, backend, p2, p1, rc.joint.elab)
                  and _pred_leq(rc.joint, backend, q1, q2, rc.joint.elab))
        if not ok:
            return Attempt(False)
        if not _rel_holds(rc, backend, shape, p1, q1, cm, dm, w):
            return _fail(f"{prefix}.monotone", backend, bundle,
                         {"p1": p1, "q1": q1, "c": c, "d": d})
        return Attempt(True)
    add("monotone", monotone)

    def symm(bundle, rng, backend):
        rc = _relctx(bundle)
        prem = _sample_rel_premise(rc, rng, backend, shape)
        if prem is None:
            return Attempt(False)
        c, cm, d, dm, w, p, q = prem
        try:
            sw = couple_swap(w, cm, dm)
        except SideConditionViolated:
            return Attempt(False)
        if not _rel_holds(rc, backend, shape, p, q, dm, cm, sw, swapped=True):
            return _fail(f"{prefix}.symm", backend, bundle,
                         {"p": p, "q": q, "c": c, "d": d})
        return Attempt(True)
    add("symm", symm)

    def assign_l(bundle, rng, backend):
        rc = _relctx(bundle)
        x, ty = rng.choice(list(rc.e1.state))
        if shape == "rel-assert-correct":
            e1t = random_expr(rc.bundle, rng, ty, total_det=True)
            m1 = _ev(rc.bundle, backend, e1t, rc.e1.state,
                     ((cb.EXPR_EPS, (ty,)),))
            if not (m1.is_total() and m1.is_deterministic()):
                return Attempt(False)
        else:
            v = rng.choice([v for v, t in rc.e1.state if t == ty])
            e1t = cb.expr_var(v)
        p = random_pred(rc.joint, rng, depth=1)
        pre = cb.p_subst(p, x, e1t)
        a1 = rc.e1.assign_expr(x, e1t)
        am1 = _ev_cmd1(rc, backend, a1)
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        try:
            w = couple_product(am1, skip2)
        except SideConditionViolated:
            return Attempt(False)
        if not _rel_holds(rc, backend, shape, pre, p, am1, skip2, w):
            return _fail(f"{prefix}.assign-l", backend, bundle,
                         {"p": p, "e": e1t})
        return Attempt(True)
    add("assign-l", assign_l)

    def choice_l(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1)
        if g1 is None:
            return Attempt(False)
        b, bm = g1
        got1 = _total_cmd(rc, rng, backend, 1)
        got2 = _total_cmd(rc, rng, backend, 1)
        if got1 is None or got2 is None:
            return Attempt(False)
        c, cm = got1
        d, dm = got2
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        try:
            wg = couple_product(cm, skip2)
            wh = couple_product(dm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        pq = None
        for _ in range(8):
            p = random_pred(rc.joint, rng, depth=1)
            q = random_pred(rc.joint, rng, depth=1)
            if (_rel_holds(rc, backend, shape, p, q, cm, skip2, wg)
                    and _rel_holds(rc, backend, shape, p, q, dm, skip2, wh)):
                pq = (p, q)
                break
        if pq is None:
            kind, fixed = _shape_fallbacks(shape, rng, rc)
            p = fixed if kind == "pre" else random_pred(rc.joint, rng, 1)
            q = fixed if kind == "post" else random_pred(rc.joint, rng, 1)
            if not (_rel_holds(rc, backend, shape, p, q, cm, skip2, wg)
                    and _rel_holds(rc, backend, shape, p, q, dm, skip2, wh)):
                return Attempt(False)
            pq = (p, q)
        p, q = pq
        cls = BACKENDS[backend]
        bm2 = cls(skip2.dom, (type(skip2).discard(skip2.dom).cods[0],) * 2,
                  {x: cls.row_unit((1, ())) for x in skip2.dom.elems})
        try:
            w = couple_ifelse4(bm, bm2, wg, wg, wh, wh, cm, skip2, dm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        if1 = m_ifelse(bm, cm, dm)
        if not _rel_holds(rc, backend, shape, p, q, if1, skip2, w):
            return _fail(f"{prefix}.choice-l", backend, bundle,
                         {"p": p, "q": q, "b": b})
        return Attempt(True)
    add("choice-l", choice_l)

    def ifelse_l(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1, det=True)
        if g1 is None:
            return Attempt(False)
        b, bm = g1
        got1 = _total_cmd(rc, rng, backend, 1)
        got2 = _total_cmd(rc, rng, backend, 1)
        if got1 is None or got2 is None:
            return Attempt(False)
        c, cm = got1
        d, dm = got2
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        try:
            wg = couple_product(cm, skip2)
            wh = couple_product(dm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        pre1 = lambda p: cb.p_and(_btensor(cb.lift_guard(b), cb.p_top()), p)
        pre2 = lambda p: cb.p_and(_btensor(cb.lift_guard(cb.g_not(b)),
                                           cb.p_top()), p)
        pq = None
        for _ in range(8):
            p = random_pred(rc.joint, rng, depth=1)
            q = random_pred(rc.joint, rng, depth=1)
            if (_rel_holds(rc, backend, shape, pre1(p), q, cm, skip2, wg)
                    and _rel_holds(rc, backend, shape, pre2(p), q, dm, skip2,
                                   wh)):
                pq = (p, q)
                break
        if pq is None:
            p = cb.p_bot()
            q = random_pred(rc.joint, rng, depth=1)
            if not (_rel_holds(rc, backend, shape, pre1(p), q, cm, skip2, wg)
                    and _rel_holds(rc, backend, shape, pre2(p), q, dm, skip2,
                                   wh)):
                return Attempt(False)
            pq = (p, q)
        p, q = pq
        cls = BACKENDS[backend]
        from ..backends import UNIT
        bm2 = cls(skip2.dom, (UNIT, UNIT),
                  {x: cls.row_unit((1, ())) for x in skip2.dom.elems})
        try:
            w = couple_ifelse4(bm, bm2, wg, wg, wh, wh, cm, skip2, dm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        if1 = m_ifelse(bm, cm, dm)
        if not _rel_holds(rc, backend, shape, p, q, if1, skip2, w):
            return _fail(f"{prefix}.ifelse-l", backend, bundle,
                         {"p": p, "q": q, "b": b})
        return Attempt(True)
    add("ifelse-l", ifelse_l)

    def loop_l(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1)
        if g1 is None:
            return Attempt(False)
        b, bm = g1
        got = _total_cmd(rc, rng, backend, 1)
        if got is None:
            return Attempt(False)
        c, cm = got
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        try:
            wg = couple_product(cm, skip2)
            wid = couple_product(skip2, skip2)
        except SideConditionViolated:
            return Attempt(False)
        p = None
        for _ in range(8):
            cand = random_pred(rc.joint, rng, depth=1)
            if _rel_holds(rc, backend, shape, cand, cand, cm, skip2, wg):
                p = cand
                break
        if p is None:
            p = cb.p_bot() if shape == "rel-assert-correct" else cb.p_top()
            if not _rel_holds(rc, backend, shape, p, p, cm, skip2, wg):
                return Attempt(False)
        cls = BACKENDS[backend]
        from ..backends import UNIT
        bm2 = cls(skip2.dom, (UNIT, UNIT),
                  {x: cls.row_unit((1, ())) for x in skip2.dom.elems})
        try:
            w = couple_while_gen(bm, bm2, wg, wg, wid, cm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        w1 = m_while(bm, cm)
        if not _rel_holds(rc, backend, shape, p, p, w1, skip2, w):
            return _fail(f"{prefix}.loop-l", backend, bundle,
                         {"p": p, "b": b, "c": c})
        return Attempt(True)
    add("loop-l", loop_l)

    def while_l(bundle, rng, backend):
        rc = _relctx(bundle)
        g1 = _total_guard(rc, rng, backend, 1, det=True)
        if g1 is None:
            return Attempt(False)
        b, bm = g1
        got = _total_cmd(rc, rng, backend, 1)
        if got is None:
            return Attempt(False)
        c, cm = got
        skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
        try:
            wg = couple_product(cm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        pre1 = lambda p: cb.p_and(_btensor(cb.lift_guard(b), cb.p_top()), p)
        p = None
        for _ in range(8):
            cand = random_pred(rc.joint, rng, depth=1)
            if _rel_holds(rc, backend, shape, pre1(cand), cand, cm, skip2, wg):
                p = cand
                break
        if p is None:
            p = cb.p_bot()
            if not _rel_holds(rc, backend, shape, pre1(p), p, cm, skip2, wg):
                return Attempt(False)
        cls = BACKENDS[backend]
        from ..backends import UNIT
        bm2 = cls(skip2.dom, (UNIT, UNIT),
                  {x: cls.row_unit((1, ())) for x in skip2.dom.elems})
        try:
            w = couple_while_det(bm, bm2, wg, cm, skip2)
        except SideConditionViolated:
            return Attempt(False)
        w1 = m_while(bm, cm)
        post = cb.p_and(_btensor(cb.lift_guard(cb.g_not(b)), cb.p_top()), p)
        if not _rel_holds(rc, backend, shape, p, post, w1, skip2, w):
            return _fail(f"{prefix}.while-l", backend, bundle,
                         {"p": p, "b": b, "c": c})
        return Attempt(True)
    add("while-l", while_l)

    if prefix == "rel-incorr":
        def sample_l(bundle, rng, backend):
            rc = _relctx(bundle)
            x, ty = rng.choice(list(rc.e1.state))
            samplers = [n for n in bundle.inventory["sampler"]
                        if bundle.model.signature.generators[n].branches
                        == ((ty,),)]
            s0 = cb.expr_gen(rng.choice(samplers), ())
            m0 = _ev(rc.bundle, backend, s0, (), ((cb.EXPR_EPS, (ty,)),))
            if not m0.is_total():
                return Attempt(False)
            p = random_pred(rc.joint, rng, depth=1)
            pre = cb.p_subst(p, x, s0)
            a1 = rc.e1.sample(x, s0)
            am1 = _ev_cmd1(rc, backend, a1)
            skip2 = _ev_cmd2(rc, backend, rc.e2.skip())
            try:
                w = couple_product(am1, skip2)
            except SideConditionViolated:
                return Attempt(False)
            if not _rel_holds(rc, backend, shape, pre, p, am1, skip2, w):
                return _fail("rel-incorr.sample-l", backend, bundle,
                             {"p": p})
            return Attempt(True)
        add("sample-l", sample_l)
    return rules


# ---------------------------------------------------------------------------
# Lemma checks


def _mk_lemma_rules() -> list[Rule]:
    rules = []

    def lemma96(bundle, rng, backend):
        """If a branch simulates through l, the loop does too."""
        e = bundle.elab
        cls = BACKENDS[backend]
        kind = rng.random()
        if kind < 0.45:
            # invariant family: l = assert p with a valid while premise
            b = random_guard(bundle, rng, depth=1, det=True)
            bm = _guard_m(bundle, backend, b)
            if not bm.is_deterministic():
                return Attempt(False)
            c = random_command(bundle, rng, depth=1, loops=False)
            inv = lambda p: cb.p_and(cb.lift_guard(b), p)
            p = _search(rng, 8, lambda: random_pred(bundle, rng, 1),
                        lambda p: _hoare(bundle, backend, inv(p), c, p))
            if p is None:
                return Attempt(False)
            lm = m_assert(_pred_m(bundle, backend, p))
            b1m = b2m = bm
            c1m = _ev(bundle, backend, c, e.state, e.psi)
            d1m = c1m
            c2m = cls.identity(c1m.dom)
            d2m = m_assert(_pred_m(
                bundle, backend,
                cb.p_and(cb.lift_guard(cb.g_not(b)), p)))
        else:
            # identity family with a random weakening of l
            b = random_guard(bundle, rng, depth=1)
            b1m = b2m = _guard_m(bundle, backend, b)
            c1 = random_command(bundle, rng, depth=1, loops=False)
            c2 = random_command(bundle, rng, depth=1, loops=False)
            c1m = _ev(bundle, backend, c1, e.state, e.psi)
            c2m = _ev(bundle, backend, c2, e.state, e.psi)
            d1m, d2m = c1m, c2m
            lm = random_sub_morphism(cls.identity(c1m.dom), rng)
        lhs = lm.then(m_branch(b1m, c1m, c2m))
        rhs = m_branch(b2m, d1m.then(lm), d2m)
        if not lhs.leq(rhs):
            return Attempt(False)
        concl_l = lm.then(m_while(b1m, c1m)).then(c2m)
        concl_r = m_while(b2m, d1m).then(d2m)
        if not concl_l.leq(concl_r):
            return _fail("lemma.96", backend, bundle, {"note": "see model"})
        return Attempt(True)
    rules.append(Rule("lemma.96", "branch simulation implies loop simulation",
                      lemma96))

    def lemma97(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, det=True)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_deterministic():
            return Attempt(False)
        lhs = e.cmd_branch(b, e.skip(), e.skip())
        rhs = e.cmd_branch(b, e.assert_(cb.lift_guard(b)),
                           e.assert_(cb.lift_guard(cb.g_not(b))))
        m1 = _ev(bundle, backend, lhs, e.state, e.psi2)
        m2 = _ev(bundle, backend, rhs, e.state, e.psi2)
        if not m1.equal(m2):
            return _fail("lemma.97", backend, bundle, {"b": b})
        c1 = random_command(bundle, rng, depth=1)
        c2 = random_command(bundle, rng, depth=1)
        l2 = e.ifelse(b, c1, c2)
        r2 = e.ifelse(b, e.seq(e.assert_(cb.lift_guard(b)), c1),
                      e.seq(e.assert_(cb.lift_guard(cb.g_not(b))), c2))
        m3 = _ev(bundle, backend, l2, e.state, e.psi)
        m4 = _ev(bundle, backend, r2, e.state, e.psi)
        if not m3.equal(m4):
            return _fail("lemma.97", backend, bundle,
                         {"b": b, "c1": c1, "c2": c2})
        return Attempt(True)
    rules.append(Rule("lemma.97", "deterministic guards duplicate", lemma97))

    def lemma98(bundle, rng, backend):
        e = bundle.elab
        b = random_guard(bundle, rng, depth=1, total=True)
        bm = _guard_m(bundle, backend, b)
        if not bm.is_total():
            return Attempt(False)
        t = e.ifelse(b, e.skip(), e.skip())
        m1 = _ev(bundle, backend, t, e.state, e.psi)
        m2 = _ev(bundle, backend, e.skip(), e.state, e.psi)
        if not m1.equal(m2):
            return _fail("lemma.98", backend, bundle, {"b": b})
        return Attempt(True)
    rules.append(Rule("lemma.98", "total branch on skips is skip", lemma98))

    def lemma99(bundle, rng, backend):
        from ..kernel import subst_label
        e = bundle.elab
        p = random_pred(bundle, rng, depth=1)
        b = random_guard(bundle, rng, depth=1)
        br = e.cmd_branch(b, e.skip(), e.skip())
        lhs = subst_label(e.assert_(p), cb.CMD_ETA, e.vars, br)
        rhs = e.cmd_branch(b, e.assert_(p), e.assert_(p))
        m1 = _ev(bundle, backend, lhs, e.state, e.psi2)
        m2 = _ev(bundle, backend, rhs, e.state, e.psi2)
        if not m1.equal(m2):
            return _fail("lemma.99", backend, bundle, {"p": p, "b": b})
        return Attempt(True)
    rules.append(Rule("lemma.99", "asserts pass branches", lemma99))

    def lemma100(bundle, rng, backend):
        cls = BACKENDS[backend]
        from ..backends import UNIT
        tys = sorted(bundle.model.carriers)
        X = bundle.model.carrier_obj(rng.choice(tys))
        Y = bundle.model.carrier_obj(rng.choice(tys))
        f = random_morphism(cls, rng, X, [Y])
        b0 = random_morphism(cls, rng, UNIT, [UNIT, UNIT])
        bX = cls.discard(X).then(b0.to_single()).compose(
            0, cls.case_split(b0.cods))
        bY = cls.discard(Y).then(b0.to_single()).compose(
            0, cls.case_split(b0.cods))
        lhs = f.compose(0, m_branch(bY, cls.identity(Y), cls.identity(Y)))
        rhs = m_branch(bX, f, f)
        if not lhs.equal(rhs):
            return _fail("lemma.100", backend, bundle, {"note": "constant guard"})
        return Attempt(True)
    rules.append(Rule("lemma.100", "constant guards pass anything", lemma100))
    return rules


# ---------------------------------------------------------------------------
# Catalogue and campaign


def all_rules() -> list[Rule]:
    return (nonrel_rules()
            + _mk_rel_rules("rel-assert-correct", "rel-hoare")
            + _mk_rel_rules("rel-pred-incorrect", "rel-incorr")
            + _mk_lemma_rules())


def rules_by_id() -> dict[str, Rule]:
    return {r.rule_id: r for r in all_rules()}


def rule_check(rule_id: str, bundle: ModelBundle, rng: random.Random,
               backend: str) -> Attempt:
    """One instantiation of one rule in one backend."""
    return rules_by_id()[rule_id].run(bundle, rng, backend)


def run_rule_backend(rule: Rule, seed: int, instances: int, backend: str,
                     max_carrier: int = 3) -> dict:
    """Check one rule in one backend on `instances` applicable instances."""
    rng = random.Random(f"{seed}:{rule.rule_id}:{backend}")
    t0 = time.perf_counter()
    applicable = 0
    attempts = 0
    failures: list[dict] = []
    bundle = None
    cap = max(50, instances * 40)
    n_vars = 1 if rule.relational else 2
    while applicable < instances and attempts < cap:
        if attempts % 25 == 0:
            bundle = random_bundle(rng, max_carrier=max_carrier,
                                   n_state_vars=n_vars)
        attempts += 1
        out = rule.run(bundle, rng, backend)
        if out.applicable:
            applicable += 1
            if out.failure is not None:
                failures.append(out.failure)
    return {
        "rule": rule.rule_id,
        "theorem": rule.theorem,
        "backend": backend,
        "instances": applicable,
        "attempts": attempts,
        "counterexamples": failures,
        "sound": not failures and applicable >= instances,
        "seconds": round(time.perf_counter() - t0, 3),
    }


def run_campaign(seed: int, instances: int,
                 backends: Sequence[str] = ("rel", "par", "stoch"),
                 rule_ids: Optional[Sequence[str]] = None,
                 max_carrier: int = 3, jobs: int = 1) -> dict:
    """The full soundness campaign; deterministic given the seed."""
    rules = all_rules()
    if rule_ids is not None:
        wanted = set(rule_ids)
        rules = [r for r in rules if r.rule_id in wanted]
    tasks = [(r, b) for r in rules for b in backends]
    t0 = time.perf_counter()
    if jobs > 1:
        import multiprocessing as mp
        with mp.Pool(jobs) as pool:
            results = pool.starmap(
                _campaign_task,
                [(r.rule_id, seed, instances, b, max_carrier)
                 for r, b in tasks])
    else:
        results = [run_rule_backend(r, seed, instances, b, max_carrier)
                   for r, b in tasks]
    total_cx = sum(len(r["counterexamples"]) for r in results)
    return {
        "seed": seed,
        "instances_per_rule": instances,
        "backends": list(backends),
        "rules": results,
        "total_counterexamples": total_cx,
        "sound": all(r["sound"] for r in results),
        "seconds": round(time.perf_counter() - t0, 3),
    }


def _campaign_task(rule_id: str, seed: int, instances: int, backend: str,
                   max_carrier: int) -> dict:
    return run_rule_backend(rules_by_id()[rule_id], seed, instances, backend,
                            max_carrier)
