"""Semantic validation of the term-language axioms.

The kernel does not quotient terms by the interchange and loop axioms;
instead, random well-typed instances of each axiom schema are built here
and both sides are compared in every backend.  Loop uniformity is checked
at the fixpoint level (simulations built from a section of a surjection),
covering both the strict law and the two posetal directions.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .backends import Morphism, eval_term
from .gen import ModelBundle, random_bundle, random_sub_morphism, random_term
from .kernel import (Loop, Return, Term, fresh, rename_labels, subst_label,
                     subst_labels, subst_vars, typecheck, unfold_loop)
from .models import BACKENDS


class AxiomFailure(AssertionError):
    pass


def _sem_eq_all(t1: Term, t2: Term, ctx, idx, bundle: ModelBundle,
                backends: Sequence[str]) -> Optional[str]:
    typecheck(t1, ctx, idx, bundle.model.signature)
    typecheck(t2, ctx, idx, bundle.model.signature)
    for backend in backends:
        m1 = eval_term(t1, ctx, idx, bundle.model, backend)
        m2 = eval_term(t2, ctx, idx, bundle.model, backend)
        if not m1.equal(m2):
            return backend
    return None


def check_interchange(bundle: ModelBundle, rng: random.Random,
                      backends: Sequence[str], depth: int = 2) -> None:
    """Running p then q per branch equals running q then p per branch."""
    sig = bundle.model.signature
    state = list(bundle.elab.state)
    half = max(1, len(state) // 2)
    ctx1 = tuple(state[:half])
    ctx2 = tuple(state[half:]) or ((state[0][0] + "b", state[0][1]),)
    tys = sorted(bundle.model.carriers)
    d1 = tuple((f"al{i}", tuple(rng.sample(tys, rng.randint(0, 1))))
               for i in range(rng.randint(1, 2)))
    d2 = tuple((f"be{i}", tuple(rng.sample(tys, rng.randint(0, 1))))
               for i in range(rng.randint(1, 2)))
    # make every label realisable: only use types present in the context
    d1 = tuple((a, tuple(t for t in sig_tys if any(ty == t for _, ty in ctx1)))
               for (a, sig_tys) in d1)
    d2 = tuple((a, tuple(t for t in sig_tys if any(ty == t for _, ty in ctx2)))
               for (a, sig_tys) in d2)
    p = random_term(rng, ctx1, d1, sig, depth)
    q = random_term(rng, ctx2, d2, sig, depth)
    gamma = {}
    both = []
    for i, (a, atys) in enumerate(d1):
        for j, (b, btys) in enumerate(d2):
            gamma[(a, b)] = f"ga{i}_{j}"
            both.append((f"ga{i}_{j}", atys + btys))
    avoid = set(x for x, _ in ctx1 + ctx2)

    def binders(tys, stem):
        out = []
        for t in tys:
            v = fresh("var", avoid, hint=stem)
            avoid.add(v)
            out.append(v)
        return tuple(out)

    lhs_map = {}
    for (a, atys) in d1:
        us = binders(atys, "iu")
        inner = {}
        for (b, btys) in d2:
            vs = binders(btys, "iv")
            inner[b] = (vs, Return(gamma[(a, b)], us + vs))
        lhs_map[a] = (us, subst_labels(q, inner))
    lhs = subst_labels(p, lhs_map)

    rhs_map = {}
    for (b, btys) in d2:
        vs = binders(btys, "jv")
        inner = {}
        for (a, atys) in d1:
            us = binders(atys, "ju")
            inner[a] = (us, Return(gamma[(a, b)], us + vs))
        rhs_map[b] = (vs, subst_labels(p, inner))
    rhs = subst_labels(q, rhs_map)

    ctx = ctx1 + ctx2
    bad = _sem_eq_all(lhs, rhs, ctx, tuple(both), bundle, backends)
    if bad:
        raise AxiomFailure(f"interchange fails in {bad}")


def _loop_setup(bundle: ModelBundle, rng: random.Random):
    sig = bundle.model.signature
    ctx = bundle.elab.state
    xs = [rng.choice([x for x, _ in ctx])]
    if rng.random() < 0.4:
        xs.append(rng.choice([x for x, _ in ctx]))
    tys = tuple(dict(ctx)[x] for x in xs)
    extra = (("ex", (tys[0],)),)
    return sig, ctx, tuple(xs), tys, extra


def check_dinaturality(bundle: ModelBundle, rng: random.Random,
                       backends: Sequence[str], depth: int = 2) -> None:
    """Rolling the second half of a loop body around the loop point."""
    sig, ctx, xs, xtys, delta = _loop_setup(bundle, rng)
    ytys = tuple(rng.choice(sorted(bundle.model.carriers))
                 for _ in range(rng.randint(1, 2)))
    us = tuple(f"du{i}" for i in range(len(xtys)))
    vs = tuple(f"dv{i}" for i in range(len(ytys)))
    p = random_term(rng, tuple(zip(us, xtys)) + ctx, (("be", ytys),) + delta,
                    sig, depth, loop_ok=False)
    q = random_term(rng, tuple(zip(vs, ytys)) + ctx, (("al", xtys),) + delta,
                    sig, depth, loop_ok=False)
    lhs = Loop("al", xs, us, subst_label(p, "be", vs, q))
    # the p reinserted inside the inner loop jumps back to its label
    inner_body = subst_label(q, "al", us, p)
    vs2 = tuple(f"dw{i}" for i in range(len(vs)))
    inner = Loop("be", vs, vs2, subst_vars(inner_body, vs, vs2))
    rhs = subst_label(subst_vars(p, us, xs), "be", vs, inner)
    bad = _sem_eq_all(lhs, rhs, ctx, delta, bundle, backends)
    if bad:
        raise AxiomFailure(f"dinaturality fails in {bad}")


def check_diagonal(bundle: ModelBundle, rng: random.Random,
                   backends: Sequence[str], depth: int = 2) -> None:
    """Two nested loop points on the same state collapse to one."""
    sig, ctx, xs, xtys, delta = _loop_setup(bundle, rng)
    us = tuple(f"cu{i}" for i in range(len(xtys)))
    p = random_term(rng, tuple(zip(us, xtys)) + ctx,
                    (("be", xtys), ("al", xtys)) + delta, sig, depth,
                    loop_ok=False)
    us2 = tuple(f"cw{i}" for i in range(len(xtys)))
    inner = Loop("be", us, us2, subst_vars(p, us, us2))
    lhs = Loop("al", xs, us, inner)
    rhs = Loop("al", xs, us, rename_labels(p, {"be": "al"}))
    bad = _sem_eq_all(lhs, rhs, ctx, delta, bundle, backends)
    if bad:
        raise AxiomFailure(f"diagonal fails in {bad}")


def check_fixpoint(bundle: ModelBundle, rng: random.Random,
                   backends: Sequence[str], depth: int = 2) -> None:
    """A loop equals its one-step unfolding."""
    sig, ctx, xs, xtys, delta = _loop_setup(bundle, rng)
    us = tuple(f"fu{i}" for i in range(len(xtys)))
    p = random_term(rng, tuple(zip(us, xtys)) + ctx, (("al", xtys),) + delta,
                    sig, depth)
    t = Loop("al", xs, us, p)
    bad = _sem_eq_all(t, unfold_loop(t), ctx, delta, bundle, backends)
    if bad:
        raise AxiomFailure(f"fixpoint fails in {bad}")


def check_top_bottom(bundle: ModelBundle, rng: random.Random,
                     backends: Sequence[str], depth: int = 2) -> None:
    """The diverging loop is least; the empty return is greatest among
    maps into the unit index."""
    sig = bundle.model.signature
    ctx = bundle.elab.state
    t = random_term(rng, ctx, (("al", ()), ("be", ())), sig, depth)
    bot = Loop("w", (), (), Return("w", ()))
    for backend in backends:
        m = eval_term(t, ctx, (("al", ()), ("be", ())), bundle.model, backend)
        z = eval_term(bot, ctx, (("al", ()), ("be", ())), bundle.model, backend)
        if not z.leq(m):
            raise AxiomFailure(f"bottom fails in {backend}")
    u = random_term(rng, ctx, (("al", ()),), sig, depth)
    for backend in backends:
        m = eval_term(u, ctx, (("al", ()),), bundle.model, backend)
        top = eval_term(Return("al", ()), ctx, (("al", ()),),
                        bundle.model, backend)
        if not m.leq(top):
            raise AxiomFailure(f"top fails in {backend}")


def check_generator_monotone(bundle: ModelBundle, rng: random.Random,
                             backends: Sequence[str]) -> None:
    """The generator rule of posetal reasoning: smaller tables under the
    declared order give smaller denotations, branchwise."""
    sig = bundle.model.signature
    ctx = bundle.elab.state
    name = bundle.pick(rng, "guard", "guard_t", "worker")
    decl = sig.generators[name]
    ty = decl.inputs[0]
    x = rng.choice([v for v, t in ctx if t == ty])
    idx = (("al", ()),)
    branches = []
    small_branches = []
    for btys in decl.branches:
        binders = tuple(fresh("var", {v for v, _ in ctx}, hint="gb")
                        for _ in btys)
        body = random_term(rng, tuple(zip(binders, btys)) + ctx, idx, sig, 1)
        branches.append((binders, body))
        small_branches.append((binders, body))
    from .kernel import Gen
    t_big = Gen(name, (x,), tuple(branches))
    for backend in backends:
        big = bundle.model.table(backend, name)
        small = random_sub_morphism(big, rng)
        m_big = eval_term(t_big, ctx, idx, bundle.model, backend)
        saved = bundle.model.tables[backend][name]
        bundle.model.tables[backend][name] = small
        try:
            m_small = eval_term(t_big, ctx, idx, bundle.model, backend)
        finally:
            bundle.model.tables[backend][name] = saved
        if not m_small.leq(m_big):
            raise AxiomFailure(f"generator monotonicity fails in {backend}")


def uniformity_setup(cls, rng: random.Random, X, Y, Z):
    """A section-built simulation: f on X, g on Y and a surjection h with
    f;(h+id) = h;g exactly."""
    from .gen import random_morphism
    ys = list(Y.elems)
    mapping = {}
    for i, x in enumerate(X.elems):
        mapping[x] = ys[i % len(ys)] if i < len(ys) else rng.choice(ys)
    h = cls(X, (Y,), {x: cls.row_unit((0, mapping[x])) for x in X.elems})
    section = {}
    for x in X.elems:
        section.setdefault(mapping[x], x)
    g = random_morphism(cls, rng, Y, [Y, Z])
    f_rows = {}
    for x in X.elems:
        f_rows[x] = cls.row_map(
            g.rows[mapping[x]],
            lambda e: (0, section[e[1]]) if e[0] == 0 else e)
    f = cls(X, (X, Z), f_rows)
    return f, g, h


def check_uniformity(bundle: ModelBundle, rng: random.Random,
                     backends: Sequence[str]) -> None:
    """Strict uniformity and both posetal directions at the fixpoint level.

    With f;(h+id) = h;g: fix(f) = h;fix(g); lowering f below the premise
    keeps fix(f') <= h;fix(g); lowering g keeps h;fix(g') <= fix(f).
    """
    from .backends import basic_obj
    for backend in backends:
        cls = BACKENDS[backend]
        X = bundle.model.carrier_obj(sorted(bundle.model.carriers)[0])
        Y = X
        Z = bundle.model.carrier_obj(sorted(bundle.model.carriers)[-1])
        f, g, h = uniformity_setup(cls, rng, X, Y, Z)
        lhs = f.fix()
        rhs = h.then(g.fix())
        if not lhs.equal(rhs):
            raise AxiomFailure(f"uniformity fails in {backend}")
        f2 = random_sub_morphism(f, rng)
        # premise: f2;(h+id) <= h;g, by construction
        if not f2.compose(0, h).leq(h.compose(0, g)):
            raise AxiomFailure("uniformity premise construction broken")
        if not f2.fix().leq(h.then(g.fix())):
            raise AxiomFailure(f"backward posetal uniformity fails in {backend}")
        g2 = random_sub_morphism(g, rng)
        if not h.compose(0, g2).leq(f.compose(0, h)):
            raise AxiomFailure("uniformity premise construction broken")
        if not h.then(g2.fix()).leq(f.fix()):
            raise AxiomFailure(f"forward posetal uniformity fails in {backend}")


AXIOM_CHECKS = {
    "interchange": check_interchange,
    "dinaturality": check_dinaturality,
    "diagonal": check_diagonal,
    "fixpoint": check_fixpoint,
    "top-bottom": check_top_bottom,
    "generator-monotone": check_generator_monotone,
    "posetal-uniformity": check_uniformity,
}


def run_axiom_campaign(seed: int, instances: int,
                       backends: Sequence[str] = ("rel", "par", "stoch"),
                       max_carrier: int = 3) -> dict:
    """Validate every axiom on `instances` random instances per backend."""
    report = {}
    for name, check in AXIOM_CHECKS.items():
        rng = random.Random((seed, name).__hash__() & 0xFFFFFFFF)
        failures = 0
        done = 0
        bundle = None
        for i in range(instances):
            if i % 40 == 0:
                bundle = random_bundle(rng, max_carrier=max_carrier,
                                       n_state_vars=2)
            try:
                check(bundle, rng, backends)
                done += 1
            except AxiomFailure:
                failures += 1
        report[name] = {"instances": done + failures, "failures": failures}
    return report
