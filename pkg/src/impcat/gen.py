"""Seeded random generation of carriers, tables, terms and program parts.

Everything is driven by ``random.Random`` so campaigns are reproducible
from the seed alone.  ``random_bundle`` builds a model together with an
inventory of generator names grouped by guaranteed flavour (total,
deterministic, constant, closed, ...); the flavour guarantees are by
construction and re-checkable semantically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import combinators as cb
from .backends import Morphism, Obj, UNIT, product
from .combinators import Elaborator
from .kernel import (Gen, GeneratorDecl, Loop, Return, Signature, Term, fresh)
from .models import BACKENDS, Model


# ---------------------------------------------------------------------------
# Rows and tables


def random_row(cls: type[Morphism], rng: random.Random, cods: Sequence[Obj],
               total: Optional[bool] = None, det: Optional[bool] = None):
    """One random row over the tagged union of cods.

    total=True forces full mass / definedness, det=True at most one entry
    (Dirac for stoch).  None leaves the property to chance.
    """
    entries = [(i, y) for i, c in enumerate(cods) for y in c.elems]
    if not entries:
        return cls.row_zero()
    if cls.backend == "par":
        if total is False or (not total and rng.random() < 0.25):
            return None
        return rng.choice(entries)
    if cls.backend == "rel":
        if det:
            if total or (total is None and rng.random() < 0.7):
                return frozenset((rng.choice(entries),))
            return frozenset()
        if total is False:
            return frozenset()
        k = rng.randint(1 if total else 0, min(3, len(entries)))
        if total and k == 0:
            k = 1
        return frozenset(rng.sample(entries, k)) if k else frozenset()
    # stoch
    if det:
        if total or (total is None and rng.random() < 0.7):
            return {rng.choice(entries): Fraction(1)}
        return {}
    if total is False and rng.random() < 0.4:
        return {}
    k = rng.randint(1, min(3, len(entries)))
    picked = rng.sample(entries, k)
    nums = [rng.randint(1, 5) for _ in picked]
    slack = 0 if total else rng.choice([0, 0, 1, 3])
    denom = sum(nums) + slack
    return {e: Fraction(n, denom) for e, n in zip(picked, nums)}


def random_morphism(cls: type[Morphism], rng: random.Random, dom: Obj,
                    cods: Sequence[Obj], total: Optional[bool] = None,
                    det: Optional[bool] = None) -> Morphism:
    rows = {x: random_row(cls, rng, cods, total=total, det=det) for x in dom.elems}
    return cls(dom, tuple(cods), rows)


def random_sub_morphism(f: Morphism, rng: random.Random) -> Morphism:
    """A random morphism <= f in the backend order."""
    cls = type(f)
    rows = {}
    for x, row in f.rows.items():
        if cls.backend == "rel":
            rows[x] = frozenset(e for e in row if rng.random() < 0.7)
        elif cls.backend == "par":
            rows[x] = row if (row is not None and rng.random() < 0.8) else None
        else:
            scaled = {e: (w if rng.random() < 0.7 else
                          w * Fraction(rng.randint(0, 3), 4))
                      for e, w in row.items()}
            rows[x] = {e: w for e, w in scaled.items() if w}
    return cls(f.dom, f.cods, rows)


# ---------------------------------------------------------------------------
# Models with a flavoured generator inventory


@dataclass
class ModelBundle:
    model: Model
    elab: Elaborator
    inventory: dict[str, list[str]] = field(default_factory=dict)
    rng_seed: int = 0

    def pick(self, rng: random.Random, *flavors: str) -> str:
        names = [n for f in flavors for n in self.inventory.get(f, [])]
        return rng.choice(names)

    def type_of_guard(self, name: str) -> str:
        return self.model.signature.generators[name].inputs[0]


FLAVORS = ("guard_td", "guard_t", "guard", "guard_const",
           "closed_guard_t", "closed_guard",
           "expr_td", "expr", "sampler", "state_atom", "worker")


def random_bundle(rng: random.Random,
                  backends: Sequence[str] = ("rel", "par", "stoch"),
                  max_carrier: int = 3, n_state_vars: int = 2,
                  name: str = "random") -> ModelBundle:
    """A model over a state vector plus flavoured generators for each type.

    Per state type: a total+deterministic guard, a total guard, a plain
    guard, total+deterministic and plain unary expression generators and a
    total sampler; globally: a constant guard, closed guards, two total
    state atoms and a two-branch worker.
    """
    n_state_vars = max(1, n_state_vars)
    types = {f"T{i}": tuple(str(k) for k in range(rng.randint(2, max_carrier)))
             for i in range(n_state_vars)}
    state_tys = tuple(f"T{i}" for i in range(n_state_vars))

    gens: dict[str, GeneratorDecl] = {}
    inv: dict[str, list[str]] = {f: [] for f in FLAVORS}
    plan: list[tuple[str, Optional[bool], Optional[bool]]] = []

    def decl(gname, inputs, branches, flavor, total=None, det=None):
        gens[gname] = GeneratorDecl(gname, tuple(inputs),
                                    tuple(tuple(b) for b in branches))
        inv[flavor].append(gname)
        plan.append((gname, total, det))

    for i, ty in enumerate(state_tys):
        decl(f"gd{i}", [ty], [[], []], "guard_td", total=True, det=True)
        decl(f"gt{i}", [ty], [[], []], "guard_t", total=True)
        decl(f"g{i}", [ty], [[], []], "guard")
        decl(f"ed{i}", [ty], [[ty]], "expr_td", total=True, det=True)
        decl(f"e{i}", [ty], [[ty]], "expr")
        decl(f"sm{i}", [], [[ty]], "sampler", total=True)
    decl("gc", [state_tys[0]], [[], []], "guard_const")
    decl("cgt", [], [[], []], "closed_guard_t", total=True)
    decl("cg", [], [[], []], "closed_guard")
    decl("st0", [], [list(state_tys)], "state_atom", total=True)
    decl("st1", [], [list(state_tys)], "state_atom", total=True)
    decl("wk0", [state_tys[0]], [[state_tys[0]], []], "worker")

    sig = Signature(types=frozenset(types), generators=gens)
    state = tuple((f"x{i}", ty) for i, ty in enumerate(state_tys))
    model = Model(signature=sig, carriers=types, default_context=state, name=name)
    for b in backends:
        cls = BACKENDS[b]
        for gname, total, det in plan:
            dom = model.gen_dom(gname)
            cods = model.gen_cods(gname)
            if gname == "gc":
                row = random_row(cls, rng, cods, total=rng.random() < 0.8)
                m = cls(dom, cods, {x: row for x in dom.elems})
            else:
                m = random_morphism(cls, rng, dom, cods, total=total, det=det)
            model.set_table(b, gname, m)
    return ModelBundle(model=model, elab=Elaborator(state=state), inventory=inv)


def random_model(rng: random.Random, **kw) -> Model:
    return random_bundle(rng, **kw).model


# ---------------------------------------------------------------------------
# Guards, predicates, expressions, commands, states


def random_guard(bundle: ModelBundle, rng: random.Random, depth: int = 1,
                 total: bool = False, det: bool = False) -> Term:
    """A guard term; total/det restrict the ingredients so the property
    holds by construction (still re-checked semantically by callers)."""
    elab = bundle.elab
    if depth <= 0 or rng.random() < 0.45:
        r = rng.random()
        if r < 0.1:
            return cb.mk_L()
        if r < 0.2:
            return cb.mk_R()
        if det and total:
            name = bundle.pick(rng, "guard_td")
        elif det:
            name = bundle.pick(rng, "guard_td")
        elif total:
            name = bundle.pick(rng, "guard_td", "guard_t")
        else:
            name = bundle.pick(rng, "guard_td", "guard_t", "guard", "guard_const")
        ty = bundle.type_of_guard(name)
        xs = [x for x, t in elab.state if t == ty]
        return Gen(name, (rng.choice(xs),), (((), cb.mk_L()), ((), cb.mk_R())))
    op = rng.random()
    b1 = random_guard(bundle, rng, depth - 1, total, det)
    if op < 0.34:
        return cb.g_not(b1)
    b2 = random_guard(bundle, rng, depth - 1, total, det)
    return cb.g_and(b1, b2) if op < 0.67 else cb.g_or(b1, b2)


def closed_guard(bundle: ModelBundle, rng: random.Random,
                 total: bool = False) -> Term:
    flavors = ("closed_guard_t",) if total else ("closed_guard_t", "closed_guard")
    name = bundle.pick(rng, *flavors)
    return Gen(name, (), (((), cb.mk_L()), ((), cb.mk_R())))


def random_expr(bundle: ModelBundle, rng: random.Random, ty: str,
                total_det: bool = False) -> Term:
    """An expression term at (eps : ty)."""
    elab = bundle.elab
    xs = [x for x, t in elab.state if t == ty]
    flavors = ["expr_td"] if total_det else ["expr_td", "expr"]
    cands = [n for f in flavors for n in bundle.inventory[f]
             if bundle.model.signature.generators[n].inputs == (ty,)]
    samplers = [n for n in bundle.inventory["sampler"]
                if bundle.model.signature.generators[n].branches == ((ty,),)]
    r = rng.random()
    if r < 0.4 and xs:
        return cb.expr_var(rng.choice(xs))
    if r < 0.8 and cands and xs:
        return cb.expr_gen(rng.choice(cands), (rng.choice(xs),))
    if samplers and not total_det:
        return cb.expr_gen(rng.choice(samplers), ())
    if xs:
        return cb.expr_var(rng.choice(xs))
    return cb.expr_gen(rng.choice(samplers), ())


def random_pred(bundle: ModelBundle, rng: random.Random, depth: int = 1) -> Term:
    r = rng.random()
    if depth <= 0 or r < 0.35:
        q = rng.random()
        if q < 0.15:
            return cb.p_top()
        if q < 0.22:
            return cb.p_bot()
        return cb.lift_guard(random_guard(bundle, rng, depth=0))
    if r < 0.55:
        return cb.p_and(random_pred(bundle, rng, depth - 1),
                        random_pred(bundle, rng, depth - 1))
    if r < 0.75:
        return cb.p_cond(random_pred(bundle, rng, depth - 1),
                         random_guard(bundle, rng, depth=0),
                         random_pred(bundle, rng, depth - 1))
    x, ty = rng.choice(list(bundle.elab.state))
    return cb.p_subst(random_pred(bundle, rng, depth - 1), x,
                      random_expr(bundle, rng, ty))


def random_command(bundle: ModelBundle, rng: random.Random, depth: int = 2,
                   total_only: bool = False, loops: bool = True) -> Term:
    """A command term over the bundle's state vector.

    total_only restricts to constructs that keep commands total (no
    asserts, aborts, loops or partial generators).
    """
    elab = bundle.elab
    r = rng.random()
    if depth <= 0 or r < 0.3:
        q = rng.random()
        if q < 0.25:
            return elab.skip()
        if q < 0.5:
            pairs = [(x, y) for x, tx in elab.state for y, ty in elab.state
                     if tx == ty]
            x, y = rng.choice(pairs)
            return elab.var_assign((x,), (y,))
        if q < 0.75:
            x, ty = rng.choice(list(elab.state))
            e = random_expr(bundle, rng, ty, total_det=total_only)
            return elab.assign_expr(x, e)
        if not total_only:
            if q < 0.9:
                return elab.assert_(random_pred(bundle, rng, depth=1))
            x, ty = rng.choice(list(elab.state))
            samplers = [n for n in bundle.inventory["sampler"]
                        if bundle.model.signature.generators[n].branches == ((ty,),)]
            return elab.sample(x, cb.expr_gen(rng.choice(samplers), ()))
        return elab.skip()
    if r < 0.55:
        return elab.seq(random_command(bundle, rng, depth - 1, total_only, loops),
                        random_command(bundle, rng, depth - 1, total_only, loops))
    if r < 0.8 or total_only or not loops:
        b = random_guard(bundle, rng, depth=1, total=total_only)
        return elab.ifelse(b,
                           random_command(bundle, rng, depth - 1, total_only, loops),
                           random_command(bundle, rng, depth - 1, total_only, loops))
    b = random_guard(bundle, rng, depth=0, total=True, det=rng.random() < 0.7)
    return elab.while_(b, random_command(bundle, rng, depth - 1, total_only,
                                         loops=False))


def random_state(bundle: ModelBundle, rng: random.Random, depth: int = 1) -> Term:
    elab = bundle.elab
    r = rng.random()
    if depth <= 0 or r < 0.4:
        if rng.random() < 0.06:
            return elab.s_bot()
        return elab.state_atom(rng.choice(bundle.inventory["state_atom"]))
    if r < 0.6:
        return elab.observe(random_state(bundle, rng, depth - 1),
                            random_pred(bundle, rng, depth=1))
    if r < 0.8:
        return elab.s_choice(random_state(bundle, rng, depth - 1),
                             closed_guard(bundle, rng),
                             random_state(bundle, rng, depth - 1))
    x, ty = rng.choice(list(elab.state))
    samplers = [n for n in bundle.inventory["sampler"]
                if bundle.model.signature.generators[n].branches == ((ty,),)]
    return elab.mute(random_state(bundle, rng, depth - 1), x,
                     cb.expr_gen(rng.choice(samplers), ()))


# ---------------------------------------------------------------------------
# Raw terms (for the kernel-axiom harness)


def random_term(rng: random.Random, ctx: Sequence[tuple[str, str]],
                idx: Sequence[tuple[str, tuple[str, ...]]], sig: Signature,
                depth: int, loop_ok: bool = True) -> Term:
    """A random well-typed term at the given context and index."""
    env: dict[str, str] = {}
    for x, ty in ctx:
        if x not in env:
            env[x] = ty
    return _rand_term(rng, env, {a: tuple(tys) for a, tys in idx}, sig, depth,
                      loop_ok)


def _pick_args(rng, env, tys):
    args = []
    for ty in tys:
        cands = [x for x, t in env.items() if t == ty]
        if not cands:
            return None
        args.append(rng.choice(cands))
    return tuple(args)


def _rand_term(rng, env, labels, sig, depth, loop_ok) -> Term:
    rets = []
    for lbl, tys in labels.items():
        args = _pick_args(rng, env, tys)
        if args is not None:
            rets.append(Return(lbl, args))
    gens = []
    if depth > 0:
        for g in sig.generators.values():
            if _pick_args(rng, env, g.inputs) is not None:
                gens.append(g)
    if not rets and not gens:
        raise ValueError("no term derivable at this context and index")
    use_gen = gens and (not rets or rng.random() < 0.65)
    use_loop = (loop_ok and depth > 0 and rets and not use_gen
                and rng.random() < 0.3)
    if use_gen:
        g = rng.choice(gens)
        args = _pick_args(rng, env, g.inputs)
        branches = []
        for tys in g.branches:
            binders = []
            env2 = dict(env)
            for ty in tys:
                v = fresh("var", set(env2), hint="u")
                binders.append(v)
                env2[v] = ty
            branches.append((tuple(binders),
                             _rand_term(rng, env2, labels, sig, depth - 1, loop_ok)))
        return Gen(g.name, args, tuple(branches))
    if use_loop:
        n = rng.randint(1, min(2, len(env)))
        args = tuple(rng.choice(list(env)) for _ in range(n))
        tys = tuple(env[a] for a in args)
        binders = []
        env2 = dict(env)
        for ty in tys:
            v = fresh("var", set(env2), hint="lv")
            binders.append(v)
            env2[v] = ty
        lbl = fresh("label", set(labels), hint="lp")
        labels2 = dict(labels)
        labels2[lbl] = tys
        return Loop(lbl, args, tuple(binders),
                    _rand_term(rng, env2, labels2, sig, depth - 1, loop_ok))
    return rng.choice(rets)
