"""Derived constructs over the kernel: guards, predicates, commands, states.

Guards are terms at the two-empty-exit index Omega = (a1:(), a2:()),
predicates at Upsilon = (v:()), commands at Psi = (h: state types) over a
declared state vector, and states are closed terms at Psi.  Everything
here elaborates to kernel terms by label substitution; no new primitives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .kernel import (Context, Gen, Index, Loop, Return, Signature, Term,
                     all_names, free_labels, free_vars, fresh, subst_label,
                     subst_labels, subst_vars, typecheck)

GUARD_L = "a1"
GUARD_R = "a2"
PRED_V = "v"
CMD_ETA = "h"
CMD_ETA2 = "h2"
EXPR_EPS = "eps"

OMEGA: Index = ((GUARD_L, ()), (GUARD_R, ()))
UPSILON: Index = ((PRED_V, ()),)


class ShapeError(Exception):
    pass


def _expect_labels(t: Term, allowed: set[str], what: str) -> None:
    bad = free_labels(t) - allowed
    if bad:
        raise ShapeError(f"{what} must only exit through {sorted(allowed)}; "
                         f"found {sorted(bad)}")


# ---------------------------------------------------------------------------
# Guards


def mk_L() -> Term:
    return Return(GUARD_L, ())


def mk_R() -> Term:
    return Return(GUARD_R, ())


def g_not(b: Term) -> Term:
    _expect_labels(b, {GUARD_L, GUARD_R}, "guard")
    return subst_labels(b, {GUARD_L: ((), mk_R()), GUARD_R: ((), mk_L())})


def g_and(b1: Term, b2: Term) -> Term:
    _expect_labels(b1, {GUARD_L, GUARD_R}, "guard")
    _expect_labels(b2, {GUARD_L, GUARD_R}, "guard")
    both_right = subst_labels(b2, {GUARD_L: ((), mk_R()), GUARD_R: ((), mk_R())})
    return subst_labels(b1, {GUARD_L: ((), b2), GUARD_R: ((), both_right)})


def g_or(b1: Term, b2: Term) -> Term:
    _expect_labels(b1, {GUARD_L, GUARD_R}, "guard")
    _expect_labels(b2, {GUARD_L, GUARD_R}, "guard")
    both_left = subst_labels(b2, {GUARD_L: ((), mk_L()), GUARD_R: ((), mk_L())})
    return subst_labels(b1, {GUARD_L: ((), both_left), GUARD_R: ((), b2)})


def pick(b: Term, t1: Term, t2: Term) -> Term:
    """[b]{t1}{t2}: run b, then t1 on its first exit and t2 on its second."""
    _expect_labels(b, {GUARD_L, GUARD_R}, "guard")
    return subst_labels(b, {GUARD_L: ((), t1), GUARD_R: ((), t2)})


def branch(b: Term, t1: Term, t2: Term,
           relabel2: Optional[dict[str, str]] = None) -> Term:
    """<<b>>{t1}{t2} at the concatenated index.

    The second term's interface labels must be disjoint from the first's;
    relabel2 says how to rename them.  When omitted it is derived from the
    labels that happen to occur free, which is only safe when the terms
    mention their whole interface.
    """
    from .kernel import rename_labels
    if relabel2 is None:
        relabel2 = branch_relabeling(t1, t2)
    return pick(b, t1, rename_labels(t2, relabel2))


def branch_relabeling(t1: Term, t2: Term) -> dict[str, str]:
    """Default renaming of t2's occurring labels away from t1's."""
    shared = free_labels(t1) & free_labels(t2)
    avoid = set(free_labels(t1)) | set(free_labels(t2))
    out = {}
    for lbl in sorted(shared):
        nl = fresh("label", avoid, hint=lbl + "_r")
        avoid.add(nl)
        out[lbl] = nl
    return out


# ---------------------------------------------------------------------------
# Predicates


def p_top() -> Term:
    return Return(PRED_V, ())


def p_bot() -> Term:
    return Loop("om", (), (), Return("om", ()))


def p_and(p: Term, q: Term) -> Term:
    _expect_labels(p, {PRED_V}, "predicate")
    _expect_labels(q, {PRED_V}, "predicate")
    return subst_label(p, PRED_V, (), q)


def p_cond(p: Term, b: Term, q: Term) -> Term:
    """p +_b q."""
    _expect_labels(p, {PRED_V}, "predicate")
    _expect_labels(q, {PRED_V}, "predicate")
    return pick(b, p, q)


def lift_guard(b: Term) -> Term:
    """b#: succeed on the first exit, diverge on the second."""
    return pick(b, p_top(), p_bot())


def p_subst(p: Term, x: str, e: Term) -> Term:
    """p[x \\ e]: evaluate the expression, bind x, then test p."""
    _expect_labels(p, {PRED_V}, "predicate")
    _expect_labels(e, {EXPR_EPS}, "expression")
    return subst_label(e, EXPR_EPS, (x,), p)


# ---------------------------------------------------------------------------
# Expressions (single-output terms at (eps : X))


def expr_var(x: str) -> Term:
    return Return(EXPR_EPS, (x,))


def expr_gen(f: str, args: Sequence[str]) -> Term:
    u = fresh("var", set(args), hint="u")
    return Gen(f, tuple(args), (((u,), Return(EXPR_EPS, (u,))),))


# ---------------------------------------------------------------------------
# Commands and states over a declared state vector


@dataclass(frozen=True)
class Elaborator:
    """Command and state combinators close over the program state vector."""

    state: Context  # ((var, type), ...)

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(x for x, _ in self.state)

    @property
    def types(self) -> tuple[str, ...]:
        return tuple(ty for _, ty in self.state)

    @property
    def psi(self) -> Index:
        return ((CMD_ETA, self.types),)

    # -- commands ---------------------------------------------------------

    def skip(self) -> Term:
        return Return(CMD_ETA, self.vars)

    def abort(self) -> Term:
        return self.assert_(p_bot())

    def seq(self, c1: Term, c2: Term) -> Term:
        _expect_labels(c1, {CMD_ETA}, "command")
        _expect_labels(c2, {CMD_ETA}, "command")
        return subst_label(c1, CMD_ETA, self.vars, c2)

    def assert_(self, p: Term) -> Term:
        _expect_labels(p, {PRED_V}, "predicate")
        return subst_label(p, PRED_V, (), self.skip())

    def var_assign(self, us: Sequence[str], vs: Sequence[str]) -> Term:
        if len(us) != len(vs):
            raise ShapeError("assignment arity mismatch")
        for u in us:
            if u not in self.vars:
                raise ShapeError(f"assignment target {u} is not a state variable")
        return subst_vars(self.skip(), tuple(us), tuple(vs))

    def gen_assign(self, us: Sequence[str], f: str, vs: Sequence[str]) -> Term:
        for u in us:
            if u not in self.vars:
                raise ShapeError(f"assignment target {u} is not a state variable")
        avoid = set(self.vars) | set(vs)
        fresh_us = []
        for u in us:
            u2 = fresh("var", avoid, hint=u)
            avoid.add(u2)
            fresh_us.append(u2)
        body = subst_vars(self.skip(), tuple(us), tuple(fresh_us))
        return Gen(f, tuple(vs), ((tuple(fresh_us), body),))

    def ifelse(self, b: Term, c1: Term, c2: Term) -> Term:
        _expect_labels(c1, {CMD_ETA}, "command")
        _expect_labels(c2, {CMD_ETA}, "command")
        return pick(b, c1, c2)

    def cmd_branch(self, b: Term, c1: Term, c2: Term) -> Term:
        """<<b>>{c1}{c2} for commands, at the index (h: Psi), (h2: Psi)."""
        _expect_labels(c1, {CMD_ETA}, "command")
        _expect_labels(c2, {CMD_ETA}, "command")
        return branch(b, c1, c2, relabel2={CMD_ETA: CMD_ETA2})

    @property
    def psi2(self) -> Index:
        """Index of a command branch: two disjoint state exits."""
        return ((CMD_ETA, self.types), (CMD_ETA2, self.types))

    def while_(self, b: Term, c: Term) -> Term:
        _expect_labels(c, {CMD_ETA}, "command")
        lbl = fresh("label", all_names(b) | all_names(c) | {CMD_ETA}, hint="lp")
        jump_back = subst_label(c, CMD_ETA, self.vars, Return(lbl, self.vars))
        inner = pick(b, jump_back, self.skip())
        avoid = set(all_names(inner)) | set(self.vars)
        binders = []
        for x in self.vars:
            x2 = fresh("var", avoid, hint=x)
            avoid.add(x2)
            binders.append(x2)
        body = subst_vars(inner, self.vars, tuple(binders))
        return Loop(lbl, self.vars, tuple(binders), body)

    def assign_expr(self, x: str, e: Term) -> Term:
        """x := e for an expression term e at (eps : X)."""
        if x not in self.vars:
            raise ShapeError(f"assignment target {x} is not a state variable")
        _expect_labels(e, {EXPR_EPS}, "expression")
        u = fresh("var", set(self.vars) | all_names(e), hint="u")
        return subst_label(e, EXPR_EPS, (u,), self.var_assign((x,), (u,)))

    def sample(self, x: str, s: Term) -> Term:
        """x <- s for a closed single-output term s at (eps : X)."""
        if free_vars(s):
            raise ShapeError("sampled state must be closed")
        return self.assign_expr(x, s)

    # -- states -----------------------------------------------------------

    def s_bot(self) -> Term:
        return Loop("om", (), (), Return("om", ()))

    def observe(self, s: Term, p: Term) -> Term:
        """s down p: run the state, then assert."""
        _expect_labels(s, {CMD_ETA}, "state")
        return self.seq(s, self.assert_(p))

    def s_choice(self, s: Term, b: Term, t: Term) -> Term:
        _expect_labels(s, {CMD_ETA}, "state")
        _expect_labels(t, {CMD_ETA}, "state")
        if free_vars(b):
            raise ShapeError("state choice needs a closed guard")
        return pick(b, s, t)

    def cosubst(self, s: Term, u: str, x: str) -> Term:
        """s with u's final value replaced by x's: s ; (u := x)."""
        return self.seq(s, self.var_assign((u,), (x,)))

    def mute(self, s: Term, x: str, sx: Term) -> Term:
        """Resample the component x of s from the closed state sx."""
        return self.seq(s, self.sample(x, sx))

    def state_atom(self, f: str) -> Term:
        """A generator with one all-state branch, as a closed state."""
        avoid = set(self.vars)
        binders = []
        for x in self.vars:
            x2 = fresh("var", avoid, hint=x)
            avoid.add(x2)
            binders.append(x2)
        return Gen(f, (), ((tuple(binders), Return(CMD_ETA, tuple(binders))),))

    # -- checks -------------------------------------------------------------

    def check_command(self, c: Term, sig: Signature) -> None:
        typecheck(c, self.state, self.psi, sig)

    def check_state(self, s: Term, sig: Signature) -> None:
        typecheck(s, (), self.psi, sig)

    def check_guard(self, b: Term, sig: Signature) -> None:
        typecheck(b, self.state, OMEGA, sig)

    def check_predicate(self, p: Term, sig: Signature) -> None:
        typecheck(p, self.state, UPSILON, sig)


# ---------------------------------------------------------------------------
# Elaborating surface syntax


def elaborate_guard(g, elab: Elaborator) -> Term:
    from . import surface as sf
    if isinstance(g, sf.GL):
        return mk_L()
    if isinstance(g, sf.GR):
        return mk_R()
    if isinstance(g, sf.GNot):
        return g_not(elaborate_guard(g.body, elab))
    if isinstance(g, sf.GAnd):
        return g_and(elaborate_guard(g.left, elab), elaborate_guard(g.right, elab))
    if isinstance(g, sf.GOr):
        return g_or(elaborate_guard(g.left, elab), elaborate_guard(g.right, elab))
    if isinstance(g, sf.GCall):
        return Gen(g.name, g.args, (((), mk_L()), ((), mk_R())))
    raise ShapeError(f"not a guard: {g!r}")


def elaborate_expr(e, elab: Elaborator) -> Term:
    from . import surface as sf
    if isinstance(e, sf.EVar):
        return expr_var(e.name)
    if isinstance(e, sf.ECall):
        return expr_gen(e.name, e.args)
    raise ShapeError(f"not an expression: {e!r}")


def elaborate_pred(p, elab: Elaborator) -> Term:
    from . import surface as sf
    if isinstance(p, sf.PTop):
        return p_top()
    if isinstance(p, sf.PBot):
        return p_bot()
    if isinstance(p, sf.PAnd):
        return p_and(elaborate_pred(p.left, elab), elaborate_pred(p.right, elab))
    if isinstance(p, sf.PCond):
        return p_cond(elaborate_pred(p.left, elab),
                      elaborate_guard(p.guard, elab),
                      elaborate_pred(p.right, elab))
    if isinstance(p, sf.PLift):
        return lift_guard(elaborate_guard(p.guard, elab))
    if isinstance(p, sf.PSubst):
        return p_subst(elaborate_pred(p.pred, elab), p.var,
                       elaborate_expr(p.expr, elab))
    if isinstance(p, sf.PCall):
        return Gen(p.name, p.args, (((), p_top()),))
    raise ShapeError(f"not a predicate: {p!r}")


def elaborate_command(c, elab: Elaborator) -> Term:
    from . import surface as sf
    if isinstance(c, sf.Skip):
        return elab.skip()
    if isinstance(c, sf.Abort):
        return elab.abort()
    if isinstance(c, sf.Seq):
        return elab.seq(elaborate_command(c.first, elab),
                        elaborate_command(c.second, elab))
    if isinstance(c, sf.If):
        return elab.ifelse(elaborate_guard(c.guard, elab),
                           elaborate_command(c.then, elab),
                           elaborate_command(c.orelse, elab))
    if isinstance(c, sf.WhileCmd):
        return elab.while_(elaborate_guard(c.guard, elab),
                           elaborate_command(c.body, elab))
    if isinstance(c, sf.AssertCmd):
        return elab.assert_(elaborate_pred(c.pred, elab))
    if isinstance(c, sf.VarAssign):
        return elab.var_assign(c.targets, c.sources)
    if isinstance(c, sf.GenAssign):
        return elab.gen_assign(c.targets, c.gen, c.args)
    if isinstance(c, sf.Sample):
        return elab.sample(c.target, elaborate_expr(c.expr, elab))
    if isinstance(c, sf.CmdChoice):
        return elab.ifelse(elaborate_guard(c.guard, elab),
                           elaborate_command(c.left, elab),
                           elaborate_command(c.right, elab))
    raise ShapeError(f"not a command: {c!r}")


def elaborate_state(s, elab: Elaborator) -> Term:
    from . import surface as sf
    if isinstance(s, sf.SBot):
        return elab.s_bot()
    if isinstance(s, sf.SAtom):
        return elab.state_atom(s.name)
    if isinstance(s, sf.SObserve):
        return elab.observe(elaborate_state(s.state, elab),
                            elaborate_pred(s.pred, elab))
    if isinstance(s, sf.SChoice):
        return elab.s_choice(elaborate_state(s.left, elab),
                             elaborate_guard(s.guard, elab),
                             elaborate_state(s.right, elab))
    if isinstance(s, sf.SCosubst):
        return elab.cosubst(elaborate_state(s.state, elab), s.target, s.source)
    if isinstance(s, sf.SMute):
        return elab.mute(elaborate_state(s.state, elab), s.var,
                         elaborate_expr(s.expr, elab))
    raise ShapeError(f"not a state: {s!r}")
