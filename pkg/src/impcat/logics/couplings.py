"""Couplings of program pairs and their constructors.

A coupling of f1 : X1 -> Y1 and f2 : X2 -> Y2 is a morphism
h : X1 (x) X2 -> Y1 (x) Y2 + Y1 + Y2 whose two projections recover f1 and
f2; the product summand carries the joint runs and the tails the runs
where only one side survives.  Constructors mirror the closure properties
of couplings (sequencing, products of total morphisms, symmetry, branching
and loops); each checks its side conditions and its result is always
re-checkable with is_coupling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from ..backends import Morphism, Obj, ShapeError, product, m_assert


class SideConditionViolated(Exception):
    def __init__(self, which: str):
        super().__init__(which)
        self.which = which


@dataclass(frozen=True)
class CouplingWitness:
    h: Morphism
    provenance: tuple  # ("user",) or ("constructed", lemma-id)

    @property
    def morphism(self) -> Morphism:
        return self.h


def check_side_condition(kind: str, f: Morphism) -> bool:
    """total / deterministic / constant, decided by the exact equations."""
    if kind == "total":
        return f.is_total()
    if kind == "deterministic":
        return f.is_deterministic()
    if kind == "constant":
        return f.is_central_constant()
    raise ValueError(f"unknown side condition {kind!r}")


def require_side_condition(kind: str, f: Morphism, which: str = "morphism") -> None:
    if not check_side_condition(kind, f):
        raise SideConditionViolated(f"{which} not {kind}")


def coupling_cods(Y1: Obj, Y2: Obj) -> tuple[Obj, Obj, Obj]:
    return (product([Y1, Y2]), Y1, Y2)


def _shapes(h: Morphism, f1: Morphism, f2: Morphism):
    X1, Y1 = f1.dom, f1.cods[0]
    X2, Y2 = f2.dom, f2.cods[0]
    if len(f1.cods) != 1 or len(f2.cods) != 1:
        raise ShapeError("coupled morphisms must be unary")
    want_dom = product([X1, X2])
    want_cods = coupling_cods(Y1, Y2)
    if h.dom.elems != want_dom.elems or len(h.cods) != 3 or \
            any(a.elems != b.elems for a, b in zip(h.cods, want_cods)):
        raise ShapeError("coupling has the wrong shape")
    return X1, X2, Y1, Y2


def marginal(h: Morphism, side: int, Y1: Obj, Y2: Obj) -> Morphism:
    """h ; [pi_i, id, 0] or h ; [pi_i, 0, id]: the i-th margin X1X2 -> Yi."""
    cls = type(h)
    P = h.cods[0]
    k = Y1.arity
    if side == 1:
        keep = lambda y: y[:k]
        tail_keep, tail_zero, Y = 1, 2, Y1
    else:
        keep = lambda y: y[k:]
        tail_keep, tail_zero, Y = 2, 1, Y2
    rows = {}
    for x in h.dom.elems:
        def step(entry):
            i, y = entry
            if i == 0:
                return cls.row_unit((0, keep(y)))
            if i == tail_keep:
                return cls.row_unit((0, y))
            return cls.row_zero()
        rows[x] = cls.row_bind(h.rows[x], step)
    return cls(h.dom, (Y,), rows)


def is_coupling(h: Morphism, f1: Morphism, f2: Morphism) -> bool:
    """Both defining equations, checked exactly."""
    X1, X2, Y1, Y2 = _shapes(h, f1, f2)
    cls = type(h)
    pi1 = cls.projection([X1, X2], 0)
    pi2 = cls.projection([X1, X2], 1)
    if not marginal(h, 1, Y1, Y2).equal(pi1.then(f1)):
        return False
    return marginal(h, 2, Y1, Y2).equal(pi2.then(f2))


def project(h: Morphism) -> Morphism:
    """h^-: keep the product summand, zero out the two tails."""
    cls = type(h)
    P = h.cods[0]
    rows = {}
    for x in h.dom.elems:
        rows[x] = cls.row_bind(
            h.rows[x],
            lambda e: cls.row_unit((0, e[1])) if e[0] == 0 else cls.row_zero())
    return cls(h.dom, (P,), rows)


def extract_components(h: Morphism, X1: Obj, X2: Obj, Y1: Obj, Y2: Obj
                       ) -> tuple[Morphism, Morphism]:
    """Recover the coupled morphisms from a coupling's margins.

    The margin must not depend on the other input; inconsistency means h
    is not a coupling of anything.
    """
    cls = type(h)
    m1 = marginal(h, 1, Y1, Y2)
    m2 = marginal(h, 2, Y1, Y2)
    k = X1.arity
    rows1 = {}
    rows2 = {}
    for x in h.dom.elems:
        x1, x2 = x[:k], x[k:]
        if x1 in rows1 and not cls.row_eq(rows1[x1], m1.rows[x]):
            raise SideConditionViolated("margin depends on the partner input")
        if x2 in rows2 and not cls.row_eq(rows2[x2], m2.rows[x]):
            raise SideConditionViolated("margin depends on the partner input")
        rows1[x1] = m1.rows[x]
        rows2[x2] = m2.rows[x]
    return cls(X1, (Y1,), rows1), cls(X2, (Y2,), rows2)


# ---------------------------------------------------------------------------
# Constructors


def canonical_coupling(f1: Morphism, f2: Morphism) -> CouplingWitness:
    """A coupling of an arbitrary pair: joint runs paired up to the smaller
    termination mass, with each side's surplus routed through its tail.

    rel: the full product plus a tail exactly when the partner's row is
    empty; par: pair when both defined, the defined side's tail otherwise;
    stoch: the product scaled by the larger row mass, tails carrying the
    deficits (the total is then max(m1, m2) <= 1).
    """
    cls = type(f1)
    X1, Y1 = f1.dom, f1.cods[0]
    X2, Y2 = f2.dom, f2.cods[0]
    dom = product([X1, X2])
    cods = coupling_cods(Y1, Y2)
    k = X1.arity
    rows = {}
    for x in dom.elems:
        r1 = f1.rows[x[:k]]
        r2 = f2.rows[x[k:]]
        if cls.backend == "rel":
            prod = frozenset((0, y1 + y2) for (_, y1) in r1 for (_, y2) in r2)
            t1 = frozenset((1, y1) for (_, y1) in r1) if not r2 else frozenset()
            t2 = frozenset((2, y2) for (_, y2) in r2) if not r1 else frozenset()
            rows[x] = prod | t1 | t2
        elif cls.backend == "par":
            if r1 is not None and r2 is not None:
                rows[x] = (0, r1[1] + r2[1])
            elif r1 is not None:
                rows[x] = (1, r1[1])
            elif r2 is not None:
                rows[x] = (2, r2[1])
            else:
                rows[x] = None
        else:
            from fractions import Fraction
            m1 = sum(r1.values(), Fraction(0))
            m2 = sum(r2.values(), Fraction(0))
            big = max(m1, m2)
            row: dict = {}
            if big:
                for (_, y1), w1 in r1.items():
                    for (_, y2), w2 in r2.items():
                        row[(0, y1 + y2)] = w1 * w2 / big
                if m2 < big:
                    for (_, y1), w1 in r1.items():
                        row[(1, y1)] = w1 * (1 - m2 / big)
                if m1 < big:
                    for (_, y2), w2 in r2.items():
                        row[(2, y2)] = w2 * (1 - m1 / big)
            rows[x] = {e: w for e, w in row.items() if w}
    return CouplingWitness(cls(dom, cods, rows), ("constructed", "canonical"))


def couple_product(c1: Morphism, c2: Morphism) -> CouplingWitness:
    """The independent coupling (c1 (x) c2) ; inj, for total c1, c2."""
    if not c1.is_total():
        raise SideConditionViolated("first morphism not total")
    if not c2.is_total():
        raise SideConditionViolated("second morphism not total")
    t = c1.tensor(c2)
    Y1, Y2 = c1.cods[0], c2.cods[0]
    h = t.coaction([0], coupling_cods(Y1, Y2))
    return CouplingWitness(h, ("constructed", "product"))


def couple_seq(g: Morphism, h: Morphism, c1: Morphism, c2: Morphism,
               d1: Morphism, d2: Morphism) -> CouplingWitness:
    """Sequencing: g couples (c1, c2), h couples (d1, d2); the result
    couples (c1;d1, c2;d2) by running h after g's joint runs and the
    remaining program alone after g's tails."""
    if not is_coupling(g, c1, c2):
        raise SideConditionViolated("first coupling invalid")
    if not is_coupling(h, d1, d2):
        raise SideConditionViolated("second coupling invalid")
    Z1, Z2 = d1.cods[0], d2.cods[0]
    r = g.compose(0, h)            # [Z1Z2, Z1, Z2, Y1, Y2]
    r = r.compose(3, d1)           # [Z1Z2, Z1, Z2, Z1, Y2]
    r = r.compose(4, d2)           # [Z1Z2, Z1, Z2, Z1, Z2]
    out = r.coaction([0, 1, 2, 1, 2], coupling_cods(Z1, Z2))
    return CouplingWitness(out, ("constructed", "seq"))


def couple_swap(w: CouplingWitness, f1: Morphism, f2: Morphism) -> CouplingWitness:
    """Symmetry: a coupling of (f1, f2) yields one of (f2, f1)."""
    h = w.h
    X1, X2, Y1, Y2 = _shapes(h, f1, f2)
    cls = type(h)
    s_in = cls.swap(X2, X1)
    t = s_in.compose(0, h)
    t = t.compose(0, cls.swap(Y1, Y2))
    out = t.coaction([0, 2, 1], coupling_cods(Y2, Y1))
    return CouplingWitness(out, ("constructed", "swap"))


def joint_if(b1: Morphism, b2: Morphism, mLL: Morphism, mLR: Morphism,
             mRL: Morphism, mRR: Morphism) -> Morphism:
    """Evaluate both guards on the two halves of the input and select."""
    cls = type(b1)
    X1, X2 = b1.dom, b2.dom
    dom = product([X1, X2])
    k = X1.arity
    sel = (mLL, mLR, mRL, mRR)
    cods = mLL.cods
    rows = {}
    for x in dom.elems:
        r1 = b1.rows[x[:k]]
        r2 = b2.rows[x[k:]]
        rows[x] = cls.row_bind(
            r1, lambda e1: cls.row_bind(
                r2, lambda e2: sel[e1[0] * 2 + e2[0]].rows[x]))
    return cls(dom, cods, rows)


def guards_agree(b1: Morphism, b2: Morphism) -> Morphism:
    """The predicate on X1 (x) X2 that both guards take the same branch."""
    cls = type(b1)
    dom = product([b1.dom, b2.dom])
    k = b1.dom.arity
    from ..backends import UNIT
    rows = {}
    for x in dom.elems:
        r1 = b1.rows[x[:k]]
        r2 = b2.rows[x[k:]]
        rows[x] = cls.row_bind(
            r1, lambda e1: cls.row_bind(
                r2, lambda e2: cls.row_unit((0, ())) if e1[0] == e2[0]
                else cls.row_zero()))
    return cls(dom, (UNIT,), rows)


def _check_guard(b: Morphism, total: bool, det: bool, which: str) -> None:
    if total and not b.is_total():
        raise SideConditionViolated(f"{which} not total")
    if det and not b.is_deterministic():
        raise SideConditionViolated(f"{which} not deterministic")


def couple_ifelse4(b1: Morphism, b2: Morphism, g: CouplingWitness,
                   gp: CouplingWitness, hp: CouplingWitness, h: CouplingWitness,
                   c1: Morphism, c2: Morphism, d1: Morphism, d2: Morphism
                   ) -> CouplingWitness:
    """Branching with four premise couplings: g of (c1,c2), gp of (c1,d2),
    hp of (d1,c2), h of (d1,d2); guards must be total."""
    _check_guard(b1, True, False, "first guard")
    _check_guard(b2, True, False, "second guard")
    for w, a, b, which in ((g, c1, c2, "g"), (gp, c1, d2, "g'"),
                           (hp, d1, c2, "h'"), (h, d1, d2, "h")):
        if not is_coupling(w.h, a, b):
            raise SideConditionViolated(f"premise coupling {which} invalid")
    out = joint_if(b1, b2, g.h, gp.h, hp.h, h.h)
    return CouplingWitness(out, ("constructed", "ifelse4"))


def couple_ifelse_det(b1: Morphism, b2: Morphism, g: CouplingWitness,
                      h: CouplingWitness, c1: Morphism, c2: Morphism,
                      d1: Morphism, d2: Morphism) -> CouplingWitness:
    """Branching with only two premise couplings under total+deterministic
    guards.

    Runs where the guards agree use the premise couplings; disagreeing
    runs, which the rules' preconditions filter out, are paired by the
    canonical coupling of the two mismatched branches so the margins still
    recover the two conditionals exactly.
    """
    _check_guard(b1, True, True, "first guard")
    _check_guard(b2, True, True, "second guard")
    if not is_coupling(g.h, c1, c2):
        raise SideConditionViolated("premise coupling g invalid")
    if not is_coupling(h.h, d1, d2):
        raise SideConditionViolated("premise coupling h invalid")
    gp = canonical_coupling(c1, d2)
    hp = canonical_coupling(d1, c2)
    body = joint_if(b1, b2, g.h, gp.h, hp.h, h.h)
    return CouplingWitness(body, ("constructed", "ifelse_det"))


def _couple_while(b1: Morphism, b2: Morphism, g: Morphism,
                  c1: Morphism, c2: Morphism,
                  h1: Morphism, h2: Morphism) -> Morphism:
    """Joint-loop machine over five phases.

    j: both loops running, paired by the body coupling g (whose tails
    demote to the solo phases); l/r: one loop finished while the other
    still runs, stepped by h1 (coupling of c1 and id) or h2 (of id and
    c2), whose own tails either finish into the coupling tails or demote
    further; ls/rs: one side lost entirely, running solo until its tail.
    """
    cls = type(g)
    X1, X2 = c1.dom, c2.dom
    P = product([X1, X2])
    k = X1.arity
    states = ([("j", x) for x in P.elems] + [("l", x) for x in P.elems]
              + [("r", x) for x in P.elems] + [("ls", x) for x in X1.elems]
              + [("rs", x) for x in X2.elems])
    S = Obj(tuple(states), tuple_like=False)
    exits = coupling_cods(X1, X2)
    rows = {}

    def g_step(e):
        gb, y = e
        if gb == 0:
            return cls.row_unit((0, ("j", y)))
        if gb == 1:
            return cls.row_unit((0, ("ls", y)))
        return cls.row_unit((0, ("rs", y)))

    def h1_step(e):
        hb, y = e
        if hb == 0:
            return cls.row_unit((0, ("l", y)))
        if hb == 1:
            return cls.row_unit((0, ("ls", y)))   # right's held value lost
        return cls.row_unit((3, y))               # left lost, right done

    def h2_step(e):
        hb, y = e
        if hb == 0:
            return cls.row_unit((0, ("r", y)))
        if hb == 1:
            return cls.row_unit((2, y))           # right lost, left done
        return cls.row_unit((0, ("rs", y)))       # left's held value lost

    for st in states:
        phase, x = st
        if phase == "j":
            x1, x2 = x[:k], x[k:]

            def joint(e1, e2, x=x):
                # the guards' outcomes are committed: step immediately
                i, j = e1[0], e2[0]
                if i == 0 and j == 0:
                    return cls.row_bind(g.rows[x], g_step)
                if i == 0 and j == 1:
                    return cls.row_bind(h1.rows[x], h1_step)
                if i == 1 and j == 0:
                    return cls.row_bind(h2.rows[x], h2_step)
                return cls.row_unit((1, x))

            rows[st] = cls.row_bind(
                b1.rows[x1], lambda e1, x2=x2: cls.row_bind(
                    b2.rows[x2], lambda e2, e1=e1: joint(e1, e2)))
        elif phase == "l":
            x1 = x[:k]
            rows[st] = cls.row_bind(
                b1.rows[x1],
                lambda e, x=x: cls.row_bind(h1.rows[x], h1_step)
                if e[0] == 0 else cls.row_unit((1, x)))
        elif phase == "r":
            x2 = x[k:]
            rows[st] = cls.row_bind(
                b2.rows[x2],
                lambda e, x=x: cls.row_bind(h2.rows[x], h2_step)
                if e[0] == 0 else cls.row_unit((1, x)))
        elif phase == "ls":
            rows[st] = cls.row_bind(
                b1.rows[x],
                lambda e, x=x: cls.row_bind(
                    c1.rows[x], lambda e2: cls.row_unit((0, ("ls", e2[1]))))
                if e[0] == 0 else cls.row_unit((2, x)))
        else:  # "rs"
            rows[st] = cls.row_bind(
                b2.rows[x],
                lambda e, x=x: cls.row_bind(
                    c2.rows[x], lambda e2: cls.row_unit((0, ("rs", e2[1]))))
                if e[0] == 0 else cls.row_unit((3, x)))
    body = cls(S, (S,) + exits, rows)
    tr = body.fix()
    machine = cls(P, exits, {x: tr.rows[("j", x)] for x in P.elems})
    return _complete_tails(machine, b1, b2, c1, c2)


def _complete_tails(machine: Morphism, b1: Morphism, b2: Morphism,
                    c1: Morphism, c2: Morphism) -> Morphism:
    """Route the margins the joint machine drops into the coupling tails.

    When exactly one loop diverges, the stepwise machine cycles and the
    terminating side's outcome never escapes; on finite carriers the
    deficit against the true loop semantics is computable, and adding it
    as tail mass restores the two margin equations without touching the
    product component.
    """
    from ..backends import m_while
    cls = type(machine)
    X1, X2 = c1.dom, c2.dom
    k = X1.arity
    w1 = m_while(b1, c1)
    w2 = m_while(b2, c2)
    m1 = marginal(machine, 1, X1, X2)
    m2 = marginal(machine, 2, X1, X2)
    rows = {}
    for x in machine.dom.elems:
        want1 = w1.rows[x[:k]]
        want2 = w2.rows[x[k:]]
        d1 = _row_deficit(cls, want1, m1.rows[x])
        d2 = _row_deficit(cls, want2, m2.rows[x])
        extra1 = cls.row_bind(d1, lambda e: cls.row_unit((1, e[1])))
        extra2 = cls.row_bind(d2, lambda e: cls.row_unit((2, e[1])))
        rows[x] = cls.row_add([machine.rows[x], extra1, extra2])
    out = cls(machine.dom, machine.cods, rows)
    out.validate()
    return out


def _row_deficit(cls, want, got):
    """want - got as a row; negative entries mean the machine overshot."""
    if cls.backend == "rel":
        return frozenset(want - got)
    if cls.backend == "par":
        if got is None:
            return want
        if got != want:
            raise SideConditionViolated("loop machine disagrees with the loop")
        return None
    out = {}
    for e, ww in want.items():
        diff = ww - got.get(e, 0)
        if diff < 0:
            raise SideConditionViolated("loop machine overshoots the loop")
        if diff:
            out[e] = diff
    for e, wg in got.items():
        if wg > want.get(e, 0):
            raise SideConditionViolated("loop machine overshoots the loop")
    return out


def couple_while_det(b1: Morphism, b2: Morphism, g: CouplingWitness,
                     c1: Optional[Morphism] = None,
                     c2: Optional[Morphism] = None) -> CouplingWitness:
    """Loops under total+deterministic guards from one body coupling.

    The coupled bodies are recovered from g's margins when not supplied;
    desynchronised phases (one loop already finished) step the remaining
    side through the canonical coupling with the identity, so lost mass
    ends up in the right tail.
    """
    _check_guard(b1, True, True, "first guard")
    _check_guard(b2, True, True, "second guard")
    h = g.h
    cls = type(h)
    P, Y1, Y2 = h.cods[0], h.cods[1], h.cods[2]
    if c1 is None or c2 is None:
        c1, c2 = extract_components(h, Y1, Y2, Y1, Y2)
    if not is_coupling(h, c1, c2):
        raise SideConditionViolated("body coupling invalid")
    h1 = canonical_coupling(c1, cls.identity(Y2))
    h2 = canonical_coupling(cls.identity(Y1), c2)
    out = _couple_while(b1, b2, h, c1, c2, h1.h, h2.h)
    return CouplingWitness(out, ("constructed", "while_det"))


def couple_while_gen(b1: Morphism, b2: Morphism, g: CouplingWitness,
                     h1: CouplingWitness, h2: CouplingWitness,
                     c1: Optional[Morphism] = None,
                     c2: Optional[Morphism] = None) -> CouplingWitness:
    """Loops under total guards from couplings of the bodies, of (c1, id)
    and of (id, c2)."""
    _check_guard(b1, True, False, "first guard")
    _check_guard(b2, True, False, "second guard")
    h = g.h
    Y1, Y2 = h.cods[1], h.cods[2]
    if c1 is None or c2 is None:
        c1, c2 = extract_components(h, Y1, Y2, Y1, Y2)
    cls = type(h)
    if not is_coupling(h, c1, c2):
        raise SideConditionViolated("body coupling invalid")
    if not is_coupling(h1.h, c1, cls.identity(Y2)):
        raise SideConditionViolated("left-step coupling invalid")
    if not is_coupling(h2.h, cls.identity(Y1), c2):
        raise SideConditionViolated("right-step coupling invalid")
    out = _couple_while(b1, b2, h, c1, c2, h1.h, h2.h)
    return CouplingWitness(out, ("constructed", "while_gen"))


# ---------------------------------------------------------------------------
# Exhaustive search (Rel only, small carriers)


def rel_search(shape: str, pre_m: Morphism, post_m: Morphism,
               c1: Morphism, c2: Morphism) -> Optional[Morphism]:
    """Find a Rel coupling witnessing the triple by per-input enumeration.

    The marginal equations and the pred/assert validity inequalities all
    decompose per input pair, so rows are searched independently; the
    search space is pruned to entries allowed by the margins.
    """
    from ..models import RelMorphism
    if not isinstance(c1, RelMorphism):
        raise ShapeError("exhaustive search is available for rel only")
    kind = shape[len("rel-"):].rsplit("-", 1)[0]
    if kind == "state":
        return None  # the state inequalities do not decompose per input
    X1, X2, Y1, Y2 = c1.dom, c2.dom, c1.cods[0], c2.cods[0]
    P = product([X1, X2])
    PY = product([Y1, Y2])
    if len(P) > 9:
        raise ShapeError("search limited to product carriers of at most 9")
    direction = shape.rsplit("-", 1)[1]
    cods = coupling_cods(Y1, Y2)
    rows = {}
    for x in P.elems:
        x1, x2 = x[:X1.arity], x[X1.arity:]
        want1 = frozenset(y for (_, y) in c1.rows[x1])
        want2 = frozenset(y for (_, y) in c2.rows[x2])
        cands = ([(0, y1 + y2) for y1 in want1 for y2 in want2]
                 + [(1, y1) for y1 in want1] + [(2, y2) for y2 in want2])
        found = None
        for mask in range(1 << len(cands)):
            row = frozenset(c for i, c in enumerate(cands) if mask >> i & 1)
            got1 = frozenset(y[:Y1.arity] for (t, y) in row if t == 0) | \
                frozenset(y for (t, y) in row if t == 1)
            if got1 != want1:
                continue
            got2 = frozenset(y[Y1.arity:] for (t, y) in row if t == 0) | \
                frozenset(y for (t, y) in row if t == 2)
            if got2 != want2:
                continue
            hm = frozenset(y for (t, y) in row if t == 0)
            pre_holds = bool(pre_m.rows[x])
            post_of = {y for y in hm if post_m.rows[y]}
            if kind == "assert":
                lhs = hm if pre_holds else frozenset()
                rhs = post_of
            else:  # pred
                lhs = frozenset([()]) if pre_holds else frozenset()
                rhs = frozenset([()]) if post_of else frozenset()
            ok = lhs <= rhs if direction == "correct" else rhs <= lhs
            if ok:
                found = row
                break
        if found is None:
            return None
        rows[x] = found
    return RelMorphism(P, cods, rows)
