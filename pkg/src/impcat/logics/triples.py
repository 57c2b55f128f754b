"""Triple shapes and validity checking.

A triple {p} c {q} (or {s} c {t}) is valid when the inequality selected by
its shape holds in the chosen backend; the six plain shapes pair the three
condition kinds (state, predicate, assertion) with the two directions
(correctness <=, incorrectness >=).  Relational shapes compare through the
product component of a coupling of the two programs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .. import combinators as cb
from ..backends import Morphism, eval_term, m_assert, product
from ..combinators import Elaborator, OMEGA, UPSILON
from ..kernel import Term, subst_label
from ..models import Model

TRIPLE_SHAPES = (
    "state-correct", "pred-correct", "assert-correct",
    "state-incorrect", "pred-incorrect", "assert-incorrect",
)
REL_TRIPLE_SHAPES = tuple("rel-" + s for s in TRIPLE_SHAPES)


class TripleShapeError(Exception):
    pass


@dataclass(frozen=True)
class Triple:
    """pre/post are predicate terms for pred-/assert- shapes and closed
    state terms for state- shapes; cmd is a command term."""
    shape: str
    pre: Term
    cmd: Term
    post: Term

    def __post_init__(self):
        if self.shape not in TRIPLE_SHAPES:
            raise TripleShapeError(f"unknown shape {self.shape}")


@dataclass(frozen=True)
class Verdict:
    status: str  # "valid" | "invalid" | "unknown" | "error"
    counterexample: Optional[dict] = None
    elapsed: float = 0.0

    @property
    def valid(self) -> bool:
        return self.status == "valid"

    def to_dict(self) -> dict:
        out = {"verdict": self.status, "timings": {"seconds": round(self.elapsed, 6)}}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


def _leq_verdict(lhs: Morphism, rhs: Morphism, t0: float) -> Verdict:
    w = lhs.leq_witness(rhs)
    if w is None:
        return Verdict("valid", elapsed=time.perf_counter() - t0)
    x, entry = w
    return Verdict("invalid",
                   counterexample={"input": list(x) if isinstance(x, tuple) else x,
                                   "entry": repr(entry)},
                   elapsed=time.perf_counter() - t0)


def check_triple(t: Triple, elab: Elaborator, model: Model, backend: str) -> Verdict:
    """Evaluate both sides of the shape's inequality and compare."""
    t0 = time.perf_counter()
    ctx = elab.state
    psi = elab.psi
    kind, direction = t.shape.rsplit("-", 1)
    if kind == "assert":
        lhs_t = elab.seq(elab.assert_(t.pre), t.cmd)
        rhs_t = elab.seq(t.cmd, elab.assert_(t.post))
        lhs = eval_term(lhs_t, ctx, psi, model, backend)
        rhs = eval_term(rhs_t, ctx, psi, model, backend)
    elif kind == "pred":
        lhs = eval_term(t.pre, ctx, UPSILON, model, backend)
        comp = subst_label(t.cmd, cb.CMD_ETA, elab.vars, t.post)
        rhs = eval_term(comp, ctx, UPSILON, model, backend)
    elif kind == "state":
        lhs_t = elab.seq(t.pre, t.cmd)
        lhs = eval_term(lhs_t, (), psi, model, backend)
        rhs = eval_term(t.post, (), psi, model, backend)
    else:
        raise TripleShapeError(t.shape)
    if direction == "incorrect":
        lhs, rhs = rhs, lhs
    return _leq_verdict(lhs, rhs, t0)


# ---------------------------------------------------------------------------
# Relational triples


@dataclass(frozen=True)
class RelTriple:
    """Pre/post over the joint context of the two programs; the coupling
    witness (a backend morphism, when provided) must pass is_coupling."""
    shape: str
    pre: Term
    cmd1: Term
    cmd2: Term
    post: Term

    def __post_init__(self):
        if self.shape not in REL_TRIPLE_SHAPES:
            raise TripleShapeError(f"unknown relational shape {self.shape}")


def rel_validity(shape: str, pre_m: Morphism, h_minus: Morphism,
                 post_m: Morphism) -> Verdict:
    """The Fig.-3 inequality for an evaluated relational triple.

    pre_m/post_m are predicates (X -> unit) for pred-/assert- shapes or
    states (unit -> X) for state- shapes; h_minus is the coupling's
    product component.
    """
    t0 = time.perf_counter()
    kind, direction = shape[len("rel-"):].rsplit("-", 1)
    if kind == "assert":
        lhs = m_assert(pre_m).then(h_minus)
        rhs = h_minus.then(m_assert(post_m))
    elif kind == "pred":
        lhs = pre_m
        rhs = h_minus.then(post_m)
    elif kind == "state":
        lhs = pre_m.then(h_minus)
        rhs = post_m
    else:
        raise TripleShapeError(shape)
    if direction == "incorrect":
        lhs, rhs = rhs, lhs
    return _leq_verdict(lhs, rhs, t0)
