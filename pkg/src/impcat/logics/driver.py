"""Checking triple files: assemble terms, resolve couplings, produce verdicts.

Relational verdicts are witness-relative: a supplied or constructed
coupling that passes the defining equations but fails the shape inequality
gives "invalid"; a witness that is not a coupling gives "error"; a missing
witness gives "unknown" unless the exhaustive search applies (rel backend,
product carrier of at most 9), which decides the triple outright.
"""

from __future__ import annotations

import time
from typing import Optional

from .. import combinators as cmb
from ..backends import MAX_CARRIER, eval_term, product
from ..combinators import (Elaborator, UPSILON, elaborate_command,
                           elaborate_pred, elaborate_state)
from ..kernel import KernelTypeError
from ..models import BACKENDS
from ..surface import (ModelError, ParseError, TripleDoc, parse_pred,
                       parse_program, parse_state)
from .couplings import (CouplingWitness, SideConditionViolated,
                        coupling_cods, couple_product, is_coupling, project,
                        rel_search)
from .triples import Triple, Verdict, check_triple, rel_validity


class DriverError(Exception):
    pass


def _elab_for(doc: TripleDoc, ctx) -> Elaborator:
    for _, ty in ctx:
        if ty not in doc.model.carriers:
            raise DriverError(f"context type {ty} not in model")
    product([doc.model.carrier_obj(ty) for _, ty in ctx], limit=MAX_CARRIER)
    return Elaborator(state=tuple(ctx))


def _condition_term(doc: TripleDoc, text: str, elab: Elaborator, kind: str):
    if kind == "state":
        return elaborate_state(parse_state(text), elab)
    return elaborate_pred(parse_pred(text), elab)


def check_doc(doc: TripleDoc) -> Verdict:
    t0 = time.perf_counter()
    try:
        if doc.relational:
            return _check_rel_doc(doc, t0)
        return _check_plain_doc(doc, t0)
    except (ParseError, ModelError, KernelTypeError, DriverError,
            SideConditionViolated) as exc:
        return Verdict("error", counterexample={"reason": str(exc)},
                       elapsed=time.perf_counter() - t0)


def _check_plain_doc(doc: TripleDoc, t0: float) -> Verdict:
    elab = _elab_for(doc, doc.context)
    kind = doc.shape.rsplit("-", 1)[0]
    pre = _condition_term(doc, doc.pre, elab, kind)
    post = _condition_term(doc, doc.post, elab, kind)
    cmd = elaborate_command(parse_program(doc.cmd), elab)
    sig = doc.model.signature
    elab.check_command(cmd, sig)
    if kind == "state":
        elab.check_state(pre, sig)
        elab.check_state(post, sig)
    else:
        elab.check_predicate(pre, sig)
        elab.check_predicate(post, sig)
    t = Triple(doc.shape, pre, cmd, post)
    v = check_triple(t, elab, doc.model, doc.backend)
    return Verdict(v.status, v.counterexample, time.perf_counter() - t0)


def _witness_from_table(doc: TripleDoc, cm, dm, entries) -> CouplingWitness:
    cls = BACKENDS[doc.backend]
    X1, X2 = cm.dom, dm.dom
    Y1, Y2 = cm.cods[0], dm.cods[0]
    dom = product([X1, X2])
    cods = coupling_cods(Y1, Y2)
    rows = {x: cls.row_zero() for x in dom.elems}
    from fractions import Fraction
    import re
    for pair in entries:
        inp, row = pair
        key = tuple(inp)
        if key not in set(dom.elems):
            raise DriverError(f"coupling input {inp} outside the joint carrier")
        if cls.backend == "par":
            rows[key] = None if row is None else (row[0], tuple(row[1]))
        elif cls.backend == "rel":
            rows[key] = frozenset((b, tuple(y)) for b, y in row)
        else:
            out = {}
            for b, y, w in row:
                if not isinstance(w, str) or not re.fullmatch(r"\d+(/\d+)?", w):
                    raise DriverError(f"coupling weight {w!r} is not exact")
                out[(b, tuple(y))] = out.get((b, tuple(y)), Fraction(0)) \
                    + Fraction(w)
            rows[key] = out
    h = cls(dom, cods, rows)
    h.validate()
    return CouplingWitness(h, ("user",))


def _check_rel_doc(doc: TripleDoc, t0: float) -> Verdict:
    e1 = _elab_for(doc, doc.context)
    ctx2 = doc.context2
    if ctx2 is None:
        ctx2 = tuple((x + "r", ty) for x, ty in doc.context)
    e2 = _elab_for(doc, ctx2)
    ej = _elab_for(doc, tuple(doc.context) + tuple(ctx2))
    sig = doc.model.signature
    kind = doc.shape[len("rel-"):].rsplit("-", 1)[0]
    cmd1 = elaborate_command(parse_program(doc.cmd), e1)
    cmd2 = elaborate_command(parse_program(doc.cmd2), e2)
    e1.check_command(cmd1, sig)
    e2.check_command(cmd2, sig)
    if kind == "state":
        pre = elaborate_state(parse_state(doc.pre), ej)
        post = elaborate_state(parse_state(doc.post), ej)
        ej.check_state(pre, sig)
        ej.check_state(post, sig)
        pre_m = eval_term(pre, (), ej.psi, doc.model, doc.backend)
        post_m = eval_term(post, (), ej.psi, doc.model, doc.backend)
    else:
        pre = elaborate_pred(parse_pred(doc.pre), ej)
        post = elaborate_pred(parse_pred(doc.post), ej)
        ej.check_predicate(pre, sig)
        ej.check_predicate(post, sig)
        pre_m = eval_term(pre, ej.state, UPSILON, doc.model, doc.backend)
        post_m = eval_term(post, ej.state, UPSILON, doc.model, doc.backend)
    cm = eval_term(cmd1, e1.state, e1.psi, doc.model, doc.backend)
    dm = eval_term(cmd2, e2.state, e2.psi, doc.model, doc.backend)

    spec = doc.coupling or {}
    kind_w = spec.get("kind")
    if kind_w == "product":
        w = couple_product(cm, dm)
    elif kind_w == "table":
        w = _witness_from_table(doc, cm, dm, spec.get("entries", []))
        if not is_coupling(w.h, cm, dm):
            return Verdict("error",
                           counterexample={"reason":
                                           "witness fails the coupling equations"},
                           elapsed=time.perf_counter() - t0)
    elif kind_w in (None, "search"):
        if doc.backend != "rel":
            return Verdict("unknown",
                           counterexample={"reason":
                                           "no coupling witness supplied"},
                           elapsed=time.perf_counter() - t0)
        if kind == "state":
            return Verdict("unknown",
                           counterexample={"reason":
                                           "search unsupported for state shapes"},
                           elapsed=time.perf_counter() - t0)
        h = rel_search(doc.shape, pre_m, post_m, cm, dm)
        if h is None:
            return Verdict("invalid",
                           counterexample={"reason": "no coupling witnesses "
                                           "this triple (exhaustive search)"},
                           elapsed=time.perf_counter() - t0)
        w = CouplingWitness(h, ("constructed", "search"))
    else:
        raise DriverError(f"unknown coupling kind {kind_w!r}")
    v = rel_validity(doc.shape, pre_m, project(w.h), post_m)
    return Verdict(v.status, v.counterexample, time.perf_counter() - t0)
