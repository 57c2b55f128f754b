"""Finite semantic backends: objects, multimorphisms, and the term evaluator.

A multimorphism X -> Y1,...,Yn is stored as one map from the carrier of X
into the tagged disjoint union of the carriers of the Yi (coproducts are
representable, so case/inj are tag bookkeeping and distributors are
identities of the encoding).  Carrier elements of declared types and their
products are flat tuples; sums and machine states carry opaque elements.

Concrete backends subclass :class:`Morphism` and provide the row algebra
plus their fixpoint; everything structural is shared here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .kernel import (Context, Gen, Index, Loop, Return, Term)


class ShapeError(Exception):
    pass


class MissingInterpretation(Exception):
    pass


class CarrierLimitError(Exception):
    pass


MAX_CARRIER = 64          # declared product carriers (checking is exhaustive)
INTERNAL_LIMIT = 4096     # evaluation contexts extended by binders


# ---------------------------------------------------------------------------
# Objects


@dataclass(frozen=True)
class Obj:
    """A finite carrier.  tuple_like objects hold flat tuples and support
    concatenating products; sums and ad-hoc state spaces hold opaque
    elements."""
    elems: tuple
    tuple_like: bool = True

    def __post_init__(self):
        if len(set(self.elems)) != len(self.elems):
            raise ShapeError("carrier has repeated elements")

    @property
    def arity(self) -> int:
        if not self.tuple_like:
            raise ShapeError("opaque carrier has no arity")
        return len(self.elems[0]) if self.elems else 0

    def __len__(self) -> int:
        return len(self.elems)


UNIT = Obj(((),))


def basic_obj(elems: Sequence[str]) -> Obj:
    """Carrier of a basic type: one-component tuples."""
    return Obj(tuple((e,) for e in elems))


def product(objs: Sequence[Obj], limit: int = INTERNAL_LIMIT) -> Obj:
    """Product carrier: concatenated tuples in lexicographic declaration order.

    Declared carriers use limit=MAX_CARRIER; evaluation contexts that grow
    by binders get the looser internal safety limit.
    """
    if not objs:
        return UNIT
    for o in objs:
        if not o.tuple_like:
            raise ShapeError("product of a non-tuple carrier")
    size = 1
    for o in objs:
        size *= len(o)
    if size > limit:
        raise CarrierLimitError(
            f"product carrier has {size} elements; the limit is {limit}")
    elems = [()]
    for o in objs:
        elems = [e + x for e in elems for x in o.elems]
    return Obj(tuple(elems))


def sum_obj(objs: Sequence[Obj]) -> Obj:
    """Tagged disjoint union: elements (branch index, element)."""
    elems = tuple((i, e) for i, o in enumerate(objs) for e in o.elems)
    return Obj(elems, tuple_like=False)


# ---------------------------------------------------------------------------
# Morphisms

Entry = tuple  # (branch index, element)


class Morphism:
    """A backend multimorphism; rows are total over dom.elems."""

    backend = "abstract"

    __slots__ = ("dom", "cods", "rows")

    def __init__(self, dom: Obj, cods: Sequence[Obj], rows: dict):
        self.dom = dom
        self.cods = tuple(cods)
        self.rows = rows

    # -- row algebra supplied by each backend ------------------------------

    @classmethod
    def row_zero(cls):
        raise NotImplementedError

    @classmethod
    def row_unit(cls, entry: Entry):
        raise NotImplementedError

    @classmethod
    def row_bind(cls, row, f: Callable[[Entry], object]):
        """Extend f entrywise: f maps an entry to a row; results are summed."""
        raise NotImplementedError

    @classmethod
    def row_map(cls, row, f: Callable[[Entry], Entry]):
        return cls.row_bind(row, lambda e: cls.row_unit(f(e)))

    @classmethod
    def row_add(cls, rows: Iterable):
        raise NotImplementedError

    @classmethod
    def row_eq(cls, r1, r2) -> bool:
        raise NotImplementedError

    @classmethod
    def row_leq(cls, r1, r2) -> bool:
        raise NotImplementedError

    @classmethod
    def row_entries(cls, row) -> Iterable[Entry]:
        """Support of a row (entries with positive weight / defined)."""
        raise NotImplementedError

    def fix(self) -> "Morphism":
        raise NotImplementedError

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_rows(cls, dom: Obj, cods: Sequence[Obj], rows: dict) -> "Morphism":
        return cls(dom, cods, rows)

    @classmethod
    def identity(cls, X: Obj) -> "Morphism":
        return cls(X, (X,), {x: cls.row_unit((0, x)) for x in X.elems})

    @classmethod
    def zero(cls, X: Obj, cods: Sequence[Obj]) -> "Morphism":
        return cls(X, cods, {x: cls.row_zero() for x in X.elems})

    @classmethod
    def copy(cls, X: Obj) -> "Morphism":
        if not X.tuple_like:
            raise ShapeError("copy over a non-tuple carrier")
        XX = product([X, X])
        return cls(X, (XX,), {x: cls.row_unit((0, x + x)) for x in X.elems})

    @classmethod
    def discard(cls, X: Obj) -> "Morphism":
        return cls(X, (UNIT,), {x: cls.row_unit((0, ())) for x in X.elems})

    @classmethod
    def inject(cls, i: int, objs: Sequence[Obj]) -> "Morphism":
        """inj_i : Y_i -> Y_1 + ... + Y_n (unary, into the sum object)."""
        S = sum_obj(objs)
        Y = objs[i]
        return cls(Y, (S,), {y: cls.row_unit((0, (i, y))) for y in Y.elems})

    @classmethod
    def case_split(cls, objs: Sequence[Obj]) -> "Morphism":
        """case : Y_1 + ... + Y_n -> Y_1, ..., Y_n (the branching map)."""
        S = sum_obj(objs)
        return cls(S, tuple(objs), {(i, y): cls.row_unit((i, y)) for (i, y) in S.elems})

    @classmethod
    def projection(cls, parts: Sequence[Obj], keep: int) -> "Morphism":
        """pi_keep : X_1 (x) ... (x) X_k -> X_keep, discarding the rest."""
        dom = product(parts)
        offs = [0]
        for p in parts:
            offs.append(offs[-1] + p.arity)
        lo, hi = offs[keep], offs[keep + 1]
        return cls(dom, (parts[keep],),
                   {x: cls.row_unit((0, x[lo:hi])) for x in dom.elems})

    @classmethod
    def swap(cls, A: Obj, B: Obj) -> "Morphism":
        dom = product([A, B])
        cod = product([B, A])
        k = A.arity
        return cls(dom, (cod,),
                   {x: cls.row_unit((0, x[k:] + x[:k])) for x in dom.elems})

    # -- structural operations ----------------------------------------------

    def compose(self, i: int, g: "Morphism") -> "Morphism":
        """Multicategorical composition along the i-th branch."""
        if not (0 <= i < len(self.cods)):
            raise ShapeError(f"branch {i} out of range")
        if self.cods[i].elems != g.dom.elems:
            raise ShapeError("composition carrier mismatch")
        m = len(g.cods)
        cods = self.cods[:i] + g.cods + self.cods[i + 1:]
        cls = type(self)

        def step(entry):
            j, y = entry
            if j == i:
                return cls.row_map(g.rows[y], lambda e: (e[0] + i, e[1]))
            if j < i:
                return cls.row_unit((j, y))
            return cls.row_unit((j + m - 1, y))

        rows = {x: cls.row_bind(r, step) for x, r in self.rows.items()}
        return cls(self.dom, cods, rows)

    def then(self, g: "Morphism") -> "Morphism":
        """Unary composition f ; g (f must have a single branch)."""
        if len(self.cods) != 1:
            raise ShapeError("then() needs a unary-codomain morphism")
        return self.compose(0, g)

    def coaction(self, sigma: Sequence[int], new_cods: Sequence[Obj]) -> "Morphism":
        """Branch action of a finite function: entry (k, y) -> (sigma(k), y)."""
        if len(sigma) != len(self.cods):
            raise ShapeError("coaction arity mismatch")
        for k, s in enumerate(sigma):
            if not (0 <= s < len(new_cods)) or self.cods[k].elems != new_cods[s].elems:
                raise ShapeError("coaction target mismatch")
        cls = type(self)
        rows = {x: cls.row_map(r, lambda e: (sigma[e[0]], e[1]))
                for x, r in self.rows.items()}
        return cls(self.dom, tuple(new_cods), rows)

    def merge_branches(self) -> "Morphism":
        """Coaction collapsing all equally-typed branches into one."""
        return self.coaction([0] * len(self.cods), (self.cods[0],))

    def tensor(self, g: "Morphism") -> "Morphism":
        """Lexicographic tensor: branch (i, j) of f (x) g is (i * m + j)."""
        cls = type(self)
        dom = product([self.dom, g.dom])
        k = self.dom.arity
        m = len(g.cods)
        cods = tuple(product([a, b]) for a in self.cods for b in g.cods)
        rows = {}
        for x in dom.elems:
            r1 = self.rows[x[:k]]
            r2 = g.rows[x[k:]]
            rows[x] = cls.row_bind(
                r1, lambda e1: cls.row_map(r2, lambda e2:
                                           (e1[0] * m + e2[0], e1[1] + e2[1])))
        return cls(dom, cods, rows)

    def to_single(self) -> "Morphism":
        """The unary morphism into the sum object (the case image)."""
        S = sum_obj(self.cods)
        cls = type(self)
        rows = {x: cls.row_map(r, lambda e: (0, e)) for x, r in self.rows.items()}
        return cls(self.dom, (S,), rows)

    # -- comparisons ---------------------------------------------------------

    def same_shape(self, other: "Morphism") -> bool:
        return (self.dom.elems == other.dom.elems
                and len(self.cods) == len(other.cods)
                and all(a.elems == b.elems for a, b in zip(self.cods, other.cods)))

    def equal(self, other: "Morphism") -> bool:
        if not self.same_shape(other):
            raise ShapeError("comparing morphisms of different shapes")
        cls = type(self)
        return all(cls.row_eq(self.rows[x], other.rows[x]) for x in self.dom.elems)

    def leq(self, other: "Morphism") -> bool:
        if not self.same_shape(other):
            raise ShapeError("comparing morphisms of different shapes")
        cls = type(self)
        return all(cls.row_leq(self.rows[x], other.rows[x]) for x in self.dom.elems)

    def leq_witness(self, other: "Morphism"):
        """None if self <= other, else an offending (input, entry) pair."""
        cls = type(self)
        for x in self.dom.elems:
            if not cls.row_leq(self.rows[x], other.rows[x]):
                for e in cls.row_entries(self.rows[x]):
                    if not cls.row_leq(cls.row_unit(e), other.rows[x]):
                        return (x, e)
                return (x, None)
        return None

    # -- classification (Def.-style equations, checked exactly) -------------

    def is_total(self) -> bool:
        """Discard preservation: discarding after f equals discarding."""
        single = self.to_single()
        eps_cod = type(self).discard(single.cods[0])
        lhs = single.then(eps_cod)
        rhs = type(self).discard(self.dom)
        return lhs.equal(rhs)

    def is_deterministic(self) -> bool:
        """Copy preservation: f ; copy = copy ; (f (x) f), on the case image."""
        cls = type(self)
        single = self.to_single()
        for x in self.dom.elems:
            row = single.rows[x]
            lhs = cls.row_map(row, lambda e: (0, (e[1], e[1])))
            rhs = cls.row_bind(
                row, lambda e1: cls.row_map(row, lambda e2: (0, (e1[1], e2[1]))))
            if not cls.row_eq(lhs, rhs):
                return False
        return True

    def is_central_constant(self) -> bool:
        """Factors through the unit: all rows agree."""
        cls = type(self)
        rows = iter(self.rows.values())
        first = next(rows, None)
        if first is None:
            return True
        return all(cls.row_eq(first, r) for r in rows)

    # -- fixpoint oracles ----------------------------------------------------

    def fix_kleene(self, depth: int) -> "Morphism":
        """Truncated iterate of t = exit + loop . t, from the zero morphism."""
        if not self.cods or self.cods[0].elems != self.dom.elems:
            raise ShapeError("fix needs first branch equal to the domain")
        cls = type(self)
        exits = self.cods[1:]
        t = {x: cls.row_zero() for x in self.dom.elems}
        for _ in range(depth):
            t2 = {}
            for x in self.dom.elems:
                def step(entry):
                    j, y = entry
                    if j == 0:
                        return t[y]
                    return cls.row_unit((j - 1, y))
                t2[x] = cls.row_bind(self.rows[x], step)
            t = t2
        return cls(self.dom, exits, t)

    def check_fix_shape(self) -> None:
        if not self.cods or self.cods[0].elems != self.dom.elems:
            raise ShapeError("fix needs first branch equal to the domain")

    def pretty(self) -> str:
        lines = []
        for x in self.dom.elems:
            lines.append(f"{x!r} -> {self._pretty_row(self.rows[x])}")
        return "\n".join(lines)

    def _pretty_row(self, row) -> str:  # pragma: no cover - cosmetic
        return repr(row)


# ---------------------------------------------------------------------------
# Direct command semantics (independent of the term evaluator; used both as
# an oracle in tests and by the coupling constructors)


def m_branch(b: Morphism, f: Morphism, g: Morphism) -> Morphism:
    """<<b>>{f}{g}: evaluate the guard on a copy, branch into f or g."""
    if len(b.cods) != 2 or any(len(c) != 1 for c in b.cods):
        raise ShapeError("guard must have two unit branches")
    cls = type(b)
    X = b.dom
    cods = f.cods + g.cods
    n = len(f.cods)
    rows = {}
    for x in X.elems:
        def step(entry, x=x):
            i, _ = entry
            if i == 0:
                return f.rows[x]
            return cls.row_map(g.rows[x], lambda e: (e[0] + n, e[1]))
        rows[x] = cls.row_bind(b.rows[x], step)
    return cls(X, cods, rows)


def m_assert(p: Morphism) -> Morphism:
    """assert p : weight the input by the predicate, keep the state."""
    if len(p.cods) != 1 or len(p.cods[0]) != 1:
        raise ShapeError("predicate must have one unit branch")
    cls = type(p)
    X = p.dom
    rows = {x: cls.row_map(p.rows[x], lambda e, x=x: (0, x)) for x in X.elems}
    return cls(X, (X,), rows)


def m_ifelse(b: Morphism, f: Morphism, g: Morphism) -> Morphism:
    """if b then f else g for parallel-shaped f, g."""
    if len(f.cods) != len(g.cods):
        raise ShapeError("if branches have different shapes")
    both = m_branch(b, f, g)
    n = len(f.cods)
    sigma = list(range(n)) + list(range(n))
    return both.coaction(sigma, f.cods)


def m_while(b: Morphism, c: Morphism) -> Morphism:
    """while b do c, built directly from the trace of the branch."""
    if len(c.cods) != 1 or c.cods[0].elems != c.dom.elems:
        raise ShapeError("loop body must be an endomorphism")
    X = c.dom
    cls = type(b)
    body = m_branch(b, c, cls.identity(X))  # X -> X, X
    return body.fix()


def m_seq(*fs: Morphism) -> Morphism:
    out = fs[0]
    for f in fs[1:]:
        out = out.then(f)
    return out


# ---------------------------------------------------------------------------
# The evaluator


def ctx_obj(ctx: Context, model) -> Obj:
    return product([model.carrier_obj(ty) for _, ty in ctx])


def sig_carrier(tys: Sequence[str], model) -> Obj:
    return product([model.carrier_obj(ty) for ty in tys])


def eval_term(t: Term, ctx: Context, idx: Index, model, backend: str) -> Morphism:
    """Interpret a well-typed term as a backend multimorphism.

    The three clauses follow the inductive semantics: returns pick context
    variables and inject into their branch; generators copy the ambient
    context into each continuation; loops copy the ambient context once and
    thread it unchanged through every iteration (the fixpoint is computed
    blockwise per ambient value, which is the same morphism without
    materialising the product state space).

    Recursive calls restrict the context to the subterm's free variables:
    the dropped components are discarded either way, so the denotation is
    unchanged, while evaluation contexts stay small and equal loop blocks
    are computed once.
    """
    from .kernel import free_vars
    cls = model.morphism_class(backend)
    dom = ctx_obj(ctx, model)
    cods = [sig_carrier(tys, model) for _, tys in idx]
    # Earlier entries shadow later ones: binders are prepended.
    pos: dict = {}
    tys_of: dict = {}
    for i, (x, ty) in enumerate(ctx):
        if x not in pos:
            pos[x] = i
            tys_of[x] = ty
    label_pos: dict = {}
    for i, (a, _) in enumerate(idx):
        if a not in label_pos:
            label_pos[a] = i

    if isinstance(t, Return):
        i = label_pos[t.label]
        idxs = [pos[a] for a in t.args]
        rows = {v: cls.row_unit((i, tuple(v[k] for k in idxs))) for v in dom.elems}
        return cls(dom, cods, rows)

    def narrow(body: Term, binders: Sequence[str]):
        """Context positions the body still needs, beyond its binders."""
        fv = free_vars(body) - set(binders)
        keep = tuple(i for i, (x, _) in enumerate(ctx)
                     if x in fv and pos[x] == i)
        return keep, tuple(ctx[i] for i in keep)

    if isinstance(t, Gen):
        table = model.table(backend, t.gen)
        decl = model.signature.generators[t.gen]
        branch_ms = []
        keeps = []
        for (binders, body), tys in zip(t.branches, decl.branches):
            keep, kept_ctx = narrow(body, binders)
            ctx2 = tuple(zip(binders, tys)) + kept_ctx
            keeps.append(keep)
            branch_ms.append(eval_term(body, ctx2, idx, model, backend))
        idxs = [pos[a] for a in t.args]
        rows = {}
        for v in dom.elems:
            arg = tuple(v[k] for k in idxs)
            trow = table.rows[arg]

            def step(e, v=v):
                j, w = e
                return branch_ms[j].rows[w + tuple(v[k] for k in keeps[j])]

            rows[v] = cls.row_bind(trow, step)
        return cls(dom, cods, rows)

    assert isinstance(t, Loop)
    arg_tys = tuple(tys_of[a] for a in t.args)
    keep, kept_ctx = narrow(t.body, t.binders)
    ctx2 = tuple(zip(t.binders, arg_tys)) + kept_ctx
    idx2 = ((t.label, arg_tys),) + tuple(idx)
    B = eval_term(t.body, ctx2, idx2, model, backend)
    W = sig_carrier(arg_tys, model)
    idxs = [pos[a] for a in t.args]
    rows = {}
    block_cache: dict = {}
    for v in dom.elems:
        key = tuple(v[k] for k in keep)
        tr = block_cache.get(key)
        if tr is None:
            block_rows = {w: B.rows[w + key] for w in W.elems}
            block = cls(W, (W,) + tuple(cods), block_rows)
            tr = block.fix()
            block_cache[key] = tr
        rows[v] = tr.rows[tuple(v[k] for k in idxs)]
    return cls(dom, cods, rows)
