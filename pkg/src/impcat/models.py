"""The three concrete backends over finite carriers.

Rel interprets morphisms as relations (sets of tagged pairs), Par as
partial functions, Stoch as substochastic matrices of exact rationals.
No floating point appears anywhere: order comparisons and triple verdicts
are exact inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .backends import Entry, Morphism, Obj, ShapeError, basic_obj, product
from .kernel import GeneratorDecl, Signature


# ---------------------------------------------------------------------------
# Rel: powerset semantics


class RelMorphism(Morphism):
    """Rows are frozensets of (branch, element)."""

    backend = "rel"

    @classmethod
    def row_zero(cls):
        return frozenset()

    @classmethod
    def row_unit(cls, entry: Entry):
        return frozenset((entry,))

    @classmethod
    def row_bind(cls, row, f):
        out: set = set()
        for e in row:
            out |= f(e)
        return frozenset(out)

    @classmethod
    def row_add(cls, rows):
        out: set = set()
        for r in rows:
            out |= r
        return frozenset(out)

    @classmethod
    def row_eq(cls, r1, r2):
        return r1 == r2

    @classmethod
    def row_leq(cls, r1, r2):
        return r1 <= r2

    @classmethod
    def row_entries(cls, row):
        return sorted(row)

    def validate(self) -> None:
        valid = [set(c.elems) for c in self.cods]
        for x in self.dom.elems:
            for (i, y) in self.rows[x]:
                if not (0 <= i < len(valid)) or y not in valid[i]:
                    raise ShapeError(f"entry {(i, y)} outside codomain")

    def fix(self) -> "RelMorphism":
        """Least solution of T = exit u loop;T.

        Iteration to stabilisation on small state spaces; transitive
        closure by graph search above 64 states (identical output).
        """
        self.check_fix_shape()
        exits = self.cods[1:]
        states = self.dom.elems
        direct = {x: frozenset((i - 1, y) for (i, y) in self.rows[x] if i > 0)
                  for x in states}
        succ = {x: frozenset(y for (i, y) in self.rows[x] if i == 0) for x in states}
        if len(states) <= 64:
            t = {x: frozenset() for x in states}
            changed = True
            while changed:
                changed = False
                for x in states:
                    new = direct[x] | frozenset(
                        e for y in succ[x] for e in t[y])
                    if new != t[x]:
                        t[x] = new
                        changed = True
            return RelMorphism(self.dom, exits, t)
        # reachability route
        rows = {}
        for x in states:
            seen = {x}
            stack = [x]
            while stack:
                z = stack.pop()
                for y in succ[z]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            rows[x] = frozenset(e for z in seen for e in direct[z])
        return RelMorphism(self.dom, exits, rows)

    def _pretty_row(self, row):
        return "{" + ", ".join(f"{i}:{y!r}" for (i, y) in sorted(row)) + "}"


# ---------------------------------------------------------------------------
# Par: partial-function semantics


class ParMorphism(Morphism):
    """Rows are None (undefined) or a single (branch, element)."""

    backend = "par"

    @classmethod
    def row_zero(cls):
        return None

    @classmethod
    def row_unit(cls, entry: Entry):
        return entry

    @classmethod
    def row_bind(cls, row, f):
        if row is None:
            return None
        return f(row)

    @classmethod
    def row_add(cls, rows):
        defined = [r for r in rows if r is not None]
        if not defined:
            return None
        if len(defined) > 1:
            raise ShapeError("partial map would gain two outputs")
        return defined[0]

    @classmethod
    def row_eq(cls, r1, r2):
        return r1 == r2

    @classmethod
    def row_leq(cls, r1, r2):
        return r1 is None or r1 == r2

    @classmethod
    def row_entries(cls, row):
        return [] if row is None else [row]

    def validate(self) -> None:
        for x in self.dom.elems:
            row = self.rows[x]
            if row is None:
                continue
            i, y = row
            if not (0 <= i < len(self.cods)) or y not in set(self.cods[i].elems):
                raise ShapeError(f"entry {row} outside codomain")

    def fix(self) -> "ParMorphism":
        """Iterate the deterministic body; undefined on cycles."""
        self.check_fix_shape()
        exits = self.cods[1:]
        rows = {}
        for x in self.dom.elems:
            seen = set()
            z = x
            out = None
            while True:
                if z in seen:
                    break  # cycle: diverges
                seen.add(z)
                row = self.rows[z]
                if row is None:
                    break
                i, y = row
                if i == 0:
                    z = y
                    continue
                out = (i - 1, y)
                break
            rows[x] = out
        return ParMorphism(self.dom, exits, rows)

    def _pretty_row(self, row):
        return "undef" if row is None else f"{row[0]}:{row[1]!r}"


# ---------------------------------------------------------------------------
# Stoch: exact substochastic semantics


class StochMorphism(Morphism):
    """Rows are sparse dicts entry -> positive Fraction with mass <= 1."""

    backend = "stoch"

    @classmethod
    def row_zero(cls):
        return {}

    @classmethod
    def row_unit(cls, entry: Entry):
        return {entry: Fraction(1)}

    @classmethod
    def row_bind(cls, row, f):
        out: dict = {}
        for e, w in row.items():
            for e2, w2 in f(e).items():
                v = out.get(e2)
                out[e2] = w * w2 if v is None else v + w * w2
        return out

    @classmethod
    def row_add(cls, rows):
        out: dict = {}
        for r in rows:
            for e, w in r.items():
                v = out.get(e)
                out[e] = w if v is None else v + w
        return out

    @classmethod
    def row_eq(cls, r1, r2):
        return r1 == r2

    @classmethod
    def row_leq(cls, r1, r2):
        for e, w in r1.items():
            if w > r2.get(e, 0):
                return False
        return True

    @classmethod
    def row_entries(cls, row):
        return sorted(row.keys())

    def mass(self, x) -> Fraction:
        return sum(self.rows[x].values(), Fraction(0))

    def validate(self) -> None:
        valid = [set(c.elems) for c in self.cods]
        for x in self.dom.elems:
            total = Fraction(0)
            for (i, y), w in self.rows[x].items():
                if w < 0:
                    raise ShapeError("negative probability")
                if not (0 <= i < len(valid)) or y not in valid[i]:
                    raise ShapeError(f"entry {(i, y)} outside codomain")
                total += w
            if total > 1:
                raise ShapeError(f"row mass {total} exceeds one at {x!r}")

    def fix(self) -> "StochMorphism":
        """Least nonnegative solution of t = exit + loop . t, exactly.

        States with no positive-probability path to an exit get zero rows;
        on the rest, (I - loop) t = exit is solved by rational Gaussian
        elimination (the restricted matrix has spectral radius < 1, so it
        is nonsingular).
        """
        self.check_fix_shape()
        exits = self.cods[1:]
        states = list(self.dom.elems)
        loop_row = {}
        exit_row = {}
        for x in states:
            lr = {}
            er = {}
            for (i, y), w in self.rows[x].items():
                if i == 0:
                    lr[y] = lr.get(y, Fraction(0)) + w
                else:
                    er[(i - 1, y)] = er.get((i - 1, y), Fraction(0)) + w
            loop_row[x] = lr
            exit_row[x] = er
        # backward reachability from exit-emitting states
        alive = {x for x in states if exit_row[x]}
        changed = True
        while changed:
            changed = False
            for x in states:
                if x not in alive and any(y in alive for y in loop_row[x]):
                    alive.add(x)
                    changed = True
        live = [x for x in states if x in alive]
        n = len(live)
        rows = {x: {} for x in states}
        if n:
            pos = {x: k for k, x in enumerate(live)}
            # solve (I - L) T = E over the live block
            exit_keys = sorted({e for x in live for e in exit_row[x]})
            ek_pos = {e: k for k, e in enumerate(exit_keys)}
            m = len(exit_keys)
            a = [[Fraction(0)] * (n + m) for _ in range(n)]
            for x in live:
                r = pos[x]
                a[r][r] += 1
                for y, w in loop_row[x].items():
                    if y in alive:
                        a[r][pos[y]] -= w
                for e, w in exit_row[x].items():
                    a[r][n + ek_pos[e]] += w
            for col in range(n):
                piv = next(r for r in range(col, n) if a[r][col] != 0)
                a[col], a[piv] = a[piv], a[col]
                inv = 1 / a[col][col]
                a[col] = [v * inv for v in a[col]]
                for r in range(n):
                    if r != col and a[r][col] != 0:
                        factor = a[r][col]
                        arow = a[r]
                        crow = a[col]
                        for c in range(col, n + m):
                            arow[c] -= factor * crow[c]
            for x in live:
                r = pos[x]
                rows[x] = {e: a[r][n + k] for e, k in ek_pos.items()
                           if a[r][n + k] != 0}
        return StochMorphism(self.dom, exits, rows)

    def _pretty_row(self, row):
        return "{" + ", ".join(f"{i}:{y!r}: {w}" for (i, y), w in sorted(row.items())) + "}"


BACKENDS: dict[str, type[Morphism]] = {
    "rel": RelMorphism,
    "par": ParMorphism,
    "stoch": StochMorphism,
}


# ---------------------------------------------------------------------------
# Models: a signature with carriers and per-backend generator tables


@dataclass
class Model:
    signature: Signature
    carriers: dict[str, tuple[str, ...]]
    tables: dict[str, dict[str, Morphism]] = field(default_factory=dict)
    default_context: tuple[tuple[str, str], ...] = ()
    name: str = "model"

    def __post_init__(self):
        for ty in self.signature.types:
            if ty not in self.carriers or not self.carriers[ty]:
                raise ShapeError(f"type {ty} has no carrier")
        self._objs = {ty: basic_obj(elems) for ty, elems in self.carriers.items()}

    def carrier_obj(self, ty: str) -> Obj:
        return self._objs[ty]

    def morphism_class(self, backend: str) -> type[Morphism]:
        if backend not in BACKENDS:
            raise ShapeError(f"unknown backend {backend}")
        return BACKENDS[backend]

    def backends(self) -> list[str]:
        return sorted(self.tables.keys())

    def gen_dom(self, name: str) -> Obj:
        from .backends import MAX_CARRIER
        decl = self.signature.generators[name]
        return product([self.carrier_obj(t) for t in decl.inputs],
                       limit=MAX_CARRIER)

    def gen_cods(self, name: str) -> tuple[Obj, ...]:
        from .backends import MAX_CARRIER
        decl = self.signature.generators[name]
        return tuple(product([self.carrier_obj(t) for t in tys],
                             limit=MAX_CARRIER)
                     for tys in decl.branches)

    def table(self, backend: str, name: str) -> Morphism:
        try:
            return self.tables[backend][name]
        except KeyError:
            from .backends import MissingInterpretation
            raise MissingInterpretation(
                f"generator {name} has no {backend} interpretation")

    def set_table(self, backend: str, name: str, m: Morphism) -> None:
        if name not in self.signature.generators:
            raise ShapeError(f"generator {name} not declared")
        expected_dom = self.gen_dom(name)
        expected_cods = self.gen_cods(name)
        if m.dom.elems != expected_dom.elems or len(m.cods) != len(expected_cods) \
                or any(a.elems != b.elems for a, b in zip(m.cods, expected_cods)):
            raise ShapeError(f"table for {name} has the wrong shape")
        m.validate()
        self.tables.setdefault(backend, {})[name] = m

    def check_generator_order(self, backend: str) -> None:
        """Declared generator order must hold in the backend's tables."""
        for (f, g) in self.signature.generator_order:
            if f != g and not self.table(backend, f).leq(self.table(backend, g)):
                raise ShapeError(f"declared order {f} <= {g} fails in {backend}")
