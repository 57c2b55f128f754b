"""Abstract syntax and structural calculus of the internal term language.

Terms jump to labelled exits (``Return``), branch on the outcome of a
declared generator (``Gen``), or introduce a labelled looping point
(``Loop``).  Binders are kept locally fresh: every operation that could
capture a name renames the offending binder before descending, so terms
can be compared by renaming binders canonically and testing structural
equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union


# ---------------------------------------------------------------------------
# Errors


class KernelError(Exception):
    """Base class for kernel failures."""


class KernelTypeError(KernelError):
    """A term is not derivable; carries the failing subterm and rule."""

    def __init__(self, kind: str, message: str, subterm: Optional["Term"] = None,
                 rule: Optional[str] = None):
        super().__init__(message)
        self.kind = kind
        self.subterm = subterm
        self.rule = rule

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        base = super().__str__()
        if self.rule:
            base += f" [rule {self.rule}]"
        return base


class SignatureMismatch(KernelError):
    pass


class RuleInapplicable(KernelError):
    pass


# ---------------------------------------------------------------------------
# Signatures

VarName = str
LabelName = str
TypeName = str

# A context is an ordered list of (variable, basic type); an index is an
# ordered list of (label, list of basic types).
Context = tuple[tuple[VarName, TypeName], ...]
Index = tuple[tuple[LabelName, tuple[TypeName, ...]], ...]


@dataclass(frozen=True)
class GeneratorDecl:
    name: str
    inputs: tuple[TypeName, ...]
    branches: tuple[tuple[TypeName, ...], ...]  # may be empty: no continuation


@dataclass(frozen=True)
class Signature:
    types: frozenset[TypeName]
    generators: dict[str, GeneratorDecl] = field(default_factory=dict)
    # Pairs (f, g) of same-typed generator names with f <= g.  Defaults to the
    # discrete order; validated to be reflexive/antisymmetric/transitive on
    # the declared pairs.
    generator_order: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        for g in self.generators.values():
            for t in g.inputs:
                if t not in self.types:
                    raise KernelTypeError("UnknownType",
                                          f"generator {g.name} uses undeclared type {t}")
            for br in g.branches:
                for t in br:
                    if t not in self.types:
                        raise KernelTypeError("UnknownType",
                                              f"generator {g.name} uses undeclared type {t}")
        self._check_order()

    def _check_order(self):
        order = set(self.generator_order)
        for (f, g) in order:
            if f not in self.generators or g not in self.generators:
                raise KernelTypeError("UnknownGenerator",
                                      f"order declares unknown generator in ({f}, {g})")
            df, dg = self.generators[f], self.generators[g]
            if (df.inputs, df.branches) != (dg.inputs, dg.branches):
                raise KernelTypeError("TypeMismatch",
                                      f"ordered generators {f} <= {g} have different types")
        names = {f for pair in order for f in pair}
        for f in names:
            if (f, f) not in order:
                order.add((f, f))
        for (f, g) in list(order):
            if (g, f) in order and f != g:
                raise KernelTypeError("OrderError", f"order not antisymmetric on ({f}, {g})")
        for (f, g) in list(order):
            for (g2, h) in list(order):
                if g2 == g and (f, h) not in order:
                    raise KernelTypeError("OrderError",
                                          f"order not transitive: {f} <= {g} <= {h}")

    def leq(self, f: str, g: str) -> bool:
        return f == g or (f, g) in self.generator_order


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Return:
    label: LabelName
    args: tuple[VarName, ...]


@dataclass(frozen=True)
class Gen:
    gen: str
    args: tuple[VarName, ...]
    # Each branch binds a list of variables and continues with a term.
    branches: tuple[tuple[tuple[VarName, ...], "Term"], ...]


@dataclass(frozen=True)
class Loop:
    label: LabelName
    args: tuple[VarName, ...]
    binders: tuple[VarName, ...]
    body: "Term"


Term = Union[Return, Gen, Loop]


def ret(label: str, *args: str) -> Return:
    return Return(label, tuple(args))


def gen(name: str, args: Sequence[str], *branches: tuple[Sequence[str], Term]) -> Gen:
    return Gen(name, tuple(args), tuple((tuple(bs), t) for bs, t in branches))


def loop(label: str, args: Sequence[str], binders: Sequence[str], body: Term) -> Loop:
    return Loop(label, tuple(args), tuple(binders), body)


# ---------------------------------------------------------------------------
# Free names


def free_vars(t: Term) -> frozenset[VarName]:
    if isinstance(t, Return):
        return frozenset(t.args)
    if isinstance(t, Gen):
        out = set(t.args)
        for binders, body in t.branches:
            out |= free_vars(body) - set(binders)
        return frozenset(out)
    out = set(t.args) | (free_vars(t.body) - set(t.binders))
    return frozenset(out)


def free_labels(t: Term) -> frozenset[LabelName]:
    if isinstance(t, Return):
        return frozenset((t.label,))
    if isinstance(t, Gen):
        out: set[LabelName] = set()
        for _, body in t.branches:
            out |= free_labels(body)
        return frozenset(out)
    return frozenset(free_labels(t.body) - {t.label})


def all_names(t: Term) -> frozenset[str]:
    """Every variable and label occurring in t, bound or free."""
    if isinstance(t, Return):
        return frozenset(t.args) | {t.label}
    if isinstance(t, Gen):
        out = set(t.args)
        for binders, body in t.branches:
            out |= set(binders) | all_names(body)
        return frozenset(out)
    return frozenset(t.args) | set(t.binders) | {t.label} | all_names(t.body)


# ---------------------------------------------------------------------------
# Fresh names


def fresh(kind: str, avoid: Iterable[str], hint: Optional[str] = None) -> str:
    """Deterministic counter-suffix naming: fresh(var, {x}) = x0, then x1, ...

    kind is "var" or "label"; the default stems are x and a.
    """
    avoid = set(avoid)
    stem = hint if hint is not None else ("x" if kind == "var" else "a")
    i = 0
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


def _freshen(names: Sequence[str], avoid: set[str], kind: str) -> list[str]:
    out = []
    for n in names:
        n2 = fresh(kind, avoid, hint=n)
        avoid.add(n2)
        out.append(n2)
    return out


# ---------------------------------------------------------------------------
# Variable substitution (simultaneous, capture avoiding)


def _subst_var_map(t: Term, m: Mapping[VarName, VarName]) -> Term:
    if not m:
        return t
    if isinstance(t, Return):
        return Return(t.label, tuple(m.get(x, x) for x in t.args))
    if isinstance(t, Gen):
        branches = []
        for binders, body in t.branches:
            branches.append(_subst_under_binders(binders, body, m))
        return Gen(t.gen, tuple(m.get(x, x) for x in t.args), tuple(branches))
    binders, body = _subst_under_binders(t.binders, t.body, m)
    return Loop(t.label, tuple(m.get(x, x) for x in t.args), binders, body)


def _subst_under_binders(binders: Sequence[VarName], body: Term,
                         m: Mapping[VarName, VarName]) -> tuple[tuple[VarName, ...], Term]:
    inner = {k: v for k, v in m.items() if k not in binders}
    captured = [b for b in binders if b in inner.values()]
    if captured:
        avoid = set(all_names(body)) | set(inner.keys()) | set(inner.values()) | set(binders)
        renaming = {}
        new_binders = []
        for b in binders:
            if b in inner.values():
                b2 = fresh("var", avoid, hint=b)
                avoid.add(b2)
                renaming[b] = b2
                new_binders.append(b2)
            else:
                new_binders.append(b)
        body = _subst_var_map(body, renaming)
        binders = new_binders
    return tuple(binders), _subst_var_map(body, inner)


def subst_vars(t: Term, olds: Sequence[VarName], news: Sequence[VarName]) -> Term:
    """p[olds \\ news], simultaneous.  On duplicate olds the leftmost wins."""
    if len(olds) != len(news):
        raise KernelError("substitution lists differ in length")
    m: dict[VarName, VarName] = {}
    for o, n in zip(reversed(olds), reversed(news)):
        m[o] = n
    m = {k: v for k, v in m.items() if k != v}
    return _subst_var_map(t, m)


# ---------------------------------------------------------------------------
# Label substitution (simultaneous, capture avoiding)

# label -> (bound variables, replacement term)
LabelSubst = Mapping[LabelName, tuple[tuple[VarName, ...], Term]]


def subst_labels(t: Term, m: LabelSubst) -> Term:
    if not m:
        return t
    if isinstance(t, Return):
        if t.label in m:
            binders, q = m[t.label]
            if len(binders) != len(t.args):
                raise KernelError(
                    f"label {t.label} substituted with wrong arity ({len(binders)} binders, "
                    f"{len(t.args)} args)")
            return subst_vars(q, binders, t.args)
        return t
    repl_fvs: set[VarName] = set()
    repl_fls: set[LabelName] = set()
    for binders, q in m.values():
        repl_fvs |= free_vars(q) - set(binders)
        repl_fls |= free_labels(q)
    if isinstance(t, Gen):
        branches = []
        for binders, body in t.branches:
            clash = [b for b in binders if b in repl_fvs]
            if clash:
                avoid = set(all_names(body)) | repl_fvs | set(binders)
                new_binders = []
                renaming = {}
                for b in binders:
                    if b in repl_fvs:
                        b2 = fresh("var", avoid, hint=b)
                        avoid.add(b2)
                        renaming[b] = b2
                        new_binders.append(b2)
                    else:
                        new_binders.append(b)
                body = _subst_var_map(body, renaming)
                binders = tuple(new_binders)
            branches.append((tuple(binders), subst_labels(body, m)))
        return Gen(t.gen, t.args, tuple(branches))
    assert isinstance(t, Loop)
    label, binders, body = t.label, t.binders, t.body
    inner = {k: v for k, v in m.items() if k != label}
    if label in repl_fls and inner:
        avoid = set(all_names(body)) | repl_fls | {label}
        label2 = fresh("label", avoid, hint=label)
        body = rename_labels(body, {label: label2})
        label = label2
    clash = [b for b in binders if b in repl_fvs]
    if clash:
        avoid = set(all_names(body)) | repl_fvs | set(binders)
        new_binders = []
        renaming = {}
        for b in binders:
            if b in repl_fvs:
                b2 = fresh("var", avoid, hint=b)
                avoid.add(b2)
                renaming[b] = b2
                new_binders.append(b2)
            else:
                new_binders.append(b)
        body = _subst_var_map(body, renaming)
        binders = tuple(new_binders)
    return Loop(label, t.args, binders, subst_labels(body, inner))


def subst_label(t: Term, label: LabelName, bound: Sequence[VarName], body: Term) -> Term:
    """p[label \\ bound.body]: replace every return at `label` by `body`."""
    return subst_labels(t, {label: (tuple(bound), body)})


def rename_labels(t: Term, m: Mapping[LabelName, LabelName]) -> Term:
    """Rename free labels; merging (non-injective maps) is label contraction."""
    if not m:
        return t
    if isinstance(t, Return):
        return Return(m.get(t.label, t.label), t.args)
    if isinstance(t, Gen):
        return Gen(t.gen, t.args,
                   tuple((bs, rename_labels(b, m)) for bs, b in t.branches))
    inner = {k: v for k, v in m.items() if k != t.label}
    label, body = t.label, t.body
    if label in inner.values():
        avoid = set(all_names(body)) | set(inner.keys()) | set(inner.values())
        label2 = fresh("label", avoid, hint=label)
        body = rename_labels(body, {label: label2})
        label = label2
    return Loop(label, t.args, t.binders, rename_labels(body, inner))


# ---------------------------------------------------------------------------
# Cut (multicategorical composition along one label)


def cut(p: Term, omega: LabelName, q_vars: Sequence[VarName], q: Term) -> Term:
    """p composed with q along omega; q's context variables are q_vars."""
    return subst_label(p, omega, q_vars, q)


# ---------------------------------------------------------------------------
# Alpha equivalence


def _canon(t: Term, vmap: dict[VarName, str], lmap: dict[LabelName, str],
           counter: list[int]) -> tuple:
    if isinstance(t, Return):
        return ("r", lmap.get(t.label, t.label),
                tuple(vmap.get(x, x) for x in t.args))
    if isinstance(t, Gen):
        brs = []
        for binders, body in t.branches:
            v2 = dict(vmap)
            names = []
            for b in binders:
                counter[0] += 1
                nb = f"%v{counter[0]}"
                v2[b] = nb
                names.append(nb)
            brs.append((tuple(names), _canon(body, v2, lmap, counter)))
        return ("g", t.gen, tuple(vmap.get(x, x) for x in t.args), tuple(brs))
    v2 = dict(vmap)
    names = []
    for b in t.binders:
        counter[0] += 1
        nb = f"%v{counter[0]}"
        v2[b] = nb
        names.append(nb)
    l2 = dict(lmap)
    counter[0] += 1
    nl = f"%l{counter[0]}"
    l2[t.label] = nl
    return ("l", nl, tuple(vmap.get(x, x) for x in t.args), tuple(names),
            _canon(t.body, v2, l2, counter))


def canonical(t: Term) -> tuple:
    """Structure with binders renamed in traversal order; free names kept."""
    return _canon(t, {}, {}, [0])


def alpha_eq(t1: Term, t2: Term, ctx: Optional[Context] = None,
             idx: Optional[Index] = None) -> bool:
    """True iff the terms differ only in bound names (same context and index)."""
    return canonical(t1) == canonical(t2)


# ---------------------------------------------------------------------------
# Typechecking


def check_context(ctx: Context) -> None:
    seen = set()
    for (x, _ty) in ctx:
        if x in seen:
            raise KernelTypeError("DuplicateVariable", f"variable {x} repeated in context")
        seen.add(x)


def check_index(idx: Index) -> None:
    seen = set()
    for (a, _sig) in idx:
        if a in seen:
            raise KernelTypeError("DuplicateLabel", f"label {a} repeated in index")
        seen.add(a)


def typecheck(t: Term, ctx: Context, idx: Index, sig: Signature) -> None:
    """Accepts exactly the terms derivable from the three formation rules.

    Raises KernelTypeError (kinds: UnknownVariable, UnknownLabel,
    UnknownGenerator, ArityMismatch, TypeMismatch) on failure.
    """
    check_context(ctx)
    check_index(idx)
    env = dict(ctx)
    labels = dict(idx)
    _typecheck(t, env, labels, sig)


def _typecheck(t: Term, env: dict[VarName, TypeName],
               labels: dict[LabelName, tuple[TypeName, ...]], sig: Signature) -> None:
    if isinstance(t, Return):
        if t.label not in labels:
            raise KernelTypeError("UnknownLabel", f"label {t.label} not in index",
                                  t, "RETURN")
        expected = labels[t.label]
        if len(t.args) != len(expected):
            raise KernelTypeError("ArityMismatch",
                                  f"label {t.label} expects {len(expected)} args, got "
                                  f"{len(t.args)}", t, "RETURN")
        for x, ty in zip(t.args, expected):
            if x not in env:
                raise KernelTypeError("UnknownVariable", f"variable {x} not in scope",
                                      t, "RETURN")
            if env[x] != ty:
                raise KernelTypeError("TypeMismatch",
                                      f"variable {x} has type {env[x]}, needs {ty}",
                                      t, "RETURN")
        return
    if isinstance(t, Gen):
        decl = sig.generators.get(t.gen)
        if decl is None:
            raise KernelTypeError("UnknownGenerator", f"generator {t.gen} not declared",
                                  t, "GENERATOR")
        if len(t.args) != len(decl.inputs):
            raise KernelTypeError("ArityMismatch",
                                  f"generator {t.gen} expects {len(decl.inputs)} args, "
                                  f"got {len(t.args)}", t, "GENERATOR")
        for x, ty in zip(t.args, decl.inputs):
            if x not in env:
                raise KernelTypeError("UnknownVariable", f"variable {x} not in scope",
                                      t, "GENERATOR")
            if env[x] != ty:
                raise KernelTypeError("TypeMismatch",
                                      f"variable {x} has type {env[x]}, needs {ty}",
                                      t, "GENERATOR")
        if len(t.branches) != len(decl.branches):
            raise KernelTypeError("ArityMismatch",
                                  f"generator {t.gen} has {len(decl.branches)} branches, "
                                  f"term provides {len(t.branches)}", t, "GENERATOR")
        for (binders, body), tys in zip(t.branches, decl.branches):
            if len(binders) != len(tys):
                raise KernelTypeError("ArityMismatch",
                                      f"branch of {t.gen} binds {len(binders)} vars, "
                                      f"needs {len(tys)}", t, "GENERATOR")
            if len(set(binders)) != len(binders):
                raise KernelTypeError("DuplicateVariable",
                                      f"branch of {t.gen} repeats a binder", t, "GENERATOR")
            env2 = dict(env)
            env2.update(zip(binders, tys))
            _typecheck(body, env2, labels, sig)
        return
    assert isinstance(t, Loop)
    tys = []
    for x in t.args:
        if x not in env:
            raise KernelTypeError("UnknownVariable", f"variable {x} not in scope",
                                  t, "LOOP")
        tys.append(env[x])
    if len(t.binders) != len(t.args):
        raise KernelTypeError("ArityMismatch",
                              f"loop {t.label} binds {len(t.binders)} vars for "
                              f"{len(t.args)} args", t, "LOOP")
    if len(set(t.binders)) != len(t.binders):
        raise KernelTypeError("DuplicateVariable", f"loop {t.label} repeats a binder",
                              t, "LOOP")
    env2 = dict(env)
    env2.update(zip(t.binders, tys))
    labels2 = dict(labels)
    labels2[t.label] = tuple(tys)
    _typecheck(t.body, env2, labels2, sig)


def infer_index(t: Term, ctx: Context, sig: Signature,
                known: Optional[Index] = None) -> Index:
    """Least index typing t, extending `known`; label order is discovery order."""
    env = dict(ctx)
    out: dict[LabelName, tuple[TypeName, ...]] = dict(known or ())
    order: list[LabelName] = [a for a, _ in (known or ())]

    def go(t: Term, env: dict, bound_labels: dict) -> None:
        if isinstance(t, Return):
            if t.label in bound_labels:
                expected = bound_labels[t.label]
            elif t.label in out:
                expected = out[t.label]
            else:
                tys = []
                for x in t.args:
                    if x not in env:
                        raise KernelTypeError("UnknownVariable",
                                              f"variable {x} not in scope", t)
                    tys.append(env[x])
                out[t.label] = tuple(tys)
                order.append(t.label)
                return
            if len(expected) != len(t.args):
                raise KernelTypeError("ArityMismatch",
                                      f"label {t.label} used at inconsistent arity", t)
            for x, ty in zip(t.args, expected):
                if env.get(x) != ty:
                    raise KernelTypeError("TypeMismatch",
                                          f"label {t.label} used at inconsistent type", t)
            return
        if isinstance(t, Gen):
            decl = sig.generators.get(t.gen)
            if decl is None:
                raise KernelTypeError("UnknownGenerator",
                                      f"generator {t.gen} not declared", t)
            for (binders, body), tys in zip(t.branches, decl.branches):
                env2 = dict(env)
                env2.update(zip(binders, tys))
                go(body, env2, bound_labels)
            return
        tys = tuple(env[x] for x in t.args)
        env2 = dict(env)
        env2.update(zip(t.binders, tys))
        go(t.body, env2, {**bound_labels, t.label: tys})

    go(t, env, {})
    return tuple((a, out[a]) for a in order)


# ---------------------------------------------------------------------------
# Structural rules


def label_contract(t: Term, a1: LabelName, a2: LabelName, a: LabelName) -> Term:
    return rename_labels(t, {a1: a, a2: a})


def label_coaction(t: Term, olds: Sequence[LabelName], news: Sequence[LabelName]) -> Term:
    if len(olds) != len(news):
        raise RuleInapplicable("coaction lists differ in length")
    return rename_labels(t, {o: n for o, n in zip(olds, news) if o != n})


def _map_return_args(t: Term, label: LabelName, f) -> Term:
    """Apply f to the argument tuple of every free return at `label`."""
    if isinstance(t, Return):
        if t.label == label:
            return Return(label, tuple(f(t.args)))
        return t
    if isinstance(t, Gen):
        return Gen(t.gen, t.args,
                   tuple((bs, _map_return_args(b, label, f)) for bs, b in t.branches))
    if t.label == label:
        return t
    return Loop(t.label, t.args, t.binders, _map_return_args(t.body, label, f))


def r_exchange(t: Term, label: LabelName, i: int, j: int) -> Term:
    def f(args):
        args = list(args)
        args[i], args[j] = args[j], args[i]
        return args
    return _map_return_args(t, label, f)


def r_copy(t: Term, label: LabelName, i: int) -> Term:
    def f(args):
        args = list(args)
        args.insert(i + 1, args[i])
        return args
    return _map_return_args(t, label, f)


def r_discard(t: Term, label: LabelName, i: int) -> Term:
    def f(args):
        args = list(args)
        del args[i]
        return args
    return _map_return_args(t, label, f)


def var_contract(t: Term, x1: VarName, x2: VarName, x: VarName) -> Term:
    return subst_vars(t, (x1, x2), (x, x))


def whisk_r(t: Term, w: VarName) -> Term:
    """Append a context variable to every exit (and thread it through loops)."""
    if isinstance(t, Return):
        return Return(t.label, t.args + (w,))
    if isinstance(t, Gen):
        return Gen(t.gen, t.args, tuple((bs, whisk_r(b, w)) for bs, b in t.branches))
    v = fresh("var", all_names(t) | {w}, hint=w)
    body = _subst_var_map(whisk_r(t.body, w), {w: v})
    return Loop(t.label, t.args + (w,), t.binders + (v,), body)


def whisk_l(t: Term, w: VarName) -> Term:
    """Prepend a context variable to every exit."""
    if isinstance(t, Return):
        return Return(t.label, (w,) + t.args)
    if isinstance(t, Gen):
        return Gen(t.gen, t.args, tuple((bs, whisk_l(b, w)) for bs, b in t.branches))
    v = fresh("var", all_names(t) | {w}, hint=w)
    body = _subst_var_map(whisk_l(t.body, w), {w: v})
    return Loop(t.label, (w,) + t.args, (v,) + t.binders, body)


_STRUCTURAL_RULES = {
    "lbl-exchange", "lbl-contract", "lbl-weaken", "r-exch", "r-copy", "r-disc",
    "var-exch", "var-contract", "var-weaken", "whisk-l", "whisk-r", "coaction",
}


def structural(t: Term, rule: str, *args) -> Term:
    """Dispatch for the derivable structural rules.

    Rules that only rearrange the context or index (exchange, weakening)
    leave the term unchanged; the caller retypes it at the transformed
    context/index.
    """
    if rule not in _STRUCTURAL_RULES:
        raise RuleInapplicable(f"unknown structural rule {rule}")
    if rule in ("lbl-exchange", "lbl-weaken", "var-exch", "var-weaken"):
        return t
    if rule == "lbl-contract":
        return label_contract(t, *args)
    if rule == "coaction":
        return label_coaction(t, *args)
    if rule == "r-exch":
        return r_exchange(t, *args)
    if rule == "r-copy":
        return r_copy(t, *args)
    if rule == "r-disc":
        return r_discard(t, *args)
    if rule == "var-contract":
        return var_contract(t, *args)
    if rule == "whisk-l":
        return whisk_l(t, *args)
    return whisk_r(t, *args)


# ---------------------------------------------------------------------------
# Fixpoint unfolding (used by tests and the axiom harness)


def unfold_loop(t: Loop) -> Term:
    """One unfolding: p[binders \\ args][label \\ restarted loop].

    Jumps back to the label re-enter the loop at the jump's arguments, so
    the substituted term is the loop with fresh argument stand-ins bound
    by the label substitution.
    """
    if not isinstance(t, Loop):
        raise RuleInapplicable("unfold_loop needs a loop")
    stepped = subst_vars(t.body, t.binders, t.args)
    avoid = set(all_names(t))
    ws = []
    for a in t.args:
        w = fresh("var", avoid, hint=a)
        avoid.add(w)
        ws.append(w)
    restarted = Loop(t.label, tuple(ws), t.binders, t.body)
    return subst_label(stepped, t.label, tuple(ws), restarted)


def refresh(t: Term, avoid: Iterable[str] = ()) -> Term:
    """Rename every binder to a name fresh for `avoid` and the term itself."""
    avoid_set = set(avoid) | set(all_names(t))

    def go(t: Term, vmap: dict, lmap: dict) -> Term:
        if isinstance(t, Return):
            return Return(lmap.get(t.label, t.label),
                          tuple(vmap.get(x, x) for x in t.args))
        if isinstance(t, Gen):
            branches = []
            for binders, body in t.branches:
                v2 = dict(vmap)
                nbs = []
                for b in binders:
                    b2 = fresh("var", avoid_set, hint=b)
                    avoid_set.add(b2)
                    v2[b] = b2
                    nbs.append(b2)
                branches.append((tuple(nbs), go(body, v2, lmap)))
            return Gen(t.gen, tuple(vmap.get(x, x) for x in t.args), tuple(branches))
        v2 = dict(vmap)
        nbs = []
        for b in t.binders:
            b2 = fresh("var", avoid_set, hint=b)
            avoid_set.add(b2)
            v2[b] = b2
            nbs.append(b2)
        l2 = fresh("label", avoid_set, hint=t.label)
        avoid_set.add(l2)
        lmap2 = dict(lmap)
        lmap2[t.label] = l2
        return Loop(l2, tuple(vmap.get(x, x) for x in t.args), tuple(nbs),
                    go(t.body, v2, lmap2))

    return go(t, {}, {})
