"""Concrete syntax: terms, guarded-command programs, model and triple files.

Terms follow
    term   := ident "(" vars ")" branch*
            | "loop" ident "(" vars ")" "{" vars "." term "}"
    branch := "{" vars "." term "}"        (empty binder lists may drop the dot)

A bare call parses as a return; resolving against a signature turns calls
of declared generators into generator terms (labels and generator names
share one lexical class).

Programs follow
    program := seq ; seq := choice (";" choice)* ;
    choice  := prim ("+[" guard "]" prim)? ;
    prim    := "skip" | "abort" | "assert" pred | "if" guard "then" prim
               "else" prim | "while" guard "do" prim | vars ":=" rhs
             | ident "<-" expr | "(" program ")"

with guard, predicate and state sublanguages distinguished by the shape
expected at each hole, not by separate lexical classes.

Model and triple files are JSON; schemas ship in docs/schema/.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

from .kernel import (Gen, GeneratorDecl, Loop, Return, Signature, Term,
                     free_labels)
from .models import BACKENDS, Model


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class Diagnostic:
    severity: str          # "error" | "warning"
    span: tuple[int, int]  # byte offsets into the source text
    message: str
    hint: Optional[str] = None

    def render(self, text: Optional[str] = None) -> str:
        loc = f"{self.span[0]}..{self.span[1]}"
        out = f"{self.severity} at {loc}: {self.message}"
        if self.hint:
            out += f" ({self.hint})"
        return out


class ParseError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


class ModelError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    kind: str  # term | program | model | triple

    @staticmethod
    def load(path: Union[str, Path]) -> "SourceFile":
        p = Path(path)
        name = p.name
        if name.endswith(".icl"):
            kind = "term"
        elif name.endswith(".gcl"):
            kind = "program"
        elif name.endswith(".model.json"):
            kind = "model"
        elif name.endswith(".triple.json"):
            kind = "triple"
        else:
            raise ModelError("UnknownKind", f"cannot infer file kind of {name}")
        return SourceFile(str(p), p.read_text(encoding="utf-8"), kind)


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:=|<-|\|>|\+\[|[(){}.,;#\[\]\\])
""", re.VERBOSE)

KEYWORDS = {"loop", "skip", "abort", "if", "then", "else", "while", "do",
            "assert", "not", "and", "or", "top", "bot", "L", "R"}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", or the operator text
    text: str
    pos: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.pos, self.pos + len(self.text))


def tokenize(text: str) -> list[Token]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(Diagnostic("error", (i, i + 1),
                                        f"unexpected character {text[i]!r}"))
        i = m.end()
        if m.lastgroup == "ws":
            continue
        tok = m.group()
        if m.lastgroup == "ident":
            kind = "kw" if tok in KEYWORDS else "ident"
        else:
            kind = tok
        out.append(Token(kind, tok, m.start()))
    out.append(Token("eof", "", len(text)))
    return out


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def at_kw(self, word: str) -> bool:
        return self.peek().kind == "kw" and self.peek().text == word

    def eat(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(Diagnostic("error", t.span,
                                        f"expected {want!r}, found {t.text!r}"))
        return self.next()

    def eat_kw(self, word: str) -> Token:
        t = self.peek()
        if not self.at_kw(word):
            raise ParseError(Diagnostic("error", t.span,
                                        f"expected {word!r}, found {t.text!r}"))
        return self.next()

    def eat_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(Diagnostic("error", t.span,
                                        f"expected a name, found {t.text!r}"))
        return self.next()

    def done(self) -> bool:
        return self.peek().kind == "eof"

    def expect_eof(self) -> None:
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(Diagnostic("error", t.span,
                                        f"trailing input from {t.text!r}"))


# ---------------------------------------------------------------------------
# Term parsing


def _parse_var_list(c: _Cursor) -> list[str]:
    out = []
    if c.peek().kind == "ident":
        out.append(c.eat_ident().text)
        while c.at(","):
            c.next()
            out.append(c.eat_ident().text)
    return out


def _parse_term(c: _Cursor) -> Term:
    if c.at_kw("loop"):
        c.next()
        label = c.eat_ident().text
        c.eat("(")
        args = _parse_var_list(c)
        c.eat(")")
        c.eat("{")
        save = c.i
        binders = _parse_var_list(c)
        if c.at("."):
            c.next()
        else:
            c.i = save
            binders = []
        body = _parse_term(c)
        c.eat("}")
        return Loop(label, tuple(args), tuple(binders), body)
    name = c.eat_ident().text
    c.eat("(")
    args = _parse_var_list(c)
    c.eat(")")
    branches = []
    while c.at("{"):
        c.next()
        save = c.i
        binders = _parse_var_list(c)
        if c.at("."):
            c.next()
        else:
            c.i = save
            binders = []
        body = _parse_term(c)
        c.eat("}")
        branches.append((tuple(binders), body))
    if branches:
        return Gen(name, tuple(args), tuple(branches))
    return Return(name, tuple(args))


def resolve_generators(t: Term, sig: Signature) -> Term:
    """Bare calls of declared generators become zero-branch generator terms."""
    if isinstance(t, Return):
        if t.label in sig.generators and not sig.generators[t.label].branches:
            return Gen(t.label, t.args, ())
        return t
    if isinstance(t, Gen):
        return Gen(t.gen, t.args,
                   tuple((bs, resolve_generators(b, sig)) for bs, b in t.branches))
    return Loop(t.label, t.args, t.binders, resolve_generators(t.body, sig))


def parse_term(text: str, sig: Optional[Signature] = None) -> Term:
    c = _Cursor(tokenize(text))
    t = _parse_term(c)
    c.expect_eof()
    if sig is not None:
        t = resolve_generators(t, sig)
    return t


# ---------------------------------------------------------------------------
# Guard / predicate / expression / state / command ASTs


@dataclass(frozen=True)
class GL:
    pass


@dataclass(frozen=True)
class GR:
    pass


@dataclass(frozen=True)
class GNot:
    body: "GuardAST"


@dataclass(frozen=True)
class GAnd:
    left: "GuardAST"
    right: "GuardAST"


@dataclass(frozen=True)
class GOr:
    left: "GuardAST"
    right: "GuardAST"


@dataclass(frozen=True)
class GCall:
    name: str
    args: tuple[str, ...]


GuardAST = Union[GL, GR, GNot, GAnd, GOr, GCall]


@dataclass(frozen=True)
class PTop:
    pass


@dataclass(frozen=True)
class PBot:
    pass


@dataclass(frozen=True)
class PAnd:
    left: "PredAST"
    right: "PredAST"


@dataclass(frozen=True)
class PCond:
    left: "PredAST"
    guard: GuardAST
    right: "PredAST"


@dataclass(frozen=True)
class PLift:
    guard: GuardAST


@dataclass(frozen=True)
class PSubst:
    pred: "PredAST"
    var: str
    expr: "ExprAST"


@dataclass(frozen=True)
class PCall:
    name: str
    args: tuple[str, ...]


PredAST = Union[PTop, PBot, PAnd, PCond, PLift, PSubst, PCall]


@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class ECall:
    name: str
    args: tuple[str, ...]


ExprAST = Union[EVar, ECall]


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Abort:
    pass


@dataclass(frozen=True)
class Seq:
    first: "CmdAST"
    second: "CmdAST"


@dataclass(frozen=True)
class If:
    guard: GuardAST
    then: "CmdAST"
    orelse: "CmdAST"


@dataclass(frozen=True)
class WhileCmd:
    guard: GuardAST
    body: "CmdAST"


@dataclass(frozen=True)
class AssertCmd:
    pred: PredAST


@dataclass(frozen=True)
class VarAssign:
    targets: tuple[str, ...]
    sources: tuple[str, ...]


@dataclass(frozen=True)
class GenAssign:
    targets: tuple[str, ...]
    gen: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Sample:
    target: str
    expr: ExprAST


@dataclass(frozen=True)
class CmdChoice:
    left: "CmdAST"
    guard: GuardAST
    right: "CmdAST"


CmdAST = Union[Skip, Abort, Seq, If, WhileCmd, AssertCmd, VarAssign, GenAssign,
               Sample, CmdChoice]


@dataclass(frozen=True)
class SBot:
    pass


@dataclass(frozen=True)
class SAtom:
    name: str


@dataclass(frozen=True)
class SObserve:
    state: "StateAST"
    pred: PredAST


@dataclass(frozen=True)
class SChoice:
    left: "StateAST"
    guard: GuardAST
    right: "StateAST"


@dataclass(frozen=True)
class SCosubst:
    state: "StateAST"
    target: str
    source: str


@dataclass(frozen=True)
class SMute:
    state: "StateAST"
    var: str
    expr: ExprAST


StateAST = Union[SBot, SAtom, SObserve, SChoice, SCosubst, SMute]


# ---------------------------------------------------------------------------
# Guard / predicate / expression parsing


def _parse_guard(c: _Cursor) -> GuardAST:
    left = _parse_guard_conj(c)
    while c.at_kw("or"):
        c.next()
        left = GOr(left, _parse_guard_conj(c))
    return left


def _parse_guard_conj(c: _Cursor) -> GuardAST:
    left = _parse_guard_atom(c)
    while c.at_kw("and"):
        c.next()
        left = GAnd(left, _parse_guard_atom(c))
    return left


def _parse_guard_atom(c: _Cursor) -> GuardAST:
    if c.at_kw("not"):
        c.next()
        return GNot(_parse_guard_atom(c))
    if c.at_kw("L"):
        c.next()
        return GL()
    if c.at_kw("R"):
        c.next()
        return GR()
    if c.at("("):
        c.next()
        g = _parse_guard(c)
        c.eat(")")
        return g
    name = c.eat_ident().text
    c.eat("(")
    args = _parse_var_list(c)
    c.eat(")")
    return GCall(name, tuple(args))


def _parse_expr(c: _Cursor) -> ExprAST:
    name = c.eat_ident().text
    if c.at("("):
        c.next()
        args = _parse_var_list(c)
        c.eat(")")
        return ECall(name, tuple(args))
    return EVar(name)


def _parse_pred(c: _Cursor) -> PredAST:
    left = _parse_pred_conj(c)
    if c.at("+["):
        c.next()
        b = _parse_guard(c)
        c.eat("]")
        right = _parse_pred_conj(c)
        return PCond(left, b, right)
    return left


def _parse_pred_conj(c: _Cursor) -> PredAST:
    left = _parse_pred_post(c)
    while c.at_kw("and"):
        c.next()
        left = PAnd(left, _parse_pred_post(c))
    return left


def _parse_pred_post(c: _Cursor) -> PredAST:
    p = _parse_pred_atom(c)
    while c.at("["):
        c.next()
        var = c.eat_ident().text
        c.eat("\\")
        e = _parse_expr(c)
        c.eat("]")
        p = PSubst(p, var, e)
    return p


def _parse_pred_atom(c: _Cursor) -> PredAST:
    if c.at_kw("top"):
        c.next()
        return PTop()
    if c.at_kw("bot"):
        c.next()
        return PBot()
    if c.at("("):
        # could be a parenthesised guard to lift, or a parenthesised predicate
        save = c.i
        try:
            c.next()
            g = _parse_guard(c)
            c.eat(")")
            c.eat("#")
            return PLift(g)
        except ParseError:
            c.i = save
        c.eat("(")
        p = _parse_pred(c)
        c.eat(")")
        return p
    if c.at_kw("not") or c.at_kw("L") or c.at_kw("R"):
        g = _parse_guard_atom(c)
        c.eat("#")
        return PLift(g)
    name = c.eat_ident().text
    c.eat("(")
    args = _parse_var_list(c)
    c.eat(")")
    if c.at("#"):
        c.next()
        return PLift(GCall(name, tuple(args)))
    return PCall(name, tuple(args))


# ---------------------------------------------------------------------------
# State parsing


def _parse_state(c: _Cursor) -> StateAST:
    left = _parse_state_post(c)
    if c.at("+["):
        c.next()
        b = _parse_guard(c)
        c.eat("]")
        right = _parse_state_post(c)
        return SChoice(left, b, right)
    return left


def _parse_state_post(c: _Cursor) -> StateAST:
    s = _parse_state_atom(c)
    while True:
        if c.at("|>"):
            c.next()
            s = SObserve(s, _parse_pred_atom_or_conj(c))
        elif c.at("("):
            c.next()
            u = c.eat_ident().text
            c.eat("\\")
            x = c.eat_ident().text
            c.eat(")")
            s = SCosubst(s, u, x)
        elif c.at("["):
            c.next()
            x = c.eat_ident().text
            c.eat("<-")
            e = _parse_expr(c)
            c.eat("]")
            s = SMute(s, x, e)
        else:
            return s


def _parse_pred_atom_or_conj(c: _Cursor) -> PredAST:
    left = _parse_pred_post(c)
    while c.at_kw("and"):
        c.next()
        left = PAnd(left, _parse_pred_post(c))
    return left


def _parse_state_atom(c: _Cursor) -> StateAST:
    if c.at_kw("bot"):
        c.next()
        return SBot()
    if c.at("("):
        c.next()
        s = _parse_state(c)
        c.eat(")")
        return s
    name = c.eat_ident().text
    c.eat("(")
    c.eat(")")
    return SAtom(name)


def parse_state(text: str) -> StateAST:
    c = _Cursor(tokenize(text))
    s = _parse_state(c)
    c.expect_eof()
    return s


def parse_guard(text: str) -> GuardAST:
    c = _Cursor(tokenize(text))
    g = _parse_guard(c)
    c.expect_eof()
    return g


def parse_pred(text: str) -> PredAST:
    c = _Cursor(tokenize(text))
    p = _parse_pred(c)
    c.expect_eof()
    return p


# ---------------------------------------------------------------------------
# Program parsing


def parse_program(text: str) -> CmdAST:
    c = _Cursor(tokenize(text))
    p = _parse_seq(c)
    c.expect_eof()
    return p


def _parse_seq(c: _Cursor) -> CmdAST:
    left = _parse_choice(c)
    while c.at(";"):
        c.next()
        left = Seq(left, _parse_choice(c))
    return left


def _parse_choice(c: _Cursor) -> CmdAST:
    left = _parse_prim(c)
    if c.at("+["):
        c.next()
        b = _parse_guard(c)
        c.eat("]")
        right = _parse_prim(c)
        return CmdChoice(left, b, right)
    return left


def _parse_prim(c: _Cursor) -> CmdAST:
    t = c.peek()
    if c.at_kw("skip"):
        c.next()
        return Skip()
    if c.at_kw("abort"):
        c.next()
        return Abort()
    if c.at_kw("assert"):
        c.next()
        return AssertCmd(_parse_pred(c))
    if c.at_kw("if"):
        c.next()
        b = _parse_guard(c)
        c.eat_kw("then")
        then = _parse_prim(c)
        c.eat_kw("else")
        orelse = _parse_prim(c)
        return If(b, then, orelse)
    if c.at_kw("while"):
        c.next()
        b = _parse_guard(c)
        c.eat_kw("do")
        return WhileCmd(b, _parse_prim(c))
    if c.at("("):
        c.next()
        p = _parse_seq(c)
        c.eat(")")
        return p
    if t.kind != "ident":
        raise ParseError(Diagnostic("error", t.span,
                                    f"expected a command, found {t.text!r}"))
    targets = _parse_var_list(c)
    if c.at("<-"):
        if len(targets) != 1:
            raise ParseError(Diagnostic("error", t.span,
                                        "sampling takes a single target"))
        c.next()
        return Sample(targets[0], _parse_expr(c))
    c.eat(":=")
    first = c.eat_ident().text
    if c.at("("):
        c.next()
        args = _parse_var_list(c)
        c.eat(")")
        return GenAssign(tuple(targets), first, tuple(args))
    sources = [first]
    while c.at(","):
        c.next()
        sources.append(c.eat_ident().text)
    if len(sources) != len(targets):
        raise ParseError(Diagnostic("error", t.span,
                                    "assignment arity mismatch"))
    return VarAssign(tuple(targets), tuple(sources))


# ---------------------------------------------------------------------------
# Printing


def print_term(t: Term) -> str:
    if isinstance(t, Return):
        return f"{t.label}({', '.join(t.args)})"
    if isinstance(t, Gen):
        parts = [f"{t.gen}({', '.join(t.args)})"]
        for binders, body in t.branches:
            if binders:
                parts.append("{" + ", ".join(binders) + ". " + print_term(body) + "}")
            else:
                parts.append("{" + print_term(body) + "}")
        return "".join(parts)
    head = f"loop {t.label}({', '.join(t.args)})"
    if t.binders:
        return head + "{" + ", ".join(t.binders) + ". " + print_term(t.body) + "}"
    return head + "{" + print_term(t.body) + "}"


def print_guard(g: GuardAST, prec: int = 0) -> str:
    if isinstance(g, GL):
        return "L"
    if isinstance(g, GR):
        return "R"
    if isinstance(g, GNot):
        return "not " + print_guard(g.body, 2)
    if isinstance(g, GAnd):
        s = f"{print_guard(g.left, 1)} and {print_guard(g.right, 2)}"
        return f"({s})" if prec >= 2 else s
    if isinstance(g, GOr):
        s = f"{print_guard(g.left, 0)} or {print_guard(g.right, 1)}"
        return f"({s})" if prec >= 1 else s
    return f"{g.name}({', '.join(g.args)})"


def print_expr(e: ExprAST) -> str:
    if isinstance(e, EVar):
        return e.name
    return f"{e.name}({', '.join(e.args)})"


def print_pred(p: PredAST, prec: int = 0) -> str:
    if isinstance(p, PTop):
        return "top"
    if isinstance(p, PBot):
        return "bot"
    if isinstance(p, PAnd):
        s = f"{print_pred(p.left, 1)} and {print_pred(p.right, 2)}"
        return f"({s})" if prec >= 2 else s
    if isinstance(p, PCond):
        s = (f"{print_pred(p.left, 1)} +[{print_guard(p.guard)}] "
             f"{print_pred(p.right, 1)}")
        return f"({s})" if prec >= 1 else s
    if isinstance(p, PLift):
        inner = print_guard(p.guard, 3)
        if isinstance(p.guard, (GAnd, GOr, GNot)):
            inner = f"({print_guard(p.guard)})"
        return inner + "#"
    if isinstance(p, PSubst):
        return (f"{print_pred(p.pred, 2)}[{p.var} \\ {print_expr(p.expr)}]")
    return f"{p.name}({', '.join(p.args)})"


def print_state(s: StateAST, prec: int = 0) -> str:
    if isinstance(s, SBot):
        return "bot"
    if isinstance(s, SAtom):
        return f"{s.name}()"
    if isinstance(s, SObserve):
        return f"{print_state(s.state, 1)} |> {print_pred(s.pred, 2)}"
    if isinstance(s, SChoice):
        t = (f"{print_state(s.left, 1)} +[{print_guard(s.guard)}] "
             f"{print_state(s.right, 1)}")
        return f"({t})" if prec >= 1 else t
    if isinstance(s, SCosubst):
        return f"{print_state(s.state, 1)}({s.target} \\ {s.source})"
    return f"{print_state(s.state, 1)}[{s.var} <- {print_expr(s.expr)}]"


def print_program(p: CmdAST, prec: int = 0) -> str:
    if isinstance(p, Skip):
        return "skip"
    if isinstance(p, Abort):
        return "abort"
    if isinstance(p, AssertCmd):
        return f"assert {print_pred(p.pred)}"
    if isinstance(p, Seq):
        s = f"{print_program(p.first, 1)}; {print_program(p.second, 0)}"
        return f"({s})" if prec >= 1 else s
    if isinstance(p, CmdChoice):
        s = (f"{print_program(p.left, 2)} +[{print_guard(p.guard)}] "
             f"{print_program(p.right, 2)}")
        return f"({s})" if prec >= 1 else s
    if isinstance(p, If):
        s = (f"if {print_guard(p.guard)} then {print_program(p.then, 2)} "
             f"else {print_program(p.orelse, 2)}")
        return f"({s})" if prec >= 2 else s
    if isinstance(p, WhileCmd):
        s = f"while {print_guard(p.guard)} do {print_program(p.body, 2)}"
        return f"({s})" if prec >= 2 else s
    if isinstance(p, VarAssign):
        return f"{', '.join(p.targets)} := {', '.join(p.sources)}"
    if isinstance(p, GenAssign):
        return f"{', '.join(p.targets)} := {p.gen}({', '.join(p.args)})"
    return f"{p.target} <- {print_expr(p.expr)}"


# ---------------------------------------------------------------------------
# Model files


def _parse_fraction(s) -> Fraction:
    if not isinstance(s, str):
        raise ModelError("NonRational",
                         f"probabilities must be strings like '1/2', got {s!r}")
    if not re.fullmatch(r"\d+(/\d+)?", s):
        raise ModelError("NonRational", f"not an exact rational: {s!r}")
    return Fraction(s)


def parse_model(source: Union[str, dict], name: str = "model") -> Model:
    """Parse a model file (JSON text or already-decoded object)."""
    doc = json.loads(source) if isinstance(source, str) else source
    if not isinstance(doc, dict):
        raise ModelError("BadModel", "model file must be a JSON object")
    types = doc.get("types")
    if not isinstance(types, dict) or not types:
        raise ModelError("BadModel", "model needs a nonempty 'types' object")
    carriers = {}
    for ty, elems in types.items():
        if (not isinstance(elems, list) or not elems
                or not all(isinstance(e, str) for e in elems)):
            raise ModelError("BadModel", f"carrier of {ty} must be a list of names")
        if len(set(elems)) != len(elems):
            raise ModelError("BadModel", f"carrier of {ty} repeats an element")
        carriers[ty] = tuple(elems)

    gens = {}
    gen_docs = doc.get("generators", {})
    if not isinstance(gen_docs, dict):
        raise ModelError("BadModel", "'generators' must be an object")
    for gname, g in gen_docs.items():
        inputs = g.get("inputs", [])
        branches = g.get("branches", [])
        for ty in list(inputs) + [t for b in branches for t in b]:
            if ty not in carriers:
                raise ModelError("UnknownType",
                                 f"generator {gname} uses undeclared type {ty}")
        gens[gname] = GeneratorDecl(gname, tuple(inputs),
                                    tuple(tuple(b) for b in branches))

    order = frozenset((a, b) for a, b in doc.get("order", []))
    sig = Signature(types=frozenset(carriers), generators=gens,
                    generator_order=order)
    ctx = tuple((x, ty) for x, ty in doc.get("context", []))
    for _, ty in ctx:
        if ty not in carriers:
            raise ModelError("UnknownType", f"context uses undeclared type {ty}")
    model = Model(signature=sig, carriers=carriers, default_context=ctx, name=name)

    for gname, g in gen_docs.items():
        decl = gens[gname]
        dom = model.gen_dom(gname)
        cods = model.gen_cods(gname)
        for backend, table in g.get("tables", {}).items():
            if backend not in BACKENDS:
                raise ModelError("UnknownBackend", f"unknown backend {backend}")
            cls = BACKENDS[backend]
            rows = {x: cls.row_zero() for x in dom.elems}
            seen = set()
            for pair in table:
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise ModelError("BadModel",
                                     f"table rows of {gname} must be [input, row]")
                inp, row = pair
                key = tuple(inp)
                if len(key) != len(decl.inputs):
                    raise ModelError("ArityMismatch",
                                     f"input {inp} of {gname} has wrong arity")
                if key not in set(dom.elems):
                    raise ModelError("ArityMismatch",
                                     f"input {inp} of {gname} outside carrier")
                if key in seen:
                    raise ModelError("BadModel",
                                     f"duplicate input {inp} in table of {gname}")
                seen.add(key)
                rows[key] = _parse_row(cls, row, decl, cods, gname)
            m = cls(dom, cods, rows)
            try:
                m.validate()
            except Exception as exc:
                raise ModelError("RowMassExceedsOne" if "mass" in str(exc)
                                 else "BadModel", f"{gname}: {exc}")
            model.set_table(backend, gname, m)
    for backend in model.tables:
        try:
            model.check_generator_order(backend)
        except Exception as exc:
            raise ModelError("OrderViolated", str(exc))
    return model


def _parse_row(cls, row, decl: GeneratorDecl, cods, gname: str):
    def entry(branch, outs):
        if not isinstance(branch, int) or not (0 <= branch < len(decl.branches)):
            raise ModelError("ArityMismatch",
                             f"{gname}: branch {branch} out of range")
        y = tuple(outs)
        if len(y) != len(decl.branches[branch]):
            raise ModelError("ArityMismatch",
                             f"{gname}: outputs {outs} have wrong arity")
        if y not in set(cods[branch].elems):
            raise ModelError("ArityMismatch",
                             f"{gname}: outputs {outs} outside carrier")
        return (branch, y)

    if cls.backend == "par":
        if row is None:
            return None
        b, outs = row
        return entry(b, outs)
    if cls.backend == "rel":
        return frozenset(entry(b, outs) for b, outs in row)
    out = {}
    total = Fraction(0)
    for b, outs, w in row:
        e = entry(b, outs)
        frac = _parse_fraction(w)
        out[e] = out.get(e, Fraction(0)) + frac
        total += frac
    if total > 1:
        raise ModelError("RowMassExceedsOne",
                         f"{gname}: row mass {total} exceeds one")
    return {e: w for e, w in out.items() if w}


def dump_model(model: Model) -> str:
    """Canonical JSON for a model (the fmt fixed point)."""
    doc: dict = {"types": {ty: list(model.carriers[ty])
                           for ty in sorted(model.carriers)}}
    gens: dict = {}
    for gname in sorted(model.signature.generators):
        decl = model.signature.generators[gname]
        g: dict = {"inputs": list(decl.inputs),
                   "branches": [list(b) for b in decl.branches]}
        tables: dict = {}
        for backend in sorted(model.tables):
            if gname not in model.tables[backend]:
                continue
            m = model.tables[backend][gname]
            rows = []
            for x in m.dom.elems:
                row = m.rows[x]
                if backend == "par":
                    if row is None:
                        continue  # absent input = undefined
                    enc = [row[0], list(row[1])]
                elif backend == "rel":
                    if not row:
                        continue  # absent input = empty row
                    enc = [[i, list(y)] for (i, y) in sorted(row)]
                else:
                    if not row:
                        continue
                    enc = [[i, list(y), str(w)] for (i, y), w in sorted(row.items())]
                rows.append([list(x), enc])
            tables[backend] = rows
        g["tables"] = tables
        gens[gname] = g
    doc["generators"] = gens
    if model.signature.generator_order:
        doc["order"] = sorted([list(p) for p in model.signature.generator_order])
    if model.default_context:
        doc["context"] = [[x, ty] for x, ty in model.default_context]
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Triple files


@dataclass(frozen=True)
class TripleDoc:
    """Raw pieces of a triple file; assembly happens in the logics layer."""
    shape: str
    pre: str
    post: str
    cmd: str
    model: Model
    backend: str
    context: tuple[tuple[str, str], ...]
    cmd2: Optional[str] = None
    context2: Optional[tuple[tuple[str, str], ...]] = None
    coupling: Optional[dict] = None

    @property
    def relational(self) -> bool:
        return self.shape.startswith("rel-")


TRIPLE_SHAPES = (
    "state-correct", "pred-correct", "assert-correct",
    "state-incorrect", "pred-incorrect", "assert-incorrect",
)
REL_TRIPLE_SHAPES = tuple("rel-" + s for s in TRIPLE_SHAPES)


def load_triple(source: Union[str, dict], base_dir: Optional[Path] = None) -> TripleDoc:
    doc = json.loads(source) if isinstance(source, str) else source
    if not isinstance(doc, dict):
        raise ModelError("BadTriple", "triple file must be a JSON object")
    shape = doc.get("shape")
    if shape not in TRIPLE_SHAPES + REL_TRIPLE_SHAPES:
        raise ModelError("BadTriple", f"unknown triple shape {shape!r}")
    for key in ("pre", "post", "cmd", "backend", "model"):
        if key not in doc:
            raise ModelError("BadTriple", f"triple file lacks {key!r}")
    if doc["backend"] not in BACKENDS:
        raise ModelError("UnknownBackend", f"unknown backend {doc['backend']!r}")
    m = doc["model"]
    if isinstance(m, str):
        p = Path(m)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        model = parse_model(p.read_text(encoding="utf-8"), name=p.stem)
    else:
        model = parse_model(m, name="inline")
    ctx = tuple((x, ty) for x, ty in doc.get("context", model.default_context))
    if not ctx:
        raise ModelError("BadTriple", "no context declared (triple or model)")
    ctx2 = doc.get("context2")
    if ctx2 is not None:
        ctx2 = tuple((x, ty) for x, ty in ctx2)
    rel = shape in REL_TRIPLE_SHAPES
    if rel and "cmd2" not in doc:
        raise ModelError("BadTriple", "relational triple needs cmd2")
    return TripleDoc(shape=shape, pre=doc["pre"], post=doc["post"],
                     cmd=doc["cmd"], model=model, backend=doc["backend"],
                     context=ctx, cmd2=doc.get("cmd2"), context2=ctx2,
                     coupling=doc.get("coupling"))
