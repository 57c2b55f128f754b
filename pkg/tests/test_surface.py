import json

import pytest

from impcat import surface as sf
from impcat.combinators import (Elaborator, elaborate_command, elaborate_guard,
                                elaborate_pred, elaborate_state)
from impcat.kernel import Gen, Loop, Return, alpha_eq
from impcat.surface import (Diagnostic, ModelError, ParseError, parse_guard,
                            parse_model, parse_pred, parse_program, parse_state,
                            parse_term, print_guard, print_pred, print_program,
                            print_state, print_term)


class TestParseTerm:
    def test_return(self):
        assert parse_term("a(x, y)") == Return("a", ("x", "y"))

    def test_generator(self):
        t = parse_term("f(x){u. a(u)}{v. b(v)}")
        assert t == Gen("f", ("x",),
                        ((("u",), Return("a", ("u",))),
                         (("v",), Return("b", ("v",)))))

    def test_loop(self):
        t = parse_term("loop a(x){u. a(u)}")
        assert t == Loop("a", ("x",), ("u",), Return("a", ("u",)))

    def test_empty_binders(self):
        t = parse_term("b(x){a1()}{a2()}")
        assert t == Gen("b", ("x",), (((), Return("a1", ())),
                                      ((), Return("a2", ()))))
        t2 = parse_term("b(x){. a1()}{. a2()}")
        assert t2 == t

    def test_nullary_loop(self):
        assert parse_term("loop w(){w()}") == Loop("w", (), (), Return("w", ()))

    def test_syntax_error_has_span(self):
        text = "loop a(x){u. }"
        with pytest.raises(ParseError) as e:
            parse_term(text)
        lo, hi = e.value.diagnostic.span
        assert 0 <= lo <= hi <= len(text)

    def test_roundtrip(self):
        for s in ["a(x, y)", "f(x){u. a(u)}{v. b(v)}", "loop a(x){u. a(u)}",
                  "g(x, y){u. loop c(u){w. f(w){z. c(z)}}}",
                  "b(x){a1()}{a2()}"]:
            t = parse_term(s)
            assert alpha_eq(parse_term(print_term(t)), t)


class TestParseProgram:
    def test_while(self):
        p = parse_program("while b(x) do x := c(x, y)")
        assert isinstance(p, sf.WhileCmd)
        assert p.guard == sf.GCall("b", ("x",))
        assert p.body == sf.GenAssign(("x",), "c", ("x", "y"))

    def test_skip(self):
        assert parse_program("skip") == sf.Skip()

    def test_gen_assign_then_assert(self):
        p = parse_program("x := f(y); assert top")
        assert p == sf.Seq(sf.GenAssign(("x",), "f", ("y",)),
                           sf.AssertCmd(sf.PTop()))

    def test_var_assign_multi(self):
        p = parse_program("x, y := y, x")
        assert p == sf.VarAssign(("x", "y"), ("y", "x"))

    def test_sample(self):
        p = parse_program("x <- sm0()")
        assert p == sf.Sample("x", sf.ECall("sm0", ()))

    def test_if_needs_else(self):
        with pytest.raises(ParseError):
            parse_program("if b(x) then skip")

    def test_choice(self):
        p = parse_program("skip +[cg()] abort")
        assert p == sf.CmdChoice(sf.Skip(), sf.GCall("cg", ()), sf.Abort())

    def test_nested_with_parens(self):
        p = parse_program("while gd0(x0) do (x0 := ed0(x0); skip)")
        assert isinstance(p, sf.WhileCmd)
        assert isinstance(p.body, sf.Seq)

    def test_guard_operators(self):
        g = parse_guard("not gd0(x) and (gt0(y) or L)")
        assert g == sf.GAnd(sf.GNot(sf.GCall("gd0", ("x",))),
                            sf.GOr(sf.GCall("gt0", ("y",)), sf.GL()))

    def test_pred_forms(self):
        p = parse_pred("gd0(x)# and top +[g0(y)] bot[x \\ ed0(y)]")
        assert isinstance(p, sf.PCond)
        assert p.left == sf.PAnd(sf.PLift(sf.GCall("gd0", ("x",))), sf.PTop())
        assert p.right == sf.PSubst(sf.PBot(), "x", sf.ECall("ed0", ("y",)))

    def test_state_forms(self):
        s = parse_state("st0() |> top +[cg()] st1()(x \\ y)[x <- sm0()]")
        assert isinstance(s, sf.SChoice)
        assert isinstance(s.left, sf.SObserve)
        assert isinstance(s.right, sf.SMute)
        assert isinstance(s.right.state, sf.SCosubst)


class TestPrintRoundTrips:
    def test_program_roundtrip(self):
        for s in ["skip", "abort", "x := y", "x, y := y, x", "x := f(y)",
                  "x <- sm0()", "skip; abort; x := y",
                  "if gd0(x) then skip else (x := y; skip)",
                  "while not gd0(x) and gt0(y) do x := ed0(x)",
                  "assert gd0(x)# and top", "skip +[cg()] abort",
                  "assert top +[g0(x)] bot"]:
            p = parse_program(s)
            assert parse_program(print_program(p)) == p
            # printing is a fixed point (fmt idempotence)
            assert print_program(parse_program(print_program(p))) == print_program(p)

    def test_guard_pred_state_roundtrip(self):
        for s in ["L", "R", "not L", "gd0(x) and gt0(y) or g0(x)",
                  "not (gd0(x) or L)"]:
            g = parse_guard(s)
            assert parse_guard(print_guard(g)) == g
        for s in ["top", "bot", "gd0(x)#", "(gd0(x) and L)#",
                  "top and bot +[gd0(x)] top", "top[x \\ e0(y)]"]:
            p = parse_pred(s)
            assert parse_pred(print_pred(p)) == p
        for s in ["bot", "st0()", "st0() |> top", "st0() +[cg()] st1()",
                  "st0()(x \\ y)", "st0()[x <- sm0()]"]:
            st = parse_state(s)
            assert parse_state(print_state(st)) == st


COIN_MODEL = {
    "types": {"Bool": ["0", "1"]},
    "generators": {
        "coin": {"inputs": [], "branches": [[], []],
                 "tables": {"stoch": [[[], [[0, [], "1/2"], [1, [], "1/2"]]]]}},
        "b": {"inputs": ["Bool"], "branches": [[], []],
              "tables": {"rel": [[["0"], [[0, []]]], [["1"], [[1, []]]]]}},
    },
    "context": [["x", "Bool"]],
}


class TestModelFiles:
    def test_fair_coin_accepted(self):
        m = parse_model(json.dumps(COIN_MODEL))
        t = m.table("stoch", "coin")
        from fractions import Fraction
        assert t.rows[()] == {(0, ()): Fraction(1, 2), (1, ()): Fraction(1, 2)}

    def test_row_mass_exceeds_one(self):
        doc = json.loads(json.dumps(COIN_MODEL))
        doc["generators"]["coin"]["tables"]["stoch"] = \
            [[[], [[0, [], "2/3"], [1, [], "2/3"]]]]
        with pytest.raises(ModelError) as e:
            parse_model(doc)
        assert e.value.kind == "RowMassExceedsOne"

    def test_decimal_rejected(self):
        doc = json.loads(json.dumps(COIN_MODEL))
        doc["generators"]["coin"]["tables"]["stoch"] = [[[], [[0, [], "0.5"]]]]
        with pytest.raises(ModelError) as e:
            parse_model(doc)
        assert e.value.kind == "NonRational"

    def test_rel_guard_det_total(self):
        m = parse_model(json.dumps(COIN_MODEL))
        b = m.table("rel", "b")
        assert b.is_total() and b.is_deterministic()

    def test_arity_mismatch(self):
        doc = json.loads(json.dumps(COIN_MODEL))
        doc["generators"]["b"]["tables"]["rel"] = [[["0", "1"], [[0, []]]]]
        with pytest.raises(ModelError) as e:
            parse_model(doc)
        assert e.value.kind == "ArityMismatch"

    def test_unknown_type(self):
        doc = json.loads(json.dumps(COIN_MODEL))
        doc["generators"]["bad"] = {"inputs": ["Nope"], "branches": [],
                                    "tables": {}}
        with pytest.raises(ModelError) as e:
            parse_model(doc)
        assert e.value.kind == "UnknownType"

    def test_dump_parse_fixed_point(self):
        from impcat.surface import dump_model
        m = parse_model(json.dumps(COIN_MODEL))
        text = dump_model(m)
        m2 = parse_model(text)
        assert dump_model(m2) == text


class TestElaborationOfSurface:
    def test_program_elaborates_and_typechecks(self, bool_model):
        elab = Elaborator(state=bool_model.default_context)
        # use generators from the bool model: b guard, f expr, st state atom
        p = parse_program("if b(x) then x := f(x) else skip; assert b(x)#")
        t = elaborate_command(p, elab)
        elab.check_command(t, bool_model.signature)

    def test_while_elaboration_evaluates(self, bool_model):
        elab = Elaborator(state=bool_model.default_context)
        p = parse_program("while b(x) do x := f(x)")
        t = elaborate_command(p, elab)
        from impcat.backends import eval_term
        m = eval_term(t, elab.state, elab.psi, bool_model, "par")
        # b: 0 -> first branch (loop), so from 0 run f once: 0 -> 1, stop
        assert m.rows[("0",)] == (0, ("1",))
        assert m.rows[("1",)] == (0, ("1",))

    def test_state_elaborates(self, bool_model):
        elab = Elaborator(state=bool_model.default_context)
        s = parse_state("st() |> b(x)#")
        t = elaborate_state(s, elab)
        elab.check_state(t, bool_model.signature)
