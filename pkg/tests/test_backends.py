import random
from fractions import Fraction

import pytest

from impcat.backends import (UNIT, Obj, ShapeError, basic_obj, eval_term,
                             m_assert, m_branch, m_ifelse, m_seq, m_while,
                             product, sum_obj)
from impcat.gen import random_model, random_morphism, random_term
from impcat.kernel import gen, loop, ret, subst_label, typecheck, unfold_loop
from impcat.models import BACKENDS

B = basic_obj(["0", "1"])
T = basic_obj(["0", "1", "2"])
ALL = ["rel", "par", "stoch"]


class TestContract:
    @pytest.mark.parametrize("backend", ALL)
    def test_compose_unitality(self, backend):
        rng = random.Random(1)
        cls = BACKENDS[backend]
        for _ in range(20):
            f = random_morphism(cls, rng, B, [T, B])
            assert cls.identity(B).compose(0, f).equal(f)
            g = f.compose(0, cls.identity(T)).compose(1, cls.identity(B))
            assert g.equal(f)

    @pytest.mark.parametrize("backend", ALL)
    def test_coaction_identity(self, backend):
        rng = random.Random(2)
        cls = BACKENDS[backend]
        f = random_morphism(cls, rng, B, [T, B])
        assert f.coaction([0, 1], [T, B]).equal(f)

    @pytest.mark.parametrize("backend", ALL)
    def test_coaction_composes(self, backend):
        # f . sigma* . tau* = f . (sigma o tau)*  (acting on branch tags)
        rng = random.Random(3)
        cls = BACKENDS[backend]
        f = random_morphism(cls, rng, B, [B, B])
        sigma = [1, 0]
        tau = [1, 1]
        lhs = f.coaction(sigma, [B, B]).coaction(tau, [B, B])
        composed = [tau[s] for s in sigma]
        rhs = f.coaction(composed, [B, B])
        assert lhs.equal(rhs)

    @pytest.mark.parametrize("backend", ALL)
    def test_inject_then_case(self, backend):
        cls = BACKENDS[backend]
        objs = [B, T]
        for i in range(2):
            inj = cls.inject(i, objs)
            case = cls.case_split(objs)
            comp = inj.compose(0, case)
            # equals the identity on the i-th summand, injected into branch i
            ident = cls.identity(objs[i]).coaction([i], objs)
            assert comp.equal(ident)

    @pytest.mark.parametrize("backend", ALL)
    def test_case_then_inject(self, backend):
        cls = BACKENDS[backend]
        objs = [B, T]
        case = cls.case_split(objs)
        injected = case.compose(1, cls.inject(1, objs)).compose(0, cls.inject(0, objs))
        merged = injected.merge_branches()
        assert merged.equal(cls.identity(sum_obj(objs)))

    @pytest.mark.parametrize("backend", ALL)
    def test_tensor_interchange(self, backend):
        # commutative backends: (f (x) id);(id (x) g) = (id (x) g);(f (x) id)
        rng = random.Random(4)
        cls = BACKENDS[backend]
        for _ in range(15):
            f = random_morphism(cls, rng, B, [T])
            g = random_morphism(cls, rng, T, [B])
            lhs = f.tensor(cls.identity(T)).then(cls.identity(T).tensor(g))
            rhs = cls.identity(B).tensor(g).then(f.tensor(cls.identity(B)))
            assert lhs.equal(rhs)

    @pytest.mark.parametrize("backend", ALL)
    def test_zero_annihilates(self, backend):
        rng = random.Random(5)
        cls = BACKENDS[backend]
        f = random_morphism(cls, rng, B, [T])
        z = cls.zero(T, (B,))
        assert f.then(z).equal(cls.zero(B, (B,)))

    @pytest.mark.parametrize("backend", ALL)
    def test_codiagonal_total_deterministic(self, backend):
        # structure morphisms of coproducts are total and deterministic
        cls = BACKENDS[backend]
        mu = cls.case_split([B, B]).merge_branches()
        assert mu.is_total() and mu.is_deterministic()
        zeta = cls.zero(Obj((), tuple_like=False), (B,))
        assert zeta.is_total() and zeta.is_deterministic()

    @pytest.mark.parametrize("backend", ALL)
    def test_injections_total_deterministic(self, backend):
        cls = BACKENDS[backend]
        for i in range(2):
            inj = cls.inject(i, [B, T])
            assert inj.is_total() and inj.is_deterministic()

    @pytest.mark.parametrize("backend", ALL)
    def test_order_compatibility(self, backend):
        # composition, tensor and coaction are monotone in all arguments
        rng = random.Random(6)
        cls = BACKENDS[backend]
        from impcat.gen import random_sub_morphism
        for _ in range(20):
            f = random_morphism(cls, rng, B, [T, B])
            g = random_morphism(cls, rng, T, [B])
            f2 = random_sub_morphism(f, rng)
            g2 = random_sub_morphism(g, rng)
            assert f2.compose(0, g2).leq(f.compose(0, g))
            assert f2.tensor(g2).leq(f.tensor(g))
            assert f2.coaction([1, 0], [B, T]).leq(f.coaction([1, 0], [B, T]))

    @pytest.mark.parametrize("backend", ALL)
    def test_fix_monotone(self, backend):
        rng = random.Random(7)
        cls = BACKENDS[backend]
        from impcat.gen import random_sub_morphism
        for _ in range(20):
            f = random_morphism(cls, rng, B, [B, T])
            f2 = random_sub_morphism(f, rng)
            assert f2.fix().leq(f.fix())


class TestEval:
    def test_return_identity(self, bool_model):
        ctx = (("x", "Bool"),)
        idx = (("a", ("Bool",)),)
        for backend in ALL:
            m = eval_term(ret("a", "x"), ctx, idx, bool_model, backend)
            cls = BACKENDS[backend]
            assert m.equal(cls.identity(bool_model.carrier_obj("Bool")))

    def test_return_discard_and_copy(self, bool_model):
        ctx = (("x", "Bool"), ("y", "Bool"))
        idx = (("a", ("Bool", "Bool", "Bool")),)
        m = eval_term(ret("a", "y", "y", "x"), ctx, idx, bool_model, "par")
        assert m.rows[(("0",) + ("1",))] == (0, ("1", "1", "0"))

    def test_generator_negation_then_exit(self, bool_model):
        ctx = (("x", "Bool"),)
        idx = (("a", ("Bool",)),)
        t = gen("f", ["x"], (["u"], ret("a", "u")))
        for backend in ALL:
            m = eval_term(t, ctx, idx, bool_model, backend)
            tbl = bool_model.table(backend, "f")
            assert m.equal(tbl)

    def test_generator_sees_ambient(self, bool_model):
        # branch continuation may mention the generator's own input
        ctx = (("x", "Bool"),)
        idx = (("a", ("Bool", "Bool")),)
        t = gen("f", ["x"], (["u"], ret("a", "u", "x")))
        m = eval_term(t, ctx, idx, bool_model, "par")
        assert m.rows[("0",)] == (0, ("1", "0"))
        assert m.rows[("1",)] == (0, ("0", "1"))

    def test_loop_while_skeleton_matches_direct_construction(self, bool_model):
        # loop a(x){u. w(u){v. a(v)}{ e(u) }}: run the worker until it stops
        t = loop("a", ["x"], ["u"],
                 gen("w", ["u"], (["v"], ret("a", "v")), ([], ret("e", "u"))))
        ctx = (("x", "Bool"),)
        idx = (("e", ("Bool",)),)
        for backend in ALL:
            cls = BACKENDS[backend]
            got = eval_term(t, ctx, idx, bool_model, backend)
            # oracle: body as a backend morphism, then the backend fix
            w = bool_model.table(backend, "w")
            Bo = bool_model.carrier_obj("Bool")
            body_rows = {}
            for x in Bo.elems:
                def step(entry, x=x):
                    i, y = entry
                    if i == 0:
                        return cls.row_unit((0, y))
                    return cls.row_unit((1, x))
                body_rows[x] = cls.row_bind(w.rows[x], step)
            body = cls(Bo, (Bo, Bo), body_rows)
            assert got.equal(body.fix())

    def test_loop_ambient_context_frozen(self, bool_model):
        # the ambient variable y stays at its entry value across iterations
        t = loop("a", ["x"], ["u"],
                 gen("w", ["u"], (["v"], ret("a", "v")), ([], ret("e", "u", "y"))))
        ctx = (("x", "Bool"), ("y", "Bool"))
        idx = (("e", ("Bool", "Bool")),)
        m = eval_term(t, ctx, idx, bool_model, "par")
        assert m.rows[("0", "1")] == (0, ("1", "1"))
        assert m.rows[("0", "0")] == (0, ("1", "0"))

    def test_eval_respects_cut(self, bool_model):
        rng = random.Random(8)
        ctx = (("x", "Bool"),)
        idx = (("a", ("Bool",)), ("c", ()))
        sig = bool_model.signature
        for i in range(40):
            p = random_term(rng, ctx, idx, sig, depth=2)
            q = random_term(rng, (("y", "Bool"),), (("d", ("Bool",)),), sig, depth=2)
            from impcat.kernel import cut, infer_index
            pc = cut(p, "a", ["y"], q)
            for backend in ALL:
                mp = eval_term(p, ctx, idx, bool_model, backend)
                mq = eval_term(q, (("y", "Bool"),), (("d", ("Bool",)),),
                               bool_model, backend)
                lhs = eval_term(pc, ctx, (("d", ("Bool",)), ("c", ())),
                                bool_model, backend)
                rhs = mp.compose(0, mq)
                assert lhs.equal(rhs)

    def test_eval_fixpoint_unfolding(self, bool_model):
        # loop == its one-step unfolding, semantically, in every backend
        t = loop("a", ["x"], ["u"],
                 gen("w", ["u"], (["v"], ret("a", "v")), ([], ret("e", "u"))))
        ctx = (("x", "Bool"),)
        idx = (("e", ("Bool",)),)
        u = unfold_loop(t)
        typecheck(u, ctx, idx, bool_model.signature)
        for backend in ALL:
            assert eval_term(t, ctx, idx, bool_model, backend).equal(
                eval_term(u, ctx, idx, bool_model, backend))

    def test_missing_interpretation(self, bool_model):
        from impcat.backends import MissingInterpretation
        bad = {"rel": {}, "par": {}, "stoch": {}}
        import dataclasses
        m2 = dataclasses.replace(bool_model, tables=bad)
        with pytest.raises(MissingInterpretation):
            eval_term(gen("f", ["x"], (["u"], ret("a", "u"))),
                      (("x", "Bool"),), (("a", ("Bool",)),), m2, "rel")


class TestDirectSemantics:
    @pytest.mark.parametrize("backend", ALL)
    def test_while_guard_false_is_skip(self, bool_model, backend):
        cls = BACKENDS[backend]
        Bo = bool_model.carrier_obj("Bool")
        # guard always false (second branch): while never runs
        b_false = cls(Bo, (UNIT, UNIT), {x: cls.row_unit((1, ())) for x in Bo.elems})
        c = bool_model.table(backend, "f")
        w = m_while(b_false, c)
        assert w.equal(cls.identity(Bo))

    @pytest.mark.parametrize("backend", ALL)
    def test_while_b_f_terminates(self, bool_model, backend):
        # guard b: 0 -> run, 1 -> stop; body f: negation. From 0: one step.
        cls = BACKENDS[backend]
        b = bool_model.table(backend, "b")
        f = bool_model.table(backend, "f")
        w = m_while(b, f)
        assert w.rows[("1",)] == cls.row_unit((0, ("1",)))
        assert w.rows[("0",)] == cls.row_unit((0, ("1",)))

    @pytest.mark.parametrize("backend", ALL)
    def test_assert_weights(self, bool_model, backend):
        cls = BACKENDS[backend]
        Bo = bool_model.carrier_obj("Bool")
        # predicate true exactly at 0
        p = cls(Bo, (UNIT,), {("0",): cls.row_unit((0, ())), ("1",): cls.row_zero()})
        a = m_assert(p)
        assert a.rows[("0",)] == cls.row_unit((0, ("0",)))
        assert a.rows[("1",)] == cls.row_zero()


class TestRandomModelSanity:
    def test_random_model_tables_validate(self):
        rng = random.Random(42)
        for seed in range(5):
            m = random_model(random.Random(seed))
            for backend in ALL:
                for name in m.signature.generators:
                    m.table(backend, name).validate()
            # flavor guarantees
            for backend in ALL:
                assert m.table(backend, "gd0").is_total()
                assert m.table(backend, "gd0").is_deterministic()
                assert m.table(backend, "gt0").is_total()
                assert m.table(backend, "gc").is_central_constant()
                assert m.table(backend, "st0").is_total()
