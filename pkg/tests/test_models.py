import random
from fractions import Fraction

import pytest

from impcat.backends import Obj, UNIT, basic_obj, product, sum_obj
from impcat.models import BACKENDS, ParMorphism, RelMorphism, StochMorphism
from impcat.gen import random_morphism

B2 = basic_obj(["0", "1"])
B3 = basic_obj(["0", "1", "2"])


def rel(dom, cods, pairs):
    rows = {x: frozenset() for x in dom.elems}
    for x, e in pairs:
        rows[x] = rows[x] | {e}
    return RelMorphism(dom, tuple(cods), rows)


def par(dom, cods, mapping):
    rows = {x: mapping.get(x) for x in dom.elems}
    return ParMorphism(dom, tuple(cods), rows)


def stoch(dom, cods, mapping):
    rows = {x: dict(mapping.get(x, {})) for x in dom.elems}
    return StochMorphism(dom, tuple(cods), rows)


class TestRelFix:
    def test_no_loop_part(self):
        f = rel(B2, [B2, B2], [(("0",), (1, ("1",))), (("1",), (1, ("0",)))])
        tr = f.fix()
        assert tr.rows[("0",)] == {(0, ("1",))}
        assert tr.rows[("1",)] == {(0, ("0",))}

    def test_pure_divergence(self):
        f = rel(B2, [B2, B2], [(("0",), (0, ("0",))), (("1",), (0, ("1",)))])
        tr = f.fix()
        assert tr.rows[("0",)] == frozenset()
        assert tr.rows[("1",)] == frozenset()

    def test_path_reachability_oracle(self):
        # loop {(0,1)}, exit {(1,y)}: both 0 and 1 reach y
        f = rel(B2, [B2, B2], [(("0",), (0, ("1",))), (("1",), (1, ("1",)))])
        tr = f.fix()
        assert (0, ("1",)) in tr.rows[("0",)]
        assert (0, ("1",)) in tr.rows[("1",)]

    def test_iteration_equals_reachability(self):
        rng = random.Random(7)
        W = product([B3, B3])
        for _ in range(50):
            f = random_morphism(RelMorphism, rng, W, [W, B2, B3])
            small = f.fix()
            # force the reachability route by faking the size switch
            direct = {x: frozenset((i - 1, y) for (i, y) in f.rows[x] if i > 0)
                      for x in W.elems}
            succ = {x: frozenset(y for (i, y) in f.rows[x] if i == 0)
                    for x in W.elems}
            for x in W.elems:
                seen, stack = {x}, [x]
                while stack:
                    z = stack.pop()
                    for y in succ[z]:
                        if y not in seen:
                            seen.add(y)
                            stack.append(y)
                expect = frozenset(e for z in seen for e in direct[z])
                assert small.rows[x] == expect


class TestParFix:
    def test_exit_everywhere(self):
        f = par(B2, [B2, B2], {("0",): (1, ("1",)), ("1",): (1, ("1",))})
        tr = f.fix()
        assert tr.rows[("0",)] == (0, ("1",))

    def test_cycle_undefined(self):
        f = par(B2, [B2, B2], {("0",): (0, ("0",)), ("1",): (0, ("0",))})
        tr = f.fix()
        assert tr.rows[("0",)] is None
        assert tr.rows[("1",)] is None

    def test_chain_step_count_oracle(self):
        # 0 -> 1 -> exit a: result in exactly 2 iterations
        f = par(B2, [B2, B2], {("0",): (0, ("1",)), ("1",): (1, ("0",))})
        tr = f.fix()
        assert tr.rows[("0",)] == (0, ("0",))
        # independent step-count oracle
        z, steps = ("0",), 0
        while True:
            row = f.rows[z]
            steps += 1
            if row[0] == 1:
                break
            z = row[1]
        assert steps == 2

    def test_undefined_propagates(self):
        f = par(B2, [B2, B2], {("0",): (0, ("1",)), ("1",): None})
        assert f.fix().rows[("0",)] is None


class TestStochFix:
    def test_exit_only(self):
        f = stoch(B2, [B2, B2], {("0",): {(1, ("1",)): Fraction(1, 2)}})
        tr = f.fix()
        assert tr.rows[("0",)] == {(0, ("1",)): Fraction(1, 2)}
        assert tr.rows[("1",)] == {}

    def test_sure_self_loop_is_zero(self):
        f = stoch(B2, [B2, B2], {("0",): {(0, ("0",)): Fraction(1)}})
        assert f.fix().rows[("0",)] == {}

    def test_geometric_third(self):
        # 1/3 exit, 1/3 loop in place, 1/3 vanish: mass (1/3)/(1-1/3) = 1/2
        f = stoch(B2, [B2, B2], {("0",): {(0, ("0",)): Fraction(1, 3),
                                          (1, ("1",)): Fraction(1, 3)}})
        tr = f.fix()
        assert tr.rows[("0",)] == {(0, ("1",)): Fraction(1, 2)}
        # truncated series agrees in the limit
        trunc = f.fix_kleene(64)
        diff = tr.rows[("0",)][(0, ("1",))] - trunc.rows[("0",)].get((0, ("1",)), 0)
        assert 0 <= diff < Fraction(1, 2 ** 60)

    def test_fair_coin_exit_total(self):
        # exits with 1/2, loops with 1/2: total mass 1
        f = stoch(B2, [B2, B2], {("0",): {(0, ("0",)): Fraction(1, 2),
                                          (1, ("0",)): Fraction(1, 2)},
                                 ("1",): {(1, ("1",)): Fraction(1)}})
        tr = f.fix()
        assert sum(tr.rows[("0",)].values()) == 1
        trunc = f.fix_kleene(64)
        for e, w in tr.rows[("0",)].items():
            assert 0 <= w - trunc.rows[("0",)].get(e, 0) <= Fraction(1, 2 ** 60)

    def test_dominates_truncations(self):
        rng = random.Random(3)
        for _ in range(30):
            f = random_morphism(StochMorphism, rng, B3, [B3, B2])
            exact = f.fix()
            prev = None
            for depth in (1, 4, 16, 64):
                trunc = f.fix_kleene(depth)
                assert trunc.leq(exact)
                if prev is not None:
                    assert prev.leq(trunc)  # monotone from below
                prev = trunc


class TestOrder:
    @pytest.mark.parametrize("backend", ["rel", "par", "stoch"])
    def test_zero_least(self, backend):
        rng = random.Random(11)
        cls = BACKENDS[backend]
        for _ in range(25):
            f = random_morphism(cls, rng, B3, [B2, B3])
            assert cls.zero(B3, (B2, B3)).leq(f)

    def test_rel_inclusion(self):
        f = rel(B2, [B2], [(("0",), (0, ("0",)))])
        g = rel(B2, [B2], [(("0",), (0, ("0",))), (("0",), (0, ("1",)))])
        assert f.leq(g) and not g.leq(f)

    def test_stoch_pointwise(self):
        f = stoch(UNIT, [UNIT], {(): {(0, ()): Fraction(1, 4)}})
        g = stoch(UNIT, [UNIT], {(): {(0, ()): Fraction(1, 3)}})
        assert f.leq(g) and not g.leq(f)

    def test_par_definedness(self):
        f = par(B2, [B2], {("0",): (0, ("1",))})
        g = par(B2, [B2], {("0",): (0, ("1",)), ("1",): (0, ("1",))})
        assert f.leq(g) and not g.leq(f)
        h = par(B2, [B2], {("0",): (0, ("0",))})
        assert not f.leq(h)

    @pytest.mark.parametrize("backend", ["rel", "par", "stoch"])
    def test_discard_top_to_unit(self, backend):
        rng = random.Random(13)
        cls = BACKENDS[backend]
        eps = cls.discard(B3)
        for _ in range(25):
            f = random_morphism(cls, rng, B3, [UNIT])
            assert f.leq(eps)

    def test_leq_witness(self):
        f = rel(B2, [B2], [(("0",), (0, ("1",)))])
        g = rel(B2, [B2], [])
        w = f.leq_witness(g)
        assert w == (("0",), (0, ("1",)))
        assert g.leq_witness(f) is None


class TestClassification:
    def test_identity_total_det(self):
        for cls in BACKENDS.values():
            i = cls.identity(B3)
            assert i.is_total() and i.is_deterministic()

    def test_rel_fork_total_not_det(self):
        # guard {(0,L),(0,R)}: total, not deterministic
        b = rel(B2, [UNIT, UNIT],
                [(("0",), (0, ())), (("0",), (1, ())),
                 (("1",), (0, ()))])
        assert b.is_total()
        assert not b.is_deterministic()

    def test_rel_det_total_guard(self):
        b = rel(B2, [UNIT, UNIT], [(("0",), (0, ())), (("1",), (1, ()))])
        assert b.is_total() and b.is_deterministic()

    def test_stoch_coin_total_not_det(self):
        coin = stoch(UNIT, [UNIT, UNIT],
                     {(): {(0, ()): Fraction(1, 2), (1, ()): Fraction(1, 2)}})
        assert coin.is_total()
        assert not coin.is_deterministic()

    def test_partial_incl_not_total(self):
        # partial inclusion-style relation: empty row somewhere
        sub = rel(B2, [B2], [(("0",), (0, ("0",))), (("0",), (0, ("1",)))])
        assert not sub.is_total()

    def test_constant(self):
        b = stoch(B2, [UNIT, UNIT],
                  {("0",): {(0, ()): Fraction(1, 2), (1, ()): Fraction(1, 2)},
                   ("1",): {(0, ()): Fraction(1, 2), (1, ()): Fraction(1, 2)}})
        assert b.is_central_constant()
        b2 = stoch(B2, [UNIT, UNIT],
                   {("0",): {(0, ()): Fraction(1)}, ("1",): {(1, ()): Fraction(1)}})
        assert not b2.is_central_constant()

    def test_par_always_det(self):
        rng = random.Random(5)
        for _ in range(20):
            f = random_morphism(ParMorphism, rng, B3, [B2, B2])
            assert f.is_deterministic()


class TestValidation:
    def test_stoch_mass_cap(self):
        from impcat.backends import ShapeError
        m = stoch(UNIT, [UNIT, UNIT],
                  {(): {(0, ()): Fraction(2, 3), (1, ()): Fraction(2, 3)}})
        with pytest.raises(ShapeError):
            m.validate()

    def test_par_single_output(self):
        from impcat.backends import ShapeError
        with pytest.raises(ShapeError):
            ParMorphism.row_add([(0, ("0",)), (1, ("0",))])

    def test_carrier_cap(self):
        from impcat.backends import MAX_CARRIER, CarrierLimitError
        big = basic_obj([str(i) for i in range(9)])
        with pytest.raises(CarrierLimitError):
            product([big, big], limit=MAX_CARRIER)
