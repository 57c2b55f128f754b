from fractions import Fraction

import pytest

from impcat.kernel import GeneratorDecl, Signature
from impcat.models import Model, ParMorphism, RelMorphism, StochMorphism


def _rel(dom, cods, pairs):
    rows = {x: frozenset() for x in dom.elems}
    for x, e in pairs:
        rows[x] = rows[x] | {e}
    return RelMorphism(dom, tuple(cods), rows)


def _par(dom, cods, mapping):
    return ParMorphism(dom, tuple(cods), {x: mapping.get(x) for x in dom.elems})


def _stoch(dom, cods, mapping):
    return StochMorphism(dom, tuple(cods),
                         {x: dict(mapping.get(x, {})) for x in dom.elems})


def make_bool_model() -> Model:
    """Hand-written model over Bool = {0, 1}.

    coin: fair coin (rel: both branches; par: left).
    b:    deterministic total guard, 0 -> first branch, 1 -> second.
    f:    negation (total, deterministic).
    p:    identity undefined at 1 (partial).
    any:  rel: both outputs; par: identity; stoch: uniform.
    w:    two-branch worker: continue with negation at 0, stop at 1.
    st:   state atom producing 0 (total).
    """
    sig = Signature(types=frozenset({"Bool"}), generators={
        "coin": GeneratorDecl("coin", (), ((), ())),
        "b": GeneratorDecl("b", ("Bool",), ((), ())),
        "f": GeneratorDecl("f", ("Bool",), (("Bool",),)),
        "p": GeneratorDecl("p", ("Bool",), (("Bool",),)),
        "any": GeneratorDecl("any", ("Bool",), (("Bool",),)),
        "w": GeneratorDecl("w", ("Bool",), (("Bool",), ())),
        "st": GeneratorDecl("st", (), (("Bool",),)),
    })
    m = Model(signature=sig, carriers={"Bool": ("0", "1")},
              default_context=(("x", "Bool"),), name="bool")
    B = m.carrier_obj("Bool")
    U = m.gen_dom("coin")  # unit

    z, o = ("0",), ("1",)
    half = Fraction(1, 2)

    m.set_table("rel", "coin", _rel(U, m.gen_cods("coin"),
                                    [((), (0, ())), ((), (1, ()))]))
    m.set_table("par", "coin", _par(U, m.gen_cods("coin"), {(): (0, ())}))
    m.set_table("stoch", "coin", _stoch(U, m.gen_cods("coin"),
                                        {(): {(0, ()): half, (1, ()): half}}))

    m.set_table("rel", "b", _rel(B, m.gen_cods("b"), [(z, (0, ())), (o, (1, ()))]))
    m.set_table("par", "b", _par(B, m.gen_cods("b"), {z: (0, ()), o: (1, ())}))
    m.set_table("stoch", "b", _stoch(B, m.gen_cods("b"),
                                     {z: {(0, ()): 1}, o: {(1, ()): 1}}))

    m.set_table("rel", "f", _rel(B, m.gen_cods("f"), [(z, (0, o)), (o, (0, z))]))
    m.set_table("par", "f", _par(B, m.gen_cods("f"), {z: (0, o), o: (0, z)}))
    m.set_table("stoch", "f", _stoch(B, m.gen_cods("f"),
                                     {z: {(0, o): 1}, o: {(0, z): 1}}))

    m.set_table("rel", "p", _rel(B, m.gen_cods("p"), [(z, (0, z))]))
    m.set_table("par", "p", _par(B, m.gen_cods("p"), {z: (0, z)}))
    m.set_table("stoch", "p", _stoch(B, m.gen_cods("p"), {z: {(0, z): 1}}))

    m.set_table("rel", "any", _rel(B, m.gen_cods("any"),
                                   [(z, (0, z)), (z, (0, o)), (o, (0, z)), (o, (0, o))]))
    m.set_table("par", "any", _par(B, m.gen_cods("any"), {z: (0, z), o: (0, o)}))
    m.set_table("stoch", "any", _stoch(B, m.gen_cods("any"),
                                       {z: {(0, z): half, (0, o): half},
                                        o: {(0, z): half, (0, o): half}}))

    m.set_table("rel", "w", _rel(B, m.gen_cods("w"), [(z, (0, o)), (o, (1, ()))]))
    m.set_table("par", "w", _par(B, m.gen_cods("w"), {z: (0, o), o: (1, ())}))
    m.set_table("stoch", "w", _stoch(B, m.gen_cods("w"),
                                     {z: {(0, o): 1}, o: {(1, ()): 1}}))

    m.set_table("rel", "st", _rel(U, m.gen_cods("st"), [((), (0, z))]))
    m.set_table("par", "st", _par(U, m.gen_cods("st"), {(): (0, z)}))
    m.set_table("stoch", "st", _stoch(U, m.gen_cods("st"), {(): {(0, z): 1}}))
    return m


@pytest.fixture(scope="session")
def bool_model() -> Model:
    return make_bool_model()
