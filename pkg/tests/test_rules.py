import random

import pytest

from impcat.backends import UNIT, basic_obj, eval_term
from impcat.combinators import OMEGA
from impcat.gen import random_bundle, random_guard, random_morphism
from impcat.logics import (SideConditionViolated, check_side_condition,
                           require_side_condition)
from impcat.logics.rules import (Attempt, all_rules, rule_check, rules_by_id,
                                 run_campaign, run_rule_backend)
from impcat.models import RelMorphism, StochMorphism

ALL = ["rel", "par", "stoch"]


class TestCatalogue:
    def test_rule_inventory(self):
        ids = {r.rule_id for r in all_rules()}
        # every named rule of the five theorems is present
        for want in ["hoare.skip", "hoare.comp", "hoare.assign", "hoare.choice",
                     "hoare.loop", "hoare.unroll", "hoare.ifelse", "hoare.while",
                     "hoare.monotone", "hoare.and", "hoare.fail", "hoare.assert",
                     "hoare.top", "hoare.bot",
                     "incorr.skip", "incorr.comp", "incorr.comp-error",
                     "incorr.assign", "incorr.sample", "incorr.choice-left",
                     "incorr.choice-right", "incorr.convex", "incorr.iter-zero",
                     "incorr.iter", "incorr.monotone", "incorr.assert",
                     "incorr.fail", "incorr.bot",
                     "outcome.skip", "outcome.comp", "outcome.assign",
                     "outcome.sample", "outcome.unroll", "outcome.choice",
                     "outcome.ifelse", "outcome.assert", "outcome.convex",
                     "outcome.monotone", "outcome.bot",
                     "rel-hoare.skip", "rel-hoare.comp", "rel-hoare.assign",
                     "rel-hoare.choice", "rel-hoare.ifelse", "rel-hoare.loop",
                     "rel-hoare.while", "rel-hoare.monotone", "rel-hoare.symm",
                     "rel-hoare.assign-l", "rel-hoare.choice-l",
                     "rel-hoare.ifelse-l", "rel-hoare.loop-l",
                     "rel-hoare.while-l",
                     "rel-incorr.skip", "rel-incorr.comp", "rel-incorr.assign",
                     "rel-incorr.sample-l", "rel-incorr.choice",
                     "rel-incorr.ifelse", "rel-incorr.loop", "rel-incorr.while",
                     "rel-incorr.monotone", "rel-incorr.symm",
                     "rel-incorr.assign-l", "rel-incorr.choice-l",
                     "rel-incorr.ifelse-l", "rel-incorr.loop-l",
                     "rel-incorr.while-l",
                     "lemma.96", "lemma.97", "lemma.98", "lemma.99",
                     "lemma.100", "prop1.while-invariant"]:
            assert want in ids, want

    def test_rule_check_api(self):
        rng = random.Random(0)
        bundle = random_bundle(rng, n_state_vars=2)
        out = rule_check("hoare.skip", bundle, rng, "rel")
        assert isinstance(out, Attempt)
        assert out.applicable and out.failure is None


@pytest.mark.parametrize("backend", ALL)
class TestAllRulesSound:
    def test_each_rule_short_run(self, backend):
        for rule in all_rules():
            r = run_rule_backend(rule, seed=7, instances=6, backend=backend)
            assert not r["counterexamples"], (rule.rule_id, r["counterexamples"])
            assert r["instances"] >= 6, (rule.rule_id, r)


class TestCampaign:
    def test_campaign_on_subset(self):
        report = run_campaign(seed=5, instances=5,
                              rule_ids=["hoare.while", "incorr.iter",
                                        "outcome.convex", "rel-hoare.while",
                                        "rel-incorr.loop", "lemma.96"])
        assert report["sound"]
        assert report["total_counterexamples"] == 0
        assert len(report["rules"]) == 18

    def test_campaign_deterministic(self):
        a = run_campaign(seed=9, instances=4, rule_ids=["hoare.comp"],
                         backends=["stoch"])
        b = run_campaign(seed=9, instances=4, rule_ids=["hoare.comp"],
                         backends=["stoch"])
        for r in (a, b):
            r.pop("seconds")
            for row in r["rules"]:
                row.pop("seconds")
        assert a == b

    def test_campaign_parallel_matches_serial(self):
        kw = dict(seed=4, instances=4,
                  rule_ids=["hoare.skip", "incorr.assert"], backends=["rel"])
        a = run_campaign(jobs=1, **kw)
        b = run_campaign(jobs=2, **kw)
        for r in (a, b):
            r.pop("seconds")
            for row in r["rules"]:
                row.pop("seconds")
        assert a == b


class TestSideConditions:
    def test_constant_fair_coin(self, bool_model):
        coin = bool_model.table("stoch", "coin")
        Bo = bool_model.carrier_obj("Bool")
        lifted = StochMorphism.discard(Bo).then(coin.to_single()).compose(
            0, StochMorphism.case_split(coin.cods))
        assert check_side_condition("constant", lifted)
        assert check_side_condition("total", lifted)

    def test_state_dependent_guard_not_constant(self, bool_model):
        b = bool_model.table("rel", "b")
        assert not check_side_condition("constant", b)
        with pytest.raises(SideConditionViolated):
            require_side_condition("constant", b, "guard")

    def test_identity_lift_deterministic(self):
        i = RelMorphism.identity(basic_obj(["0", "1"]))
        assert check_side_condition("deterministic", i)
        assert check_side_condition("total", i)

    def test_convex_instantiation_with_nonconstant_guard_rejected(self, bool_model):
        # the outcome CONVEX rule demands a constant guard: instantiating
        # its side condition with the state-dependent guard must fail
        b = bool_model.table("par", "b")
        with pytest.raises(SideConditionViolated):
            require_side_condition("constant", b, "guard b")

    def test_unknown_kind(self):
        i = RelMorphism.identity(basic_obj(["0"]))
        with pytest.raises(ValueError):
            check_side_condition("purple", i)
