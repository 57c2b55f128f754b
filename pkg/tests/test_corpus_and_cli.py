import json
import subprocess
import sys
from pathlib import Path

import pytest

from impcat.combinators import Elaborator, elaborate_command, elaborate_pred, \
    elaborate_state
from impcat.kernel import KernelTypeError, alpha_eq
from impcat.surface import (ModelError, ParseError, SourceFile, dump_model,
                            load_triple, parse_model, parse_pred,
                            parse_program, parse_state, parse_term,
                            print_pred, print_program, print_state, print_term)

CORPUS = Path(__file__).parent / "corpus"
BAD = Path(__file__).parent / "fixtures" / "bad"


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "impcat.cli", *args],
                          capture_output=True, text=True)


class TestCorpusRoundTrip:
    def test_corpus_is_big_enough(self):
        assert len(list(CORPUS.iterdir())) >= 30

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.icl")),
                             ids=lambda p: p.name)
    def test_term_roundtrip(self, path):
        t = parse_term(path.read_text())
        t2 = parse_term(print_term(t))
        assert alpha_eq(t2, t)
        assert print_term(parse_term(print_term(t))) == print_term(t)

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.gcl")),
                             ids=lambda p: p.name)
    def test_program_roundtrip(self, path):
        p = parse_program(path.read_text())
        assert parse_program(print_program(p)) == p
        assert print_program(parse_program(print_program(p))) == print_program(p)

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.model.json")),
                             ids=lambda p: p.name)
    def test_model_roundtrip(self, path):
        m = parse_model(path.read_text(), name=path.stem)
        text = dump_model(m)
        m2 = parse_model(text, name=path.stem)
        assert dump_model(m2) == text

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.triple.json")),
                             ids=lambda p: p.name)
    def test_triples_load_and_elaborate(self, path):
        doc = load_triple(path.read_text(), base_dir=CORPUS)
        e = Elaborator(state=doc.context)
        cmd = elaborate_command(parse_program(doc.cmd), e)
        e.check_command(cmd, doc.model.signature)

    def test_programs_elaborate_over_their_models(self):
        model = parse_model((CORPUS / "bool.model.json").read_text())
        ctx = (("x", "Bool"), ("y", "Bool"))
        e = Elaborator(state=ctx)
        for path in sorted(CORPUS.glob("*.gcl")):
            cmd = elaborate_command(parse_program(path.read_text()), e)
            e.check_command(cmd, model.signature)

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.model.json")),
                             ids=lambda p: p.name)
    def test_models_schema_valid(self, path):
        import jsonschema
        schema = json.loads((Path(__file__).parent.parent / "docs" / "schema"
                             / "model.schema.json").read_text())
        jsonschema.validate(json.loads(path.read_text()), schema)


class TestBadFixtures:
    def test_every_bad_fixture_rejected_with_documented_error(self):
        manifest = json.loads((BAD / "expected.json").read_text())
        assert manifest, "manifest must not be empty"
        for name, kind in manifest.items():
            path = BAD / name
            text = path.read_text()
            if name.endswith(".icl"):
                with pytest.raises(ParseError):
                    parse_term(text)
            elif name.endswith(".gcl"):
                with pytest.raises(ParseError):
                    parse_program(text)
            elif name.endswith(".triple.json"):
                with pytest.raises(ModelError) as e:
                    load_triple(text, base_dir=BAD)
                assert e.value.kind == kind, name
            else:
                with pytest.raises(ModelError) as e:
                    parse_model(text)
                assert e.value.kind == kind, name

    def test_manifest_covers_every_fixture(self):
        manifest = json.loads((BAD / "expected.json").read_text())
        files = {p.name for p in BAD.iterdir()} - {"expected.json"}
        assert files == set(manifest)


class TestCLI:
    def test_check_prop1_exits_zero(self):
        r = run_cli("check", str(CORPUS / "fig_prop1.triple.json"))
        assert r.returncode == 0, r.stderr
        doc = json.loads(r.stdout)
        assert doc["verdict"] == "valid"

    def test_check_invalid_exits_one(self):
        r = run_cli("check", str(CORPUS / "invalid_outcome.triple.json"))
        assert r.returncode == 1
        doc = json.loads(r.stdout)
        assert doc["verdict"] == "invalid"
        assert "counterexample" in doc

    def test_check_reports_schema_valid(self):
        import jsonschema
        schema = json.loads((Path(__file__).parent.parent / "docs" / "schema"
                             / "check-report.schema.json").read_text())
        for name in ["fig_prop1.triple.json", "invalid_outcome.triple.json",
                     "rel_skip.triple.json", "rel_search.triple.json",
                     "abort_state.triple.json", "state_correct.triple.json"]:
            r = run_cli("check", str(CORPUS / name))
            jsonschema.validate(json.loads(r.stdout), schema)

    def test_check_bad_triple_exits_two(self):
        r = run_cli("check", str(BAD / "bad_shape.triple.json"))
        assert r.returncode == 2

    def test_rel_skip_valid(self):
        r = run_cli("check", str(CORPUS / "rel_skip.triple.json"))
        assert r.returncode == 0, r.stdout + r.stderr

    def test_rel_search_decides(self):
        r = run_cli("check", str(CORPUS / "rel_search.triple.json"))
        assert r.returncode in (0, 1)
        doc = json.loads(r.stdout)
        assert doc["verdict"] in ("valid", "invalid")

    def test_eval_prints_table(self):
        r = run_cli("eval", str(CORPUS / "while.gcl"),
                    "--model", str(CORPUS / "bool.model.json"),
                    "--backend", "par", "--ctx", "x:Bool,y:Bool")
        assert r.returncode == 0, r.stderr
        doc = json.loads(r.stdout)
        assert doc["backend"] == "par"
        assert doc["rows"]

    def test_eval_term_with_inferred_index(self):
        r = run_cli("eval", str(CORPUS / "while_skeleton.icl"),
                    "--model", str(CORPUS / "bool.model.json"),
                    "--backend", "rel", "--ctx", "x:Bool")
        assert r.returncode == 0, r.stderr

    def test_typecheck_ok_and_error(self):
        r = run_cli("typecheck", str(CORPUS / "seq.gcl"),
                    "--model", str(CORPUS / "bool.model.json"),
                    "--ctx", "x:Bool,y:Bool")
        assert r.returncode == 0, r.stderr
        r2 = run_cli("typecheck", str(BAD / "syntax_prog.gcl"),
                     "--model", str(CORPUS / "bool.model.json"),
                     "--ctx", "x:Bool")
        assert r2.returncode == 2

    def test_fmt_idempotent(self, tmp_path):
        for name in ["while.gcl", "nested_if.gcl", "gen.icl",
                     "bool.model.json"]:
            src = CORPUS / name
            r1 = run_cli("fmt", str(src))
            assert r1.returncode == 0, r1.stderr
            out = tmp_path / name
            out.write_text(r1.stdout)
            r2 = run_cli("fmt", str(out))
            assert r2.stdout == r1.stdout

    def test_rules_smoke_and_plots(self, tmp_path):
        report_path = tmp_path / "report.json"
        plots = tmp_path / "plots"
        r = run_cli("rules", "--seed", "3", "--instances", "3",
                    "--rules", "hoare.skip,incorr.fail,rel-hoare.skip",
                    "--report", str(report_path), "--plots", str(plots))
        assert r.returncode == 0, r.stderr
        report = json.loads(report_path.read_text())
        assert report["sound"] is True
        assert len(report["rules"]) == 9
        import jsonschema
        schema = json.loads((Path(__file__).parent.parent / "docs" / "schema"
                             / "rules-report.schema.json").read_text())
        jsonschema.validate(report, schema)
        assert (plots / "summary.csv").exists()
        assert (plots / "instances.png").exists()
        assert (plots / "hit_rate.png").exists()
        assert (plots / "timing.png").exists()

    def test_rules_deterministic_across_runs(self):
        args = ["rules", "--seed", "11", "--instances", "4",
                "--rules", "hoare.comp", "--backend", "stoch", "--json"]
        r1 = run_cli(*args)
        r2 = run_cli(*args)
        d1 = json.loads(r1.stdout)
        d2 = json.loads(r2.stdout)
        for d in (d1, d2):
            for row in d["rules"]:
                row.pop("seconds")
            d.pop("seconds")
        assert d1 == d2
