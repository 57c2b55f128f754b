"""Command-line entry point.

Machine-readable output (JSON) goes to stdout; human commentary goes to
stderr.  Exit codes: 0 valid/sound, 1 invalid/counterexamples, 2 errors or
unknown verdicts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .backends import eval_term
from .combinators import Elaborator, elaborate_command
from .kernel import KernelTypeError, typecheck
from .models import BACKENDS
from .surface import (ModelError, ParseError, SourceFile, dump_model,
                      load_triple, parse_model, parse_program, parse_term,
                      print_program, print_term)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2))


def _parse_ctx(text: str):
    out = []
    if not text:
        return tuple(out)
    for part in text.split(","):
        x, ty = part.split(":")
        out.append((x.strip(), ty.strip()))
    return tuple(out)


def _parse_idx(text: str):
    out = []
    if not text:
        return tuple(out)
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        lbl, tys = part.split(":")
        tys = tuple(t.strip() for t in tys.split(",") if t.strip())
        out.append((lbl.strip(), tys))
    return tuple(out)


def cmd_check(args) -> int:
    from .logics.driver import check_doc
    path = Path(args.file)
    try:
        doc = load_triple(path.read_text(encoding="utf-8"), base_dir=path.parent)
        verdict = check_doc(doc)
    except (ModelError, ParseError, OSError) as exc:
        _emit({"verdict": "error", "counterexample": {"reason": str(exc)}})
        _say(f"error: {exc}")
        return 2
    _emit(verdict.to_dict())
    _say(f"{path.name}: {verdict.status}")
    return {"valid": 0, "invalid": 1}.get(verdict.status, 2)


def _rows_json(m) -> list:
    out = []
    for x in m.dom.elems:
        row = m.rows[x]
        if type(m).backend == "par":
            enc = None if row is None else [row[0], list(row[1])]
        elif type(m).backend == "rel":
            enc = [[i, list(y)] for (i, y) in sorted(row)]
        else:
            enc = [[i, list(y), str(w)] for (i, y), w in sorted(row.items())]
        out.append([list(x), enc])
    return out


def cmd_eval(args) -> int:
    try:
        src = SourceFile.load(args.file)
        model = parse_model(Path(args.model).read_text(encoding="utf-8"),
                            name=Path(args.model).stem)
        ctx = _parse_ctx(args.ctx) if args.ctx else model.default_context
        if src.kind == "term":
            term = parse_term(src.text, model.signature)
            idx = _parse_idx(args.idx)
            if not idx:
                from .kernel import infer_index
                idx = infer_index(term, ctx, model.signature)
            typecheck(term, ctx, idx, model.signature)
        elif src.kind == "program":
            elab = Elaborator(state=ctx)
            term = elaborate_command(parse_program(src.text), elab)
            idx = elab.psi
            elab.check_command(term, model.signature)
        else:
            _say("eval expects a .icl term or .gcl program")
            return 2
        m = eval_term(term, ctx, idx, model, args.backend)
    except (ModelError, ParseError, KernelTypeError, OSError) as exc:
        _emit({"verdict": "error", "counterexample": {"reason": str(exc)}})
        _say(f"error: {exc}")
        return 2
    _emit({
        "backend": args.backend,
        "context": [[x, ty] for x, ty in ctx],
        "index": [[a, list(tys)] for a, tys in idx],
        "rows": _rows_json(m),
    })
    _say(m.pretty())
    return 0


def cmd_typecheck(args) -> int:
    try:
        src = SourceFile.load(args.file)
        model = parse_model(Path(args.model).read_text(encoding="utf-8"),
                            name=Path(args.model).stem)
        ctx = _parse_ctx(args.ctx) if args.ctx else model.default_context
        if src.kind == "term":
            term = parse_term(src.text, model.signature)
            idx = _parse_idx(args.idx)
            if not idx:
                from .kernel import infer_index
                idx = infer_index(term, ctx, model.signature)
            typecheck(term, ctx, idx, model.signature)
        elif src.kind == "program":
            elab = Elaborator(state=ctx)
            term = elaborate_command(parse_program(src.text), elab)
            elab.check_command(term, model.signature)
            idx = elab.psi
        else:
            _say("typecheck expects a .icl term or .gcl program")
            return 2
    except (ModelError, ParseError, KernelTypeError, OSError) as exc:
        _emit({"verdict": "error", "counterexample": {"reason": str(exc)}})
        _say(f"error: {exc}")
        return 2
    _emit({"verdict": "ok",
           "index": [[a, list(tys)] for a, tys in idx]})
    _say("ok")
    return 0


def cmd_rules(args) -> int:
    from .logics.rules import run_campaign
    jobs = args.jobs or int(os.environ.get("IMPCAT_THREADS", "1"))
    backends = args.backend.split(",") if args.backend else ["rel", "par", "stoch"]
    for b in backends:
        if b not in BACKENDS:
            _say(f"unknown backend {b}")
            return 2
    rule_ids = args.rules.split(",") if args.rules else None
    _say(f"running campaign: seed={args.seed} instances={args.instances} "
         f"backends={','.join(backends)} jobs={jobs}")
    report = run_campaign(seed=args.seed, instances=args.instances,
                          backends=backends, rule_ids=rule_ids,
                          max_carrier=args.max_carrier, jobs=jobs)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n",
                                     encoding="utf-8")
        _say(f"report written to {args.report}")
    if args.plots:
        from .reporting import write_plots
        written = write_plots(report, Path(args.plots))
        _say("figures: " + ", ".join(str(p) for p in written))
    _emit(report if args.json or not args.report else
          {"sound": report["sound"],
           "total_counterexamples": report["total_counterexamples"],
           "seconds": report["seconds"]})
    _say(f"sound={report['sound']} counterexamples="
         f"{report['total_counterexamples']} in {report['seconds']}s")
    return 0 if report["sound"] else 1


def cmd_fmt(args) -> int:
    try:
        src = SourceFile.load(args.file)
        if src.kind == "term":
            out = print_term(parse_term(src.text)) + "\n"
        elif src.kind == "program":
            out = print_program(parse_program(src.text)) + "\n"
        elif src.kind == "model":
            out = dump_model(parse_model(src.text, name=Path(args.file).stem))
        else:
            doc = json.loads(src.text)
            out = json.dumps(doc, indent=2) + "\n"
    except (ModelError, ParseError, OSError) as exc:
        _say(f"error: {exc}")
        if isinstance(exc, ParseError):
            _say(exc.diagnostic.render())
        return 2
    if args.write:
        Path(args.file).write_text(out, encoding="utf-8")
        _say(f"rewrote {args.file}")
    else:
        sys.stdout.write(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="impcat",
        description="check guarded-command triples over finite relational, "
                    "partial and probabilistic semantics")
    sub = ap.add_subparsers(dest="sub", required=True)

    c = sub.add_parser("check", help="check a triple file")
    c.add_argument("file")
    c.add_argument("--json", action="store_true")
    c.set_defaults(fn=cmd_check)

    e = sub.add_parser("eval", help="print the morphism table of a term or program")
    e.add_argument("file")
    e.add_argument("--model", required=True)
    e.add_argument("--backend", default="rel", choices=sorted(BACKENDS))
    e.add_argument("--ctx", help="context, e.g. 'x:Bool,y:Bool'")
    e.add_argument("--idx", help="index, e.g. 'a:Bool;e:'")
    e.add_argument("--json", action="store_true")
    e.set_defaults(fn=cmd_eval)

    t = sub.add_parser("typecheck", help="typecheck a term or program")
    t.add_argument("file")
    t.add_argument("--model", required=True)
    t.add_argument("--ctx")
    t.add_argument("--idx")
    t.add_argument("--json", action="store_true")
    t.set_defaults(fn=cmd_typecheck)

    r = sub.add_parser("rules", help="run the rule-soundness campaign")
    r.add_argument("--backend", help="comma-separated subset of rel,par,stoch")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--instances", type=int, default=1000)
    r.add_argument("--max-carrier", type=int, default=3)
    r.add_argument("--rules", help="comma-separated rule ids")
    r.add_argument("--report", help="write the JSON report here")
    r.add_argument("--plots", help="write figures and summary.csv here")
    r.add_argument("--jobs", type=int, default=0,
                   help="worker processes (default IMPCAT_THREADS or 1)")
    r.add_argument("--json", action="store_true")
    r.set_defaults(fn=cmd_rules)

    f = sub.add_parser("fmt", help="canonically format a source file")
    f.add_argument("file")
    f.add_argument("--write", action="store_true")
    f.add_argument("--json", action="store_true")
    f.set_defaults(fn=cmd_fmt)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
