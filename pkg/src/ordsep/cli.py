"""``ordsep`` command line.

Exit codes: 0 ok, 1 size guard, 2 validation error, 3 cross-check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .bh import BhSpec, JointPmf, bh_joint_pmf_occupancy, bh_joint_pmf_separation
from .distributions import format_model, parse_model
from .engine import METHODS, SeparationEvent, TwoPopulationModel, separation_probability_by_j, validate_condition
from .errors import SizeGuardError, ValidationError
from .montecarlo import SimConfig, simulate_bh, simulate_event_by_j
from .selftest import run_all

EXIT_OK, EXIT_GUARD, EXIT_VALIDATION, EXIT_CROSSCHECK = 0, 1, 2, 3
CROSSCHECK_TOL = 1e-9


def _read_json_arg(value: str, what: str):
    """Inline JSON, or ``@path`` to a JSON file. Returns (object, base dir)."""
    base = None
    if value.startswith("@"):
        path = Path(value[1:])
        if not path.exists():
            raise ValidationError(f"{what} file not found: {path}")
        text, base = path.read_text(), path.parent
        source = str(path)
    else:
        text, source = value, f"--{what}"
    try:
        return json.loads(text), base
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _field(obj: dict, key: str, what: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"{what}: missing field {key!r}")
    return obj[key]


def load_model(value: str) -> TwoPopulationModel:
    """``{"m": int, "n": int, "F": literal, "G": literal}``."""
    obj, base = _read_json_arg(value, "model")
    return TwoPopulationModel(
        int(_field(obj, "m", "model")),
        int(_field(obj, "n", "model")),
        parse_model(str(_field(obj, "F", "model")), base),
        parse_model(str(_field(obj, "G", "model")), base),
    )


def load_event(value: str) -> tuple[SeparationEvent, int | None]:
    """``{"intervals": [[c, d], ...], "counts": [k, ...], "j": int | null}``."""
    obj, _ = _read_json_arg(value, "event")
    intervals = _field(obj, "intervals", "event")
    counts = _field(obj, "counts", "event")
    try:
        event = SeparationEvent(tuple(tuple(iv) for iv in intervals), tuple(counts))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"event: malformed intervals/counts ({exc})") from None
    if any(len(iv) != 2 for iv in event.intervals):
        raise ValidationError("event: each interval must be a [c, d] pair")
    j = obj.get("j")
    return event, (None if j is None else int(j))


def _fmt(p: float, digits: int) -> str:
    return format(float(p), f".{digits}g")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _bh_spec(args) -> BhSpec:
    return BhSpec(args.m, args.n, args.alpha, parse_model(args.alt))


def run_event_prob(args) -> int:
    model = load_model(args.model)
    event, j_file = load_event(args.event)
    j = args.j if args.j is not None else j_file
    event.validate(model.m)
    validate_condition(model, event, j)
    by_j = separation_probability_by_j(model, event, method=args.method)
    js = range(len(by_j)) if j is None else [j]
    if args.format == "json":
        text = json.dumps({"j": list(js), "prob": [float(by_j[k]) for k in js]}) + "\n"
    else:
        text = _csv([["j", "prob"], *[[k, _fmt(by_j[k], args.digits)] for k in js]])
    _emit(text, args.out)
    return EXIT_OK


def run_bh_joint(args) -> int:
    spec = _bh_spec(args)
    status = EXIT_OK
    if args.algorithm == "occupancy":
        pmf = bh_joint_pmf_occupancy(spec)
    elif args.algorithm == "separation":
        pmf = bh_joint_pmf_separation(spec)
    else:
        pmf = bh_joint_pmf_occupancy(spec)
        other = bh_joint_pmf_separation(spec)
        gap = float(np.max(np.abs(pmf.table - other.table)))
        verdict = "ok" if gap <= CROSSCHECK_TOL else "FAIL"
        print(f"max_discrepancy,{gap:.3e},{verdict}", file=sys.stderr)
        if gap > CROSSCHECK_TOL:
            status = EXIT_CROSSCHECK
    text = pmf.to_json() + "\n" if args.format == "json" else pmf.to_csv(args.digits)
    _emit(text, args.out)
    return status


def run_simulate(args) -> int:
    config = SimConfig(args.samples, args.seed, args.workers)
    d = args.digits
    if args.event is not None:
        if args.model is None:
            raise ValidationError("simulate with --event also needs --model")
        model = load_model(args.model)
        event, j_file = load_event(args.event)
        j = args.j if args.j is not None else j_file
        event.validate(model.m)
        validate_condition(model, event, j)
        results = simulate_event_by_j(model, event, config)
        exact = separation_probability_by_j(model, event) if args.exact else None
        header = ["j", "estimate", "se"] + (["exact", "z"] if args.exact else [])
        rows = [header]
        for jj in range(len(results)) if j is None else [j]:
            r = results[jj]
            row = [jj, _fmt(r.estimate, d), _fmt(r.standard_error, d)]
            if exact is not None:
                row += [_fmt(exact[jj], d), f"{r.z_score(float(exact[jj])):.3f}"]
            rows.append(row)
    else:
        if None in (args.m, args.n, args.alpha):
            raise ValidationError("simulate needs either --model/--event or --m/--n/--alpha")
        spec = _bh_spec(args)
        emp = simulate_bh(spec, config)
        exact = bh_joint_pmf_occupancy(spec).table if args.exact else None
        header = ["k", "j", "estimate", "se"] + (["exact", "z"] if args.exact else [])
        rows = [header]
        for k in range(spec.m + 1):
            for jj in range(spec.n + 1):
                r = emp.cell(k, jj)
                row = [k, jj, _fmt(r.estimate, d), _fmt(r.standard_error, d)]
                if exact is not None:
                    row += [_fmt(exact[k, jj], d), f"{r.z_score(float(exact[k, jj])):.3f}"]
                rows.append(row)
    if args.format == "json":
        header, *body = rows
        text = json.dumps([dict(zip(header, row)) for row in body]) + "\n"
    else:
        text = _csv(rows)
    _emit(text, args.out)
    return EXIT_OK


def run_selftest(args) -> int:
    checks = run_all()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CROSSCHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordsep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def output_opts(p):
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--out", help="write to this file instead of stdout")
        p.add_argument("--digits", type=int, default=6, help="significant digits (default 6)")

    def bh_opts(p, required):
        p.add_argument("--m", type=int, required=required, help="number of hypotheses")
        p.add_argument("--n", type=int, required=required, help="number of true nulls")
        p.add_argument("--alpha", type=float, required=required, help="FDR level")
        p.add_argument("--alt", default="uniform", help="alternative p-value law literal")

    p = sub.add_parser("event-prob", help="exact Pr(E and B_j) for every j")
    p.add_argument("--model", required=True, help="model JSON or @file")
    p.add_argument("--event", required=True, help="event JSON or @file")
    p.add_argument("--j", type=int)
    p.add_argument("--method", choices=METHODS, default="enumerate")
    output_opts(p)
    p.set_defaults(func=run_event_prob)

    p = sub.add_parser("bh-joint", help="exact joint pmf of (R, V) under BH")
    bh_opts(p, required=True)
    p.add_argument("--algorithm", choices=["occupancy", "separation", "both"], default="occupancy")
    output_opts(p)
    p.set_defaults(func=run_bh_joint)

    p = sub.add_parser("simulate", help="Monte Carlo estimates with standard errors")
    p.add_argument("--model", help="model JSON or @file (event mode)")
    p.add_argument("--event", help="event JSON or @file (event mode)")
    p.add_argument("--j", type=int)
    bh_opts(p, required=False)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--exact", action="store_true", help="also report exact values and z-scores")
    output_opts(p)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("selftest", help="run the built-in reproduction checks")
    p.set_defaults(func=run_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"ordsep: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SizeGuardError as exc:
        print(f"ordsep: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
