"""Command-line front end.

Exit codes: 0 success, 1 error (a JSON object on stderr), 2 identification
not established.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .decompose import DecompositionError, decompose, tv_decompose
from .diagram import CausalDiagram, ContractError, DiagramError, check_identifiable, load_diagram, project
from .engine import Expect, ImpossibleEvidenceError
from .estimate import (
    BootstrapError,
    EstimationError,
    NotIdentifiedError,
    SchemaError,
    bootstrap_decomposition,
    load_schema,
    read_csv,
    sample_dataset,
    schema_from_model,
    write_csv,
)
from .scm import MODELS_DIR, EnumerationCapError, ModelError, Variable, load_model

SEED_ENV = "SPURDECOMP_SEED"


class ConfigError(ValueError):
    pass


# -- input helpers ----------------------------------------------------------


def resolve_model_path(path: str) -> Path:
    """Existing paths are used as given; otherwise fall back to a bundled model of the same name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = MODELS_DIR / (p.name if p.suffix else p.name + ".json")
    if bundled.exists():
        return bundled
    raise ConfigError(f"model file {path!r} not found")


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} file {path!r} not found")
    return p


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _split_assignment(text: str) -> tuple[str, str | None]:
    if "=" in text:
        name, value = text.split("=", 1)
        return name.strip(), value.strip()
    return text.strip(), None


def _typed(domain: Sequence, name: str, raw: str):
    return domain[Variable(name, tuple(domain)).index(raw)]


def parse_assignment(text: str, domains: dict[str, Sequence]) -> dict[str, Any]:
    name, value = _split_assignment(text)
    if value is None:
        raise ConfigError(f"expected NAME=VALUE, got {text!r}")
    if name not in domains:
        raise ConfigError(f"unknown variable {name!r}")
    try:
        return {name: _typed(domains[name], name, value)}
    except ModelError as exc:
        raise ConfigError(str(exc)) from None


def parse_outcome(args, domains) -> dict | Expect:
    if (args.y is None) == (args.y_expect is None):
        raise ConfigError("give exactly one of --y NAME=VALUE or --y-expect NAME")
    if args.y_expect is not None:
        if args.y_expect not in domains:
            raise ConfigError(f"unknown variable {args.y_expect!r}")
        return Expect(args.y_expect)
    return parse_assignment(args.y, domains)


def parse_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def envelope(command: str, inputs: dict[str, Path], settings: dict, result: Any, seed: int | None = None) -> dict:
    out = {
        "tool": "spurdecomp",
        "version": __version__,
        "command": command,
        "inputs": {k: {"path": str(p), "sha256": sha256(p)} for k, p in inputs.items()},
        "settings": settings,
        "result": result,
    }
    if seed is not None:
        out["seed"] = seed
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def emit(args, report: dict, text: str | None = None) -> None:
    body = text if (args.format == "text" and text is not None) else dumps(report)
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    if getattr(args, "json", None):
        Path(args.json).write_text(dumps(report), encoding="utf-8")


def contributions_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["latents", "confounder", "value", "lower", "upper", "se"])
    for r in rows:
        ci = r.get("ci", {})
        writer.writerow([
            "+".join(r["latents"]), r.get("confounder") or "", repr(r["value"]),
            repr(ci["lower"]) if ci else "", repr(ci["upper"]) if ci else "", repr(ci["se"]) if ci else "",
        ])
    return buf.getvalue()


# -- commands -----------------------------------------------------------------


def cmd_decompose(args) -> int:
    path = resolve_model_path(args.model)
    scm = load_model(path)
    domains = {v.name: v.domain for v in scm.endogenous}
    x = parse_assignment(args.x, domains)
    y = parse_outcome(args, domains)
    order = parse_list(args.order)
    report = decompose(scm, x, y, args.mode, order, force_model_only=args.force_model_only)
    result = report.to_dict()
    if args.x0:
        x0 = parse_assignment(args.x0, domains)
        result["tv"] = tv_decompose(scm, x0, x, y).to_dict()
    settings = {"mode": args.mode, "order": order, "force_model_only": args.force_model_only}
    out = envelope("decompose", {"model": path}, settings, result)
    if args.csv:
        Path(args.csv).write_text(contributions_csv(result["contributions"]), encoding="utf-8")
    emit(args, out, report.to_text())
    return 0


def _estimate_text(result: dict) -> str:
    rows = [("latents", "confounder", "estimate", "lower", "upper")]
    for c in result["contributions"]:
        ci = c["ci"]
        rows.append(("+".join(c["latents"]), c["confounder"] or "", f"{c['value']:+.6f}",
                     f"{ci['lower']:+.6f}", f"{ci['upper']:+.6f}"))
    t = result["total_ci"]
    rows.append(("total Exp-SE", "", f"{result['total']:+.6f}", f"{t['lower']:+.6f}", f"{t['upper']:+.6f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = [f"mode: {result['mode']}   x: {result['x']}   y: {result['y']}   "
             f"level: {t['level']}   replicates: {t['replicates']}   seed: {t['seed']}"]
    for j, r in enumerate(rows):
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def cmd_estimate(args) -> int:
    data_path = _require(args.data, "data")
    schema_path = _require(args.schema, "schema")
    diagram_path = resolve_model_path(args.diagram) if args.diagram else _require(None, "diagram")
    domains, numeric = load_schema(schema_path)
    data = read_csv(data_path, (domains, numeric))
    diagram = load_diagram(diagram_path)
    x = parse_assignment(args.x, domains)
    y = parse_outcome(args, domains)
    order = parse_list(args.order)
    seed = args.seed if args.seed is not None else default_seed()
    est = bootstrap_decomposition(
        data, diagram, x, y, args.mode, order,
        replicates=args.replicates, level=args.level, seed=seed, smoothing=args.smoothing,
    )
    result = est.to_dict()
    result["n"] = data.n
    settings = {"mode": args.mode, "order": order, "replicates": args.replicates,
                "level": args.level, "smoothing": args.smoothing}
    out = envelope("estimate", {"data": data_path, "schema": schema_path, "diagram": diagram_path},
                   settings, result, seed)
    if args.csv:
        Path(args.csv).write_text(contributions_csv(result["contributions"]), encoding="utf-8")
    emit(args, out, _estimate_text(result))
    return 0


def _diagram_from_args(args) -> tuple[CausalDiagram, str, Path]:
    if bool(args.model) == bool(args.diagram):
        raise ConfigError("give exactly one of --model or --diagram")
    if args.model:
        path = resolve_model_path(args.model)
        return project(load_model(path)), "model", path
    path = resolve_model_path(args.diagram)
    return load_diagram(path), "diagram", path


def cmd_check_id(args) -> int:
    diagram, kind, path = _diagram_from_args(args)
    if args.uset is None:
        raise ConfigError("--uset is required (use --uset '' for the empty set)")
    latents = parse_list(args.uset)
    unknown = [u for u in latents if u not in diagram.exogenous]
    if unknown:
        raise ConfigError(f"--uset names unknown latents {unknown}")
    xname, _ = _split_assignment(args.x)
    yname, _ = _split_assignment(args.y)
    verdict = check_identifiable(diagram, latents, xname, yname)
    out = envelope("check-id", {kind: path}, {"x": xname, "y": yname}, verdict.to_dict())
    text = f"{verdict.verdict}: U_s = {sorted(latents)}\n" + "".join(f"  {r}\n" for r in verdict.reasons)
    emit(args, out, text)
    return 0 if verdict.identifiable else 2


def cmd_sample(args) -> int:
    path = resolve_model_path(args.model)
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    if not args.out:
        raise ConfigError("--out is required")
    scm = load_model(path)
    seed = args.seed if args.seed is not None else default_seed()
    columns, domains, codes = sample_dataset(scm, args.n, seed)
    write_csv(args.out, columns, domains, codes)
    if args.schema_out:
        Path(args.schema_out).write_text(dumps(schema_from_model(scm)), encoding="utf-8")
    return 0


def cmd_dot(args) -> int:
    diagram, _, _ = _diagram_from_args(args)
    text = diagram.to_dot(latents=not args.no_latents)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# -- parser ---------------------------------------------------------------------


def _outcome_flags(p):
    p.add_argument("--y", help="probability-form outcome, NAME=VALUE")
    p.add_argument("--y-expect", metavar="NAME", help="expectation-form outcome")


def _output_flags(p):
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--json", help="additionally write the JSON report to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spurdecomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="exact decomposition on a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True, help="treatment value, NAME=VALUE")
    p.add_argument("--x0", help="baseline treatment; adds the TV = TE + Exp-SE identity to the report")
    _outcome_flags(p)
    p.add_argument("--mode", choices=("auto", "markovian", "semi-markovian"), default="auto")
    p.add_argument("--order", help="comma-separated confounders or latents")
    p.add_argument("--force-model-only", action="store_true",
                   help="allow non-topological Markovian orders (values are not identifiable from data)")
    p.add_argument("--csv", help="write contributions as CSV")
    _output_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("estimate", help="plug-in decomposition with bootstrap intervals")
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--diagram", help="diagram or model file")
    p.add_argument("--x", required=True)
    _outcome_flags(p)
    p.add_argument("--mode", choices=("auto", "markovian", "semi-markovian"), default="auto")
    p.add_argument("--order")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--csv", help="write contributions with intervals as CSV")
    _output_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check-id", help="graphical identification check for P(y | x^{U_s})")
    p.add_argument("--model")
    p.add_argument("--diagram")
    p.add_argument("--x", default="X")
    p.add_argument("--y", default="Y")
    p.add_argument("--uset", help="comma-separated latents")
    _output_flags(p)
    p.set_defaults(func=cmd_check_id)

    p = sub.add_parser("sample", help="forward-sample observed columns to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--schema-out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dot", help="print the causal diagram in DOT format")
    p.add_argument("--model")
    p.add_argument("--diagram")
    p.add_argument("--no-latents", action="store_true", help="draw shared latents as dashed bidirected edges")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dot)
    return parser


_ERRORS = (
    ConfigError, ModelError, DiagramError, ContractError, SchemaError, EstimationError, BootstrapError,
    DecompositionError, ImpossibleEvidenceError, EnumerationCapError, OSError, json.JSONDecodeError, ValueError,
)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotIdentifiedError as exc:
        payload = {"error": "NotIdentifiedError", "message": str(exc)}
        if exc.verdict is not None:
            payload["verdict"] = exc.verdict.to_dict()
        sys.stderr.write(dumps(payload))
        return 2
    except _ERRORS as exc:
        sys.stderr.write(dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
