"""Command-line front end.

Examples
--------
    skewtail pdf --model "skew-t(nu=4, rho=0.5, delta=[0.3, 0.3])" --grid=-3:3:21 --grid=-3:3:21
    skewtail taildep --model "skew-t(nu=1, rho=0, delta=[0, 0])"
    skewtail validate --list
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import oracle, taildep as td
from .errors import ConfigError, SkewTailError
from .model import MixtureSkewNormal2
from .tails import LOWER, UPPER, copula_tail_density, evaluate_grid, grid_to_csv, tail_density

COMMANDS = ("pdf", "tail", "copula-tail", "taildep", "validate", "sample")
FORMATS = ("csv", "json")
FAMILY_NAMES = {"skew-normal", "skew-t", "mixture"}


@dataclass
class RunConfig:
    command: str
    model: object = None
    grid: list = field(default_factory=list)
    out: str | None = None
    fmt: str = "csv"
    seed: int | None = None
    n: int | None = None
    orientation: str = UPPER
    K: float | None = None
    suite: dict | None = None
    list_checks: bool = False


def parse_shorthand(text: str) -> dict:
    """``skew-t(nu=4, rho=0.5, delta=[0.3, 0.3])`` -> ``{"family": "skew-t", ...}``."""
    text = text.strip()
    head, sep, rest = text.partition("(")
    fam = head.strip()
    if fam not in FAMILY_NAMES or not sep or not rest.endswith(")"):
        raise ConfigError(f"cannot parse model shorthand {text!r}")
    try:
        call = ast.parse(f"f({rest}", mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"bad shorthand arguments in {text!r}: {exc.msg}") from None
    if call.args:
        raise ConfigError("shorthand arguments must be keyword=value")
    out = {"family": fam}
    for kw in call.keywords:
        try:
            out[kw.arg] = ast.literal_eval(kw.value)
        except ValueError:
            raise ConfigError(f"argument {kw.arg!r} is not a literal") from None
    return out


def _model_spec(raw):
    if isinstance(raw, str):
        return parse_shorthand(raw)
    if isinstance(raw, dict):
        return raw
    raise ConfigError("model must be a shorthand string or a JSON object")


def _grid_axis(raw):
    if isinstance(raw, str):
        parts = raw.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid axis {raw!r} must look like min:max:count")
        raw = parts
    if isinstance(raw, dict):
        raw = [raw.get("min"), raw.get("max"), raw.get("count")]
    try:
        lo, hi, count = float(raw[0]), float(raw[1]), int(raw[2])
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"bad grid axis {raw!r}") from None
    if count < 1:
        raise ConfigError("grid counts must be >= 1")
    return lo, hi, count


def build_config(args) -> RunConfig:
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    rc = RunConfig(command=args.command)
    rc.fmt = args.format or cfg.get("format", "csv")
    if rc.fmt not in FORMATS:
        raise ConfigError(f"unknown format {rc.fmt!r}")
    rc.out = args.out or cfg.get("out")
    rc.seed = args.seed if args.seed is not None else cfg.get("seed")
    rc.n = args.n if args.n is not None else cfg.get("n")
    rc.orientation = args.orientation or cfg.get("orientation", UPPER)
    if rc.orientation not in (UPPER, LOWER):
        raise ConfigError("orientation must be 'upper' or 'lower'")
    rc.K = args.K if args.K is not None else cfg.get("K")
    rc.list_checks = bool(getattr(args, "list", False))
    if rc.seed is not None and (not isinstance(rc.seed, int) or rc.seed < 0):
        raise ConfigError("seed must be a nonnegative integer")
    if rc.n is not None and (not isinstance(rc.n, int) or rc.n < 1):
        raise ConfigError("n must be a positive integer")

    if rc.command == "validate":
        if "checks" in cfg:
            rc.suite = {"checks": cfg["checks"]}
        if not rc.list_checks:
            oracle.validate_config(rc.suite if rc.suite is not None else oracle.DEFAULT_SUITE)
        return rc

    raw_model = args.model if args.model is not None else cfg.get("model")
    if raw_model is None:
        raise ConfigError(f"command {rc.command!r} needs a model")
    spec = _model_spec(raw_model)
    if rc.command == "taildep":
        if spec.get("family") != "skew-t":
            raise ConfigError("taildep needs a skew-t model")
        if "nu" not in spec:
            raise ConfigError("skew-t model needs 'nu'")
    try:
        rc.model = oracle.build_model(spec)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SkewTailError):
            raise
        raise ConfigError(f"invalid model: {exc}") from None

    raw_grid = args.grid if args.grid else cfg.get("grid", [])
    rc.grid = [_grid_axis(a) for a in raw_grid]
    if rc.command in ("pdf", "tail", "copula-tail"):
        if len(rc.grid) != rc.model.d:
            raise ConfigError(f"need {rc.model.d} grid axes, got {len(rc.grid)}")
        if rc.command != "pdf" and any(lo <= 0 for lo, _, _ in rc.grid):
            if rc.command == "copula-tail" or _is_heavy(rc.model):
                raise ConfigError("tail grids must be strictly positive")
    if rc.command == "sample" and rc.n is None:
        rc.n = 1000
    return rc


def _is_heavy(model):
    if isinstance(model, MixtureSkewNormal2):
        return False
    return model.generator.declared_tail().is_heavy


def _axes(grid):
    return [np.linspace(lo, hi, count) for lo, hi, count in grid]


def _table(columns, rows, fmt):
    if fmt == "json":
        return json.dumps([dict(zip(columns, map(float, r))) for r in rows]) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([format(float(v), ".17g") for v in r])
    return buf.getvalue()


def cmd_pdf(rc: RunConfig) -> str:
    pts, vals = evaluate_grid(rc.model.pdf, _axes(rc.grid))
    cols = [f"y_{j + 1}" for j in range(pts.shape[1])] + ["pdf"]
    return _table(cols, np.column_stack([pts, vals]), rc.fmt)


def _tail_output(fn, rc):
    pts, vals = evaluate_grid(fn, _axes(rc.grid))
    if rc.fmt == "csv":
        return grid_to_csv(pts, vals)
    cols = [f"w_{j + 1}" for j in range(pts.shape[1])] + ["lambda"]
    return _table(cols, np.column_stack([pts, vals]), rc.fmt)


def cmd_tail(rc: RunConfig) -> str:
    if isinstance(rc.model, MixtureSkewNormal2):
        from .tails import mixture_tail_density

        return _tail_output(mixture_tail_density(rc.model)[0], rc)
    return _tail_output(tail_density(rc.model, rc.orientation, rc.K), rc)


def cmd_copula_tail(rc: RunConfig) -> str:
    return _tail_output(copula_tail_density(rc.model, rc.orientation, rc.K), rc)


def cmd_taildep(rc: RunConfig) -> str:
    m = rc.model
    p = (float(m.generator.nu), float(m.sigma.entries[0, 1]), *(float(v) for v in m.delta))
    res = td.skew_t_taildep(p)
    if rc.fmt == "json":
        return res.to_json() + "\n"
    return _table(["b_upper", "b_lower", "error"], [[res.b_upper, res.b_lower, res.error_estimate]], "csv")


def cmd_sample(rc: RunConfig) -> str:
    x = rc.model.sample(rc.n, seed=rc.seed)
    return _table([f"y_{j + 1}" for j in range(x.shape[1])], x, rc.fmt)


def cmd_validate(rc: RunConfig):
    if rc.list_checks:
        suite = rc.suite if rc.suite is not None else oracle.DEFAULT_SUITE
        names = [c.get("name", "?") for c in suite["checks"]] if rc.suite is not None else sorted(oracle.CHECKS)
        return "".join(n + "\n" for n in names), 0
    reports = oracle.run_suite(rc.suite)
    status = 0 if all(r.passed for r in reports) else 1
    return oracle.reports_to_jsonl(reports), status


def make_parser():
    parser = argparse.ArgumentParser(prog="skewtail", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int)
        if name == "validate":
            p.add_argument("--list", action="store_true", help="print check names and exit")
        else:
            p.add_argument("--model", help='family shorthand, e.g. "skew-t(nu=4, rho=0.5, delta=[0.3, 0.3])"')
            p.add_argument("--grid", action="append", help="axis spec min:max:count (repeat per dimension)")
            p.add_argument("--orientation", choices=(UPPER, LOWER))
            p.add_argument("--K", type=float, help="heavy-regime normalizing constant")
    return parser


def _defaults(args):
    for attr in ("model", "grid", "orientation", "K"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    return args


def main(argv=None) -> int:
    args = _defaults(make_parser().parse_args(argv))
    try:
        rc = build_config(args)
        status = 0
        if rc.command == "validate":
            text, status = cmd_validate(rc)
        else:
            handler = {
                "pdf": cmd_pdf,
                "tail": cmd_tail,
                "copula-tail": cmd_copula_tail,
                "taildep": cmd_taildep,
                "sample": cmd_sample,
            }[rc.command]
            text = handler(rc)
    except SkewTailError as exc:
        print(f"skewtail: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if rc.out:
        with open(rc.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
