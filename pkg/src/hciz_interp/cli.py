"""Command-line experiment runner.

Subcommands ``hciz``, ``errcheck``, ``converge`` and ``ei`` each write a
JSON summary (with a ``meta`` block) and, where a table exists, a CSV file
next to it.  Settings come from defaults, then ``--config file.json``,
then explicit flags.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (any
partial table is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .ei import run_ei
from .error_formulas import (
    HcizProblem,
    corollary1_error_mc,
    direct_error_exponential,
    direct_error_gaussian,
    direct_error_polynomial,
    flat_limit_check,
    hciz_z_determinant,
    hciz_z_montecarlo,
    hermite_genocchi_error_mc,
    theorem1_error_mc,
)
from .exceptions import ConfigError, HcizInterpError, IllConditioned, NumericalError
from .functions import from_id
from .interp import BASES, STRATEGIES, NodeSet, run_convergence
from .numerics.sampling import RngStream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FORMULAS = ("theorem1", "corollary1", "hermite-genocchi", "flat-limit")


@dataclass
class ExperimentConfig:
    """All experiment settings; unused keys are ignored by a given command.

    ``nodes`` overrides ``n``/``strategy``; ``t`` defaults to the nodes for
    ``theorem1``.
    """

    command: str = ""
    function: str = "rational-pole:5"
    interval: list = field(default_factory=lambda: [-1.0, 1.0])
    x: list | None = None
    t: list | None = None
    nodes: list | None = None
    x0: float | None = None
    n: int = 3
    n_min: int = 2
    n_max: int = 20
    strategy: str = "equispaced"
    basis: str = "gaussian"
    formula: str = "theorem1"
    eps: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    samples: int = 100_000
    seed: int = 0
    block: int = 1 << 16
    grid: int | None = None
    iterations: int = 15
    x1: float | None = None
    output: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _interval(text: str) -> list[float]:
    v = _floats(text)
    if len(v) != 2 or not v[0] < v[1]:
        raise argparse.ArgumentTypeError("interval must be 'a,b' with a < b")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hciz-interp", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        p.add_argument("--output", default=S, help="JSON output path (CSV written alongside)")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--function", default=S, help="catalog id, e.g. rational-pole:5")
        p.add_argument("--interval", type=_interval, default=S, help="a,b")

    p = sub.add_parser("hciz", help="unitary-group integral: Monte Carlo vs determinant")
    common(p)
    p.add_argument("--x", type=_floats, default=S)
    p.add_argument("--t", type=_floats, default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--block", type=int, default=S)

    p = sub.add_parser("errcheck", help="Monte Carlo error formulas vs direct interpolation")
    common(p)
    p.add_argument("--formula", choices=FORMULAS, default=S)
    p.add_argument("--nodes", type=_floats, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--strategy", choices=STRATEGIES, default=S)
    p.add_argument("--t", type=_floats, default=S)
    p.add_argument("--x0", type=float, default=S)
    p.add_argument("--eps", type=_floats, default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--block", type=int, default=S)
    p.add_argument("--grid", type=int, default=S)

    p = sub.add_parser("converge", help="sup-error convergence table")
    common(p)
    p.add_argument("--basis", choices=BASES, default=S)
    p.add_argument("--strategy", choices=STRATEGIES, default=S)
    p.add_argument("--n-min", dest="n_min", type=int, default=S)
    p.add_argument("--n-max", dest="n_max", type=int, default=S)
    p.add_argument("--grid", type=int, default=S)

    p = sub.add_parser("ei", help="expected-improvement minimization trace")
    common(p)
    p.add_argument("--iterations", type=int, default=S)
    p.add_argument("--x1", type=float, default=S)
    p.add_argument("--grid", type=int, default=S)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    flags = {k: v for k, v in vars(args).items() if k != "config"}
    data.update(flags)
    return ExperimentConfig.from_dict(data)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Output:
    """Collects the JSON payload and an optional CSV table, then writes both."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.start = time.perf_counter()
        self.payload: dict = {}
        self.table: tuple | None = None

    def write(self, status: str = "ok") -> None:
        meta = {
            "config": asdict(self.cfg),
            "versions": {"hciz_interp": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "wall_time": time.perf_counter() - self.start,
            "status": status,
        }
        doc = json.dumps(_json_safe({**self.payload, "meta": meta}), indent=2, sort_keys=True)
        if self.cfg.output:
            path = Path(self.cfg.output)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(doc + "\n")
            if self.table is not None:
                path.with_suffix(".csv").write_text(csv_text(*self.table))
        else:
            if self.table is not None:
                sys.stdout.write(csv_text(*self.table))
            sys.stdout.write(doc + "\n")


def cmd_hciz(cfg: ExperimentConfig, out: Output) -> None:
    if cfg.x is None or cfg.t is None:
        raise ConfigError("hciz needs --x and --t")
    p = HcizProblem(cfg.x, cfg.t)
    est = hciz_z_montecarlo(p, cfg.samples, RngStream(cfg.seed), cfg.block)
    if est.oracle is None:
        hciz_z_determinant(p)  # re-raise the precise reason
    out.payload = {
        "z_mc": est.mean,
        "std_error": est.std_error,
        "samples": est.samples,
        "z_det": est.oracle,
        "sigma_distance": est.z_score(),
    }


def _nodes(cfg: ExperimentConfig) -> NodeSet:
    if cfg.nodes is not None:
        return NodeSet(cfg.nodes, tuple(cfg.interval) if cfg.nodes else None)
    return NodeSet.from_strategy(cfg.strategy, cfg.n, tuple(cfg.interval), RngStream(cfg.seed, 1))


def cmd_errcheck(cfg: ExperimentConfig, out: Output) -> None:
    f = from_id(cfg.function)
    nodes = _nodes(cfg)
    if cfg.formula == "flat-limit":
        table = flat_limit_check(nodes, f, cfg.eps, cfg.grid or 2001)
        out.table = (("eps", "sup_diff"), table.rows())
        out.payload = {"formula": cfg.formula, "nodes": nodes.nodes.tolist(),
                       "eps": table.eps, "sup_diff": table.sup_diff,
                       "ratios": table.ratios, "monotone": table.monotone,
                       "first_order": table.first_order()}
        return
    if cfg.x0 is None:
        raise ConfigError(f"{cfg.formula} needs --x0")
    rng = RngStream(cfg.seed)
    x0 = float(cfg.x0)
    if cfg.formula == "theorem1":
        t = nodes.nodes if cfg.t is None else np.asarray(cfg.t, dtype=float)
        p = HcizProblem(nodes.nodes, t, x0=x0)
        est = theorem1_error_mc(p, f, cfg.samples, rng, block=cfg.block)
        direct = direct_error_exponential(p, f)
    elif cfg.formula == "corollary1":
        est = corollary1_error_mc(nodes, f, x0, cfg.samples, rng, block=cfg.block)
        direct = direct_error_gaussian(nodes, f, x0)
    elif cfg.formula == "hermite-genocchi":
        est = hermite_genocchi_error_mc(nodes, f, x0, cfg.samples, rng, block=cfg.block)
        direct = direct_error_polynomial(nodes, f, x0)
    else:
        raise ConfigError(f"unknown formula {cfg.formula!r}; choose from {FORMULAS}")
    out.payload = {"formula": cfg.formula, "nodes": nodes.nodes.tolist(), "x0": x0,
                   "mc": est.mean, "std_error": est.std_error, "samples": est.samples,
                   "direct": direct, "z_score": est.z_score(direct)}


def cmd_converge(cfg: ExperimentConfig, out: Output) -> None:
    f = from_id(cfg.function)
    if cfg.n_min < 1 or cfg.n_max < cfg.n_min:
        raise ConfigError("need 1 <= n_min <= n_max")
    header = ("n", "sup_error", "residual", "ratio_estimate")
    try:
        report = run_convergence(f, cfg.basis, cfg.strategy, range(cfg.n_min, cfg.n_max + 1),
                                 tuple(cfg.interval), cfg.grid or 2001, RngStream(cfg.seed, 1))
    except IllConditioned as exc:
        if exc.partial is not None:
            out.table = (header, exc.partial.rows())
            out.payload = {**exc.partial.summary(), "last_good": exc.last_good}
        raise
    out.table = (header, report.rows())
    out.payload = report.summary()


def cmd_ei(cfg: ExperimentConfig, out: Output) -> None:
    from .ei import CSV_FIELDS, DEFAULT_GRID

    f = from_id(cfg.function)
    try:
        trace = run_ei(f, tuple(cfg.interval), cfg.iterations, cfg.x1,
                       cfg.grid or DEFAULT_GRID, RngStream(cfg.seed))
    except IllConditioned as exc:
        if exc.partial is not None:
            out.table = (CSV_FIELDS, exc.partial.rows())
            out.payload = exc.partial.summary()
        raise
    out.table = (CSV_FIELDS, trace.rows())
    out.payload = trace.summary()


COMMANDS = {"hciz": cmd_hciz, "errcheck": cmd_errcheck, "converge": cmd_converge, "ei": cmd_ei}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        parser.error(str(exc))
    out = Output(cfg)
    try:
        COMMANDS[cfg.command](cfg, out)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        out.write(status="numerical-failure")
        return EXIT_NUMERIC
    except (HcizInterpError, ValueError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out.write()
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
