"""Command-line entry point.

Exit codes: 0 success, 1 verification or verdict failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GeometryError, MetricField, builtin_metric, load_metric_file, parse_signature
from .integrability import (
    DEFAULT_TOL,
    FD_TOL,
    PointData,
    _conditions_from_data,
    eigenframe_at,
    haantjes_from_data,
    torsion_from_data,
)
from .killing import killing_residual, load_killing_file
from .report import IntegrabilityReport, ReportError, emit_report
from .tensor import Signature, TensorError
from .theorem import (
    PatternError,
    check_pattern,
    default_patterns,
    independence_witness,
    make_rng,
    parse_pattern,
    verify_redundancy,
)
from .integrability import eigenframe_residuals

DEFAULT_POINTS = 20


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    dim: int | None = None
    trials: int = 1000
    seed: int = 7
    tolerance: float | None = None
    signature: Signature | None = None
    pattern: tuple[int, ...] | None = None
    metric: str | None = None
    killing: str | None = None
    points: list = field(default_factory=list)
    lam: tuple[float, ...] | None = None
    format: str = "json"
    out: str | None = None

    def echo(self) -> dict:
        d = {"command": self.command, "dim": self.dim}
        if self.command == "verify-theorem":
            d.update(trials=self.trials, pattern=list(self.pattern) if self.pattern else None)
        if self.command in ("check", "torsion"):
            d.update(
                metric=self.metric,
                killing=self.killing,
                signature=str(self.signature) if self.signature else None,
                points=[list(p) for p in self.points],
            )
        if self.command == "witness":
            d.update({"lambda": list(self.lam) if self.lam else None})
        d.update(seed=self.seed, format=self.format)
        return d


def _floats(text: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nijenhuis", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dim_default=None):
        p.add_argument("--dim", type=int, default=dim_default)
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--tolerance", type=float, default=None)
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("verify-theorem", help="randomized check that the third condition is redundant")
    common(p, 3)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--pattern", default=None, help="eigenvalue multiplicities, e.g. 2,1")

    for name, text in (("check", "evaluate the Killing and integrability conditions of a tensor field"),
                       ("torsion", "dump the Nijenhuis torsion at points")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--metric", required=True, help="euclidean|minkowski|sphere[:R]|hyperbolic[:R] or a metric file")
        p.add_argument("--killing", required=True, help="Killing tensor file")
        p.add_argument("--signature", default=None, help="p,q for minkowski")
        p.add_argument("--point", action="append", default=[], help="x1,...,xn (repeatable)")

    p = sub.add_parser("witness", help="find S satisfying the first condition but not the second")
    common(p, 3)
    p.add_argument("--lambda", dest="lam", default=None, help="eigenvalues, default 1,2,...,dim")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, dim=args.dim, seed=args.seed, tolerance=args.tolerance,
                    format=args.format, out=args.out)
    if cfg.dim is not None and not 2 <= cfg.dim <= 8:
        raise ConfigError("dim must be in 2..8")
    if cfg.tolerance is not None and not cfg.tolerance > 0:
        raise ConfigError("tolerance must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if cfg.command == "verify-theorem":
        cfg.trials = args.trials
        if cfg.trials < 1:
            raise ConfigError("trials must be at least 1")
        if args.pattern:
            try:
                cfg.pattern = check_pattern(cfg.dim, parse_pattern(args.pattern))
            except PatternError as exc:
                raise ConfigError(str(exc)) from None
    elif cfg.command in ("check", "torsion"):
        cfg.metric, cfg.killing = args.metric, args.killing
        if args.signature:
            try:
                cfg.signature = parse_signature(args.signature)
            except (ValueError, TensorError) as exc:
                raise ConfigError(str(exc)) from None
        cfg.points = [_floats(p, "point") for p in args.point]
    elif cfg.command == "witness":
        if cfg.dim < 3:
            raise ConfigError("witness needs dim >= 3")
        cfg.lam = _floats(args.lam, "lambda") if args.lam else tuple(float(i) for i in range(1, cfg.dim + 1))
        if len(cfg.lam) != cfg.dim:
            raise ConfigError(f"lambda has {len(cfg.lam)} entries, expected {cfg.dim}")
    return cfg


def resolve_metric(cfg: RunConfig) -> MetricField:
    spec = cfg.metric
    if Path(spec).is_file():
        m = load_metric_file(spec)
        if cfg.dim is not None and cfg.dim != m.dim:
            raise ConfigError(f"--dim {cfg.dim} does not match metric file dim {m.dim}")
        return m
    name, _, radius = spec.partition(":")
    if cfg.dim is None:
        raise ConfigError(f"--dim is required for built-in metric {name!r}")
    try:
        r = float(radius) if radius else 1.0
    except ValueError:
        raise ConfigError(f"bad radius {radius!r}") from None
    if name != "minkowski" and cfg.signature is not None and cfg.signature.minus:
        raise ConfigError(f"{name} is Riemannian; signature {cfg.signature} does not apply")
    try:
        return builtin_metric(name, cfg.dim, cfg.signature, r)
    except GeometryError as exc:
        raise ConfigError(f"{exc} (or no such metric file)") from None


def _points(cfg: RunConfig, m: MetricField):
    if not cfg.points:
        rng = make_rng(cfg.seed)
        return [m.random_point(rng) for _ in range(DEFAULT_POINTS)]
    pts = []
    for coords in cfg.points:
        if len(coords) != m.dim:
            raise ConfigError(f"point {coords} has {len(coords)} coordinates, expected {m.dim}")
        p = m.point(coords)
        if not p.admissible:
            raise ConfigError(f"point {coords} is outside the chart domain of {m.describe()}")
        pts.append(p)
    return pts


def _effective_tolerance(cfg, m, k) -> float:
    if cfg.tolerance is not None:
        return cfg.tolerance
    fd = not m.closed_form or getattr(k, "uses_finite_differences", True)
    return FD_TOL if fd else DEFAULT_TOL


def run_check_field(cfg: RunConfig) -> tuple[int, IntegrabilityReport]:
    m = resolve_metric(cfg)
    k = load_killing_file(cfg.killing, m)
    tol = _effective_tolerance(cfg, m, k)
    report = IntegrabilityReport("check", cfg.echo(), tol, cfg.seed)
    not_killing, contradiction = [], []
    for p in _points(cfg, m):
        d = PointData.at(k, m, p)
        res = killing_residual(k, m, p)
        scale = max(float(np.max(np.abs(d.dk))), float(np.max(np.abs(d.k))), 1e-300)
        kres = res.max_abs() / scale
        cond = _conditions_from_data(d, tol)
        frame = eigenframe_at(k, m, p)
        rec = {
            "point": list(p.coords),
            "killing_residual": kres,
            "killing_ok": kres <= tol,
        }
        for i, name in enumerate(("c1", "c2", "c3")):
            rec[name] = {"residual": cond.norms[i], "verdict": cond.verdicts[i]}
        rec["integrable"] = cond.integrable
        rec["haantjes_max_abs"] = float(np.max(np.abs(haantjes_from_data(d))))
        rec["eigenvalues"] = None if frame is None else [float(v) for v in frame.eigenvalues]
        report.points.append(rec)
        if kres > tol:
            not_killing.append(p.coords)
        elif cond.integrable and not cond.verdicts[2]:
            contradiction.append(p.coords)
    if not_killing:
        report.notes.append(
            f"killing residual exceeds tolerance at {len(not_killing)} point(s): the input is not a Killing tensor, "
            "so the third condition is not guaranteed to follow from the first two"
        )
    if contradiction:
        report.notes.append(f"third condition fails where the first two hold at {len(contradiction)} point(s)")
    code = 1 if (not_killing or contradiction) else 0
    return code, report


def run_torsion(cfg: RunConfig) -> tuple[int, IntegrabilityReport]:
    m = resolve_metric(cfg)
    k = load_killing_file(cfg.killing, m)
    report = IntegrabilityReport("torsion", cfg.echo(), _effective_tolerance(cfg, m, k), cfg.seed)
    for p in _points(cfg, m):
        n = torsion_from_data(PointData.at(k, m, p))
        report.points.append({"point": list(p.coords), "torsion": n.tolist(), "torsion_max_abs": float(np.max(np.abs(n)))})
    return 0, report


def run_verify_theorem(cfg: RunConfig) -> tuple[int, IntegrabilityReport]:
    tol = cfg.tolerance if cfg.tolerance is not None else DEFAULT_TOL
    patterns = [cfg.pattern] if cfg.pattern else default_patterns(cfg.dim)
    report = IntegrabilityReport("verify-theorem", cfg.echo(), tol, cfg.seed, theorem=[])
    ok = True
    for pattern in patterns:
        r = verify_redundancy(cfg.dim, pattern, cfg.trials, cfg.seed, tol)
        print(f"dim={cfg.dim} pattern={pattern} elapsed={r.elapsed:.2f}s", file=sys.stderr)
        report.theorem.append(r.as_dict())
        ok = ok and r.verified
    return (0 if ok else 1), report


def run_witness(cfg: RunConfig) -> tuple[int, IntegrabilityReport]:
    tol = cfg.tolerance if cfg.tolerance is not None else DEFAULT_TOL
    report = IntegrabilityReport("witness", cfg.echo(), tol, cfg.seed)
    w = independence_witness(cfg.dim, cfg.lam, cfg.seed)
    if w is None:
        report.notes.append("the first two conditions coincide for this eigenvalue vector; no witness")
        return 1, report
    res = eigenframe_residuals(w.lam, w.s)
    report.witness = {"lambda": [float(v) for v in w.lam], "s": w.s.tolist(), **res.as_dict()}
    return 0, report


COMMANDS = {
    "verify-theorem": run_verify_theorem,
    "check": run_check_field,
    "torsion": run_torsion,
    "witness": run_witness,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        code, report = COMMANDS[cfg.command](cfg)
        emit_report(report, cfg.format, cfg.out)
    except (ConfigError, GeometryError, TensorError, ReportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
