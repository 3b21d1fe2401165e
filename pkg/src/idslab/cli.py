"""Command-line front end.

Every subcommand reads a JSON config (with ``"version": 1``; unknown keys are
rejected), writes a JSON report plus CSV curves to ``--out``, and exits with
0 on success, 1 when an asserted bound is violated, 2 on usage/config errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, kyfan
from .experiments import ConfigError, CounterexampleConfig, ExperimentConfig, ExperimentReport
from .ids import default_grid, empirical_ids, log_holder_diagnostic, modulus_of_continuity
from .lattice import BoxShape, LatticeOperator
from .measures import ProbabilityMeasure, discretize, kr_distance, metric_sandwich_check, point_mass, quantile, \
    uniforms
from .parallel import default_workers
from .seeding import rng_for
from .spectra import spectrum

SUBCOMMANDS = ("spectrum", "ids", "wasserstein", "kyfan-check", "experiment", "counterexample")


def _require_keys(cfg: dict, allowed: set, required: set = frozenset()):
    unknown = sorted(set(cfg) - allowed - {"version"})
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if cfg.get("version") != experiments.CONFIG_VERSION:
        raise ConfigError(f"config version must be {experiments.CONFIG_VERSION}")
    missing = sorted(required - set(cfg))
    if missing:
        raise ConfigError(f"missing config keys: {missing}")


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows([repr(float(x)) for x in row] for row in rows)
    return buf.getvalue()


def emit_plot_data(report: ExperimentReport, out_dir) -> list[Path]:
    """Write one ``<curve>.csv`` per curve in the report; returns the paths."""
    out_dir = Path(out_dir)
    paths = []
    for name in sorted(report.curves):
        curve = report.curves[name]
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{name}.csv"
        path.write_text(_csv_text(curve["columns"], curve["rows"]), encoding="utf-8")
        paths.append(path)
    return paths


# -- subcommand handlers: (config dict, args) -> (report, {filename: text}) --


def _grid(cfg: dict, mu: ProbabilityMeasure, dimension: int) -> np.ndarray:
    g = cfg.get("grid")
    if g is None:
        return default_grid(mu, dimension)
    return np.linspace(g["start"], g["stop"], int(g["num"]))


def _cmd_spectrum(cfg, args):
    _require_keys(cfg, {"shape", "potential", "measure", "master_seed"}, {"shape"})
    shape = BoxShape(tuple(args.box or cfg["shape"]))
    if "potential" in cfg:
        V = cfg["potential"]
    else:
        mu = ProbabilityMeasure.from_dict(cfg["measure"]) if "measure" in cfg else point_mass(0.0)
        _, rng = rng_for(args.seed if args.seed is not None else cfg.get("master_seed", 0), 0)
        V = np.atleast_1d(quantile(mu, uniforms(rng, shape.volume)))
    op = LatticeOperator(shape, V)
    lam = spectrum(op)
    report = ExperimentReport("spectrum", inputs={"shape": list(shape.side_lengths)})
    report.aggregates.update({"n": lam.n, "trace": float(np.sum(op.diagonal)),
                              "eigenvalue_sum": float(np.sum(lam.eigenvalues))})
    lo, hi = op.gershgorin()
    report.check("min eigenvalue >= min V", lo, float(lam.eigenvalues[0]), 1e-9 * op.norm_bound())
    report.check("max eigenvalue <= 4d + max V", float(lam.eigenvalues[-1]), hi, 1e-9 * op.norm_bound())
    return report, {"spectrum.csv": lam.to_csv(), "spectrum.json": lam.to_json() + "\n",
                    "operator.json": json.dumps(op.to_dict(), sort_keys=True) + "\n"}


def _cmd_ids(cfg, args):
    _require_keys(cfg, {"shape", "measure", "n_samples", "grid", "master_seed", "deltas"}, {"shape", "measure"})
    shape = BoxShape(tuple(args.box or cfg["shape"]))
    mu = ProbabilityMeasure.from_dict(cfg["measure"])
    n_samples = args.samples or cfg.get("n_samples", 100)
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    grid = _grid(cfg, mu, shape.dimension)
    ids = empirical_ids(shape, mu, n_samples, grid, seed, args.workers)
    h = ids.spacing
    deltas = np.asarray(cfg.get("deltas") or h * np.unique(np.round(np.geomspace(1, len(grid) // 2, 32))),
                        dtype=float)
    omegas = [modulus_of_continuity(ids, d) for d in deltas]
    report = ExperimentReport("ids", inputs={"shape": list(shape.side_lengths), "measure": mu.to_dict(),
                                             "n_samples": n_samples, "master_seed": seed})
    small = deltas[deltas <= 0.5]
    report.aggregates["log_holder"] = log_holder_diagnostic(ids, small) if small.size else None
    report.add_curve("ids_curve", ["E", "N"], zip(ids.grid, ids.values))
    report.add_curve("omega", ["delta", "omega"], zip(deltas, omegas))
    return report, {"ids.json": ids.to_json() + "\n"}


def _cmd_wasserstein(cfg, args):
    _require_keys(cfg, {"mu", "mu_tilde", "discretization"}, {"mu", "mu_tilde"})
    mu = ProbabilityMeasure.from_dict(cfg["mu"])
    mu_t = ProbabilityMeasure.from_dict(cfg["mu_tilde"])
    n = int(cfg.get("discretization", 1024))
    d_kr = kr_distance(mu, mu_t)
    sandwich = metric_sandwich_check(discretize(mu, n), discretize(mu_t, n))
    report = ExperimentReport("wasserstein", inputs={"mu": mu.to_dict(), "mu_tilde": mu_t.to_dict()})
    report.aggregates.update({"d_kr": d_kr, "d_bl": sandwich["d_bl"], "sandwich": sandwich,
                              "discretized": not (mu.is_atomic and mu_t.is_atomic)})
    report.checks.append({"name": "d_bl <= d_kr <= max(A,1) d_bl", "lhs": sandwich["d_kr"],
                          "rhs": sandwich["upper"], "tol": 0.0, "margin": sandwich["upper"] - sandwich["d_kr"],
                          "holds": sandwich["holds"]})
    return report, {}


def _cmd_kyfan(cfg, args):
    _require_keys(cfg, {"n_pairs", "max_dim", "functions", "master_seed"})
    phis = [kyfan.ConvexTestFunction.parse(s) for s in cfg.get("functions", ["abs", "square", "hinge:0.5"])]
    n_pairs = args.samples or cfg.get("n_pairs", 1000)
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    records = kyfan.batch_check(n_pairs, phis, seed, max_dim=cfg.get("max_dim", 20))
    report = ExperimentReport("kyfan", inputs={"n_pairs": n_pairs, "functions": [p.tag for p in phis],
                                               "master_seed": seed})
    bad = [r for r in records if not r["holds"]]
    report.aggregates.update({"records": len(records), "violations": len(bad),
                              "worst_margin": min(r["margin"] for r in records)})
    report.check("violations", len(bad), 0)
    return report, {"kyfan.jsonl": kyfan.to_json_lines(records)}


def _cmd_experiment(cfg, args):
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.samples:
        cfg["n_samples"] = args.samples
    if args.box:
        cfg["shape"] = args.box
    return experiments.run(ExperimentConfig.from_dict(cfg), workers=args.workers), {}


def _cmd_counterexample(cfg, args):
    return experiments.counterexample_integrals(CounterexampleConfig.from_dict(cfg)), {}


HANDLERS = {
    "spectrum": _cmd_spectrum,
    "ids": _cmd_ids,
    "wasserstein": _cmd_wasserstein,
    "kyfan-check": _cmd_kyfan,
    "experiment": _cmd_experiment,
    "counterexample": _cmd_counterexample,
}


def _box(text: str) -> list[int]:
    try:
        return [int(s) for s in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"box must look like 500 or 20x20, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idslab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")
        p.add_argument("--samples", type=int, default=None, help="override the sample count")
        p.add_argument("--box", type=_box, default=None, help="override the box, e.g. 500 or 20x20")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is None:
        args.workers = default_workers()
    try:
        cfg = json.loads(args.config.read_text(encoding="utf-8"))
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        report, extra = HANDLERS[args.command](cfg, args)
    except (OSError, json.JSONDecodeError, ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"idslab {args.command}: {exc}", file=sys.stderr)
        return 2

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    emit_plot_data(report, args.out)
    for name, text in extra.items():
        (args.out / name).write_text(text, encoding="utf-8")
    print(f"{report.experiment_id}: {report.verdict}")
    return 0 if report.verdict == "holds" else 1


if __name__ == "__main__":
    sys.exit(main())
