"""Config-driven experiment runner."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import verify
from .config import (
    EXPERIMENT_NAMES,
    ConfigError,
    ExperimentConfig,
    build_field_spec,
    build_stable_spec,
    load_config,
    parse_config,
)
from .field import SignClass, joint_cf, sample_field
from .stable import (
    Association,
    as_field_spec,
    association_classify,
    null_check,
    sign_masses,
    spectral_measure,
    stable_cf,
)
from .verify import ExperimentReport, Statistic, Verdict

log = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "statistic", "estimate", "std_error", "threshold", "verdict", "n_samples", "seed")


def _select(ts, idx):
    return ts if idx is None else [ts[i] for i in idx]


def _stable_spectral(cfg, exp, ts, seed):
    sspec = build_stable_spec(cfg, exp.alpha)
    atoms = spectral_measure(sspec, ts)
    s_minus, s_plus = sign_masses(atoms)
    cls = association_classify(atoms)
    stats = []
    sign = cfg.kernel.sign_class
    if sign is SignClass.MIXED:
        stats.append(Statistic("gamma_s_minus", s_minus, 0.0, math.nan, Verdict.PASS, 0))
    else:
        expected = {Association.ASSOCIATED, Association.BOTH}
        stats.append(Statistic("gamma_s_minus", s_minus, 0.0, 0.0, verify._judge(cls in expected), 0))
    stats.append(Statistic("gamma_s_plus", s_plus, 0.0, math.nan, Verdict.PASS, 0))
    if len(ts) == 1:
        # one-dimensional marginal: compare with the generic ID path
        grid = [[0.5], [1.0], [2.0]] if exp.theta is None else exp.theta
        fspec = as_field_spec(sspec)
        for k, th in enumerate(grid):
            a = stable_cf(atoms, sspec.alpha, th)
            b = joint_cf(fspec, ts, th)
            gap = abs(a - b)
            stats.append(Statistic(f"cf_consistency_{k}", gap, 0.0, exp.cf_tol,
                                   verify._judge(gap <= exp.cf_tol), 0, {"theta": list(th)}))
    params = {"alpha": sspec.alpha, "classification": cls.value, "spectral_measure": atoms.to_dict()}
    return ExperimentReport("stable_spectral", params, stats, seed)


def _null_check(cfg, exp, ts, seed, N, eps):
    sspec = build_stable_spec(cfg, exp.alpha) if exp.alpha is not None or cfg.characteristics.rho.family == "stable" else None
    fspec = build_field_spec(cfg)
    stats = []
    for k, t in enumerate(ts):
        f = lambda x, _t=np.asarray(t, float): fspec.kernels(_t, x)
        if sspec is not None:
            res = null_check(sspec, f)
            integral, spec = res.integral, as_field_spec(sspec)
        else:
            part = fspec.partition
            integral = float(np.sum(np.abs(f(part.points)) * part.masses))
            spec = fspec
        draws = sample_field(spec, [t], 1, eps, verify.derive_seed(seed, 40, k), N)[:, 0]
        nonzero = int(np.count_nonzero(draws))
        degenerate = integral == 0.0
        stats.append(Statistic(f"integral_{k}", integral, 0.0, 0.0, Verdict.PASS, 0))
        ok = nonzero == 0 if degenerate else True
        stats.append(Statistic(f"nonzero_draws_{k}", float(nonzero), 0.0, 0.0,
                               verify._judge(ok), N, {"degenerate": degenerate}))
    return ExperimentReport("null_check", {"N": N, "eps": eps}, stats, seed)


def _run_one(cfg: ExperimentConfig, exp, index: int) -> ExperimentReport:
    seed = verify.derive_seed(cfg.seed, index)
    N, eps, level = cfg.samples, cfg.epsilon, cfg.level
    ts = [np.asarray(t, dtype=float) for t in cfg.t_points]
    common = dict(level=level, eps=eps, seed=seed)
    name = exp.name
    if name == "stable_spectral":
        return _stable_spectral(cfg, exp, _select(ts, exp.t_index), seed)
    if name == "null_check":
        return _null_check(cfg, exp, _select(ts, exp.t_index), seed, N, eps)
    spec = build_field_spec(cfg)
    if name == "cf_check":
        return verify.test_cf(spec, _select(ts, exp.t_index), exp.theta, N, **common)
    if name == "independence":
        return verify.test_independence(spec, ts, exp.K, exp.L, N, exp.theta, **common)
    if name == "association":
        return verify.test_association(spec, ts, exp.I, exp.n_pairs, N, **common)
    if name == "negative_association":
        return verify.test_negative_association(spec, ts, exp.I, exp.J, exp.n_pairs, N, **common)
    if name == "id":
        return verify.test_id(spec, _select(ts, exp.t_index), exp.n_fold, N, exp.theta, **common)
    if name == "continuity":
        return verify.test_stoch_continuity(spec, exp.t, exp.radii, exp.eps_x, N,
                                            direction=exp.direction, **common)
    raise ConfigError([f"experiments.{index}.name: unknown experiment '{name}'"])


def run_experiment(config: ExperimentConfig, only: Sequence[str] | None = None) -> list[ExperimentReport]:
    """Run the configured experiments in order; a failing experiment yields an inconclusive report."""
    build_field_spec(config)
    reports = []
    for index, exp in enumerate(config.experiments):
        if only and exp.name not in only:
            continue
        try:
            reports.append(_run_one(config, exp, index))
        except Exception as exc:  # noqa: BLE001 - one broken experiment must not abort the batch
            log.warning("experiment %d (%s) failed: %s", index, exp.name, exc)
            reports.append(ExperimentReport(
                exp.name, {"error": f"{type(exc).__name__}: {exc}"}, [],
                verify.derive_seed(config.seed, index), verdict=Verdict.INCONCLUSIVE,
            ))
    return reports


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def render_report(reports: Sequence[ExperimentReport], fmt: str = "json", timings: bool = False) -> str:
    if fmt == "json":
        data = [r.to_dict(include_runtime=timings) for r in reports]
        return json.dumps(data, indent=2, default=_json_default) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = CSV_COLUMNS + (("runtime",) if timings else ())
        writer.writerow(cols)
        for r in reports:
            for s in r.statistics:
                row = [r.name, s.name, s.estimate, s.std_error, s.threshold, s.verdict.value, s.n_samples, r.seed]
                if timings:
                    row.append(r.runtime)
                writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    raise ValueError(f"unknown format '{fmt}'")


def emit_report(reports: Sequence[ExperimentReport], format: str = "json", path=None, timings: bool = False) -> None:
    """Write reports as JSON or CSV to ``path`` (stdout when None)."""
    text = render_report(reports, format, timings)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="idfield", description="Run random-field verification experiments.")
    p.add_argument("--config", required=True, help="YAML or JSON experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override the config sample count")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--experiment", action="append", choices=EXPERIMENT_NAMES,
                   help="run only experiments with this name (repeatable)")
    p.add_argument("--timings", action="store_true", help="include runtimes in the output")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.samples is not None:
            overrides["samples"] = args.samples
        if overrides:
            cfg = parse_config({**cfg.model_dump(mode="json"), **overrides})
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    reports = run_experiment(cfg, args.experiment)
    try:
        emit_report(reports, args.format, args.out, args.timings)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return 1
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
