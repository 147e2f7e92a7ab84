"""Command-line front end.

Subcommands: ``simulate-lrp``, ``simulate-pdmp``, ``density``, ``laplace``,
``validate-schedule`` and ``compare``.  Exit status is 0 on success, 1 on
a configuration or input error and 2 when a comparison fails.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import io
from .analytics import density_reconstruct, laplace_nu
from .compare import IncompatibleInputs, compare_tables
from .config import CompareBlock, ConfigError, ExperimentConfig, apply_overrides, load_config
from .lrp import run_batch, run_pi_zero_batch
from .params import Coupled, PowerLaw, derived_constants, validate_schedule
from .pdmp import ergodic_moments, occupation_histogram, simulate_path, time_average
from .rng import Stream

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


class ExploratoryScheduleWarning(UserWarning):
    pass


def _out_dir(cfg: ExperimentConfig) -> Path:
    d = Path(cfg.outputs.directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.json").write_text(cfg.to_json() + "\n")
    return d


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------


def cmd_simulate_lrp(cfg: ExperimentConfig) -> int:
    if cfg.schedule is None:
        raise ConfigError("simulate-lrp needs a schedule block")
    params = cfg.params
    report = validate_schedule(cfg.schedule, params)
    if not report.theorems:
        warnings.warn(
            "schedule satisfies the hypotheses of no convergence result; running in exploratory mode",
            ExploratoryScheduleWarning,
            stacklevel=2,
        )
    conf = cfg.to_dict()
    out = _out_dir(cfg)
    count = cfg.seeds.count
    if count < 0:
        raise ConfigError("seeds.count must be non-negative")
    try:
        if params.pi == 0.0 and isinstance(cfg.schedule, Coupled):
            batch = run_pi_zero_batch(
                cfg.schedule.g, cfg.schedule.a_coef, params, cfg.x0, cfg.n_steps,
                cfg.seeds.master, count, jobs=cfg.jobs,
            )
        else:
            batch = run_batch(
                cfg.schedule, params, cfg.x0, cfg.n_steps, cfg.seeds.master, count, jobs=cfg.jobs
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.outputs.trajectories:
        for i in range(count):
            t = batch.trajectory(i)
            io.write_trajectory(out / "trajectories" / f"traj_{t.index:06d}.csv", t, conf)
    io.write_batch_summary(out / "batch_summary.csv", batch, conf)
    target = None
    if params.pi > 0 and isinstance(cfg.schedule, PowerLaw):
        target = derived_constants(params, 1.0).nu_mean
    io.write_checkpoint_summary(out / "checkpoint_summary.csv", batch, conf, target)
    _write_json(out / "validation.json", report.to_dict())
    if count:
        print(
            f"{count} trajectories, n = {cfg.n_steps}: median terminal x = "
            f"{np.median(batch.terminal_x):.6g}, median terminal y = {np.median(batch.terminal_y):.6g}"
        )
    else:
        print("no trajectories requested; wrote empty summary")
    return EXIT_OK


def _pdmp_bins(cfg, params):
    b = cfg.pdmp
    lo = params.r_A if b.bin_lo is None else b.bin_lo
    hi = params.r_A + 40.0 * b.g if b.bin_hi is None else b.bin_hi
    if b.bin_width <= 0 or hi <= lo:
        raise ConfigError("need bin_width > 0 and bin_hi > bin_lo")
    n = int(math.ceil((hi - lo) / b.bin_width - 1e-9))
    return lo + b.bin_width * np.arange(n + 1)


def cmd_simulate_pdmp(cfg: ExperimentConfig) -> int:
    b = cfg.pdmp
    if b is None:
        raise ConfigError("simulate-pdmp needs a pdmp block")
    if not b.horizon > 0:
        raise ConfigError("pdmp.horizon must be positive")
    if not 0.0 <= b.burn_in < 1.0:
        raise ConfigError("pdmp.burn_in must lie in [0, 1)")
    if b.g <= 0:
        raise ConfigError("pdmp.g must be positive")
    params = cfg.params
    consts = derived_constants(params, b.g)
    y0 = b.y0
    if y0 is None:
        if consts.nu_mean is None:
            raise ConfigError("pdmp.y0 is required when p_A == p_B")
        y0 = consts.nu_mean
    conf = cfg.to_dict()
    out = _out_dir(cfg)
    path = simulate_path(y0, b.horizon, params, b.g, Stream(cfg.seeds.master, 0))
    hist = occupation_histogram(path, _pdmp_bins(cfg, params), b.burn_in)
    mean, var = ergodic_moments(path, b.burn_in)
    _, mean_se = time_average(path, lambda y: y, b.burn_in, b.n_batches)
    _, m2_se = time_average(path, lambda y: y * y, b.burn_in, b.n_batches)
    moments = {
        "mean": mean,
        "variance": var,
        "mean_se": mean_se,
        "second_moment_se": m2_se,
        "n_jumps": path.n_jumps,
        "burn_in": b.burn_in,
        "n_batches": b.n_batches,
        "error_bars": "batch means over equal time blocks after burn-in",
        "closed_form_mean": consts.nu_mean,
        "closed_form_variance": consts.nu_var,
    }
    if cfg.outputs.path:
        io.write_path(out / "path.csv", path, conf)
    io.write_histogram(out / "histogram.csv", hist, conf, meta={"mean": mean, "variance": var})
    _write_json(out / "moments.json", moments)
    print(f"{path.n_jumps} jumps; time-average mean {mean:.6g} +- {mean_se:.2g}, variance {var:.6g}")
    return EXIT_OK


def cmd_density(cfg: ExperimentConfig) -> int:
    params = cfg.params
    if params.pi <= 0:
        raise ConfigError("the stationary density needs p_B < p_A")
    b = cfg.density
    try:
        dens = density_reconstruct(params, b.g, b.n_max, b.points_per_interval)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    conf = cfg.to_dict()
    out = _out_dir(cfg)
    io.write_density(out / "density.csv", dens, conf, b.grid_step)
    consts = derived_constants(params, b.g)
    _write_json(
        out / "density_summary.json",
        {
            "boundary": dens.boundary.value,
            "lambda0": dens.lambda0,
            "tail_mass": dens.tail_mass,
            "tail_rate": dens.tail_rate,
            "mean": dens.mean(),
            "variance": dens.variance(),
            "closed_form_mean": consts.nu_mean,
            "closed_form_variance": consts.nu_var,
            "d": consts.d,
            "g_star": consts.g_star,
        },
    )
    print(f"boundary at r_A: {dens.boundary.value}; tail mass {dens.tail_mass:.3g}")
    return EXIT_OK


def cmd_laplace(cfg: ExperimentConfig) -> int:
    params = cfg.params
    if params.pi <= 0:
        raise ConfigError("the Laplace transform of the stationary law needs p_B < p_A")
    b = cfg.laplace
    ps = np.asarray(b.p, dtype=float)
    if np.any(ps < 0):
        raise ConfigError("laplace.p must be non-negative")
    vals, unc = np.empty_like(ps), np.empty_like(ps)
    for i, p in enumerate(ps):
        lv = laplace_nu(float(p), params, b.g, b.tol, return_uncertainty=True)
        vals[i], unc[i] = lv.value, lv.uncertainty
    out = _out_dir(cfg)
    io.write_laplace(out / "laplace.csv", ps, vals, unc, cfg.to_dict())
    print(f"wrote {ps.size} Laplace transform values")
    return EXIT_OK


def cmd_validate_schedule(cfg: ExperimentConfig) -> int:
    if cfg.schedule is None:
        raise ConfigError("validate-schedule needs a schedule block")
    report = validate_schedule(cfg.schedule, cfg.params)
    out = _out_dir(cfg)
    _write_json(out / "validation.json", report.to_dict())
    for k, v in report.to_dict().items():
        if isinstance(v, bool):
            print(f"{k}: {'yes' if v else 'no'}")
    print("results enabled: " + (", ".join(report.theorems) or "none"))
    return EXIT_OK


def cmd_compare(block: CompareBlock, out: Path) -> int:
    if not block.empirical or not block.analytic:
        raise ConfigError("compare needs an empirical and an analytic file")
    t0 = time.perf_counter()
    try:
        emp, ana = io.read_csv(block.empirical), io.read_csv(block.analytic)
        report = compare_tables(emp, ana, block.l1_tol, block.mean_tol, block.var_tol)
    except (OSError, IncompatibleInputs) as exc:
        raise ConfigError(str(exc)) from None
    report.runtime = time.perf_counter() - t0
    report.seed_info = {
        "empirical": {"file": block.empirical, "config_sha256": emp.meta.get("config_sha256")},
        "analytic": {"file": block.analytic, "config_sha256": ana.meta.get("config_sha256")},
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(report.to_json() + "\n")
    text = report.to_text()
    (out / "comparison.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK if report.passed else EXIT_FAILED


# ---------------------------------------------------------------------------


COMMANDS = {
    "simulate-lrp": cmd_simulate_lrp,
    "simulate-pdmp": cmd_simulate_pdmp,
    "density": cmd_density,
    "laplace": cmd_laplace,
    "validate-schedule": cmd_validate_schedule,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrpbandit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment JSON file")
        p.add_argument("--seed", type=int, help="master seed (overrides seeds.master)")
        p.add_argument("--jobs", type=int, help="worker threads")
        p.add_argument("--out", help="output directory (overrides outputs.directory)")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config field by dotted path; repeatable",
        )
        if name == "compare":
            p.add_argument("--empirical", help="histogram or density CSV")
            p.add_argument("--analytic", help="histogram or density CSV")
    return parser


def _overrides(args) -> list[str]:
    extra = []
    if args.seed is not None:
        extra.append(f"seeds.master={args.seed}")
    if args.jobs is not None:
        extra.append(f"jobs={args.jobs}")
    if args.out is not None:
        extra.append(f"outputs.directory={json.dumps(args.out)}")
    for key in ("empirical", "analytic"):
        v = getattr(args, key, None)
        if v is not None:
            extra.append(f"compare.{key}={json.dumps(v)}")
    return list(args.set) + extra


def _compare_block(args) -> tuple[CompareBlock, Path]:
    if args.config is not None:
        cfg = load_config(args.config, _overrides(args))
        return cfg.compare, Path(cfg.outputs.directory)
    # no experiment config: only compare.* and the output directory apply
    d = apply_overrides({}, _overrides(args))
    bad = set(d) - {"compare", "outputs", "seeds", "jobs"}
    if bad:
        raise ConfigError(f"without --config only compare.* can be set, got {sorted(bad)}")
    try:
        block = CompareBlock(**d.get("compare", {}))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return block, Path(d.get("outputs", {}).get("directory", "out"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            block, out = _compare_block(args)
            return cmd_compare(block, out)
        if args.config is None:
            raise ConfigError("--config is required")
        cfg = load_config(args.config, _overrides(args))
        if cfg.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
