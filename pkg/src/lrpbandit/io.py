"""CSV artifacts with ``#`` provenance headers.

Every file starts with comment lines ``# key: value``.  ``config_sha256`` and
``config`` (compact, key-sorted JSON) are always present; writers add
their own keys (overflow mass, boundary class, ...).  Floats are written
with 17 significant digits so files round-trip exactly and identical runs
produce identical bytes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analytics import PiecewiseDensity
from .lrp import BatchResult, Trajectory
from .pdmp import OccupationHistogram, PdmpPath

FLOAT_FMT = "%.17g"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


@dataclass
class CsvTable:
    columns: dict[str, np.ndarray]
    meta: dict[str, str]

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def config(self) -> dict:
        return json.loads(self.meta["config"])


def _fmt_meta(value) -> str:
    if isinstance(value, str):
        return value
    return canonical_json(value)


def write_csv(path, header, columns, config: dict, kind: str, meta: dict | None = None, int_columns=()):
    """Write equally long ``columns`` under ``header`` with a provenance block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# kind: {kind}",
        f"# config_sha256: {config_hash(config)}",
        f"# config: {canonical_json(config)}",
    ]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {_fmt_meta(v)}")
    lines.append(",".join(header))
    cols = [np.asarray(c) for c in columns]
    n = cols[0].size if cols else 0
    fmts = ["%d" if h in int_columns else FLOAT_FMT for h in header]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        if n:
            data = np.column_stack([c.astype(float) for c in cols])
            np.savetxt(fh, data, fmt=fmts, delimiter=",")
    return path


def read_csv(path) -> CsvTable:
    meta: dict[str, str] = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: missing header row")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return CsvTable({h: data[:, i] for i, h in enumerate(header)}, meta)


# ---------------------------------------------------------------------------
# simulation artifacts


def write_trajectory(path, traj: Trajectory, config: dict):
    return write_csv(
        path, ["n", "x", "y"], [traj.n, traj.x, traj.y], config, "trajectory",
        meta={"index": traj.index, "clamps": traj.clamps, "y_definition": traj.kind},
        int_columns=("n",),
    )


def write_batch_summary(path, batch: BatchResult, config: dict):
    """One row per trajectory; ``seed`` is the stream index under the master seed."""
    return write_csv(
        path, ["seed", "terminal_x", "terminal_y"],
        [batch.indices, batch.terminal_x, batch.terminal_y], config, "batch_summary",
        meta={"master_seed": batch.seed, "n_steps": int(batch.n[-1]), "y_definition": batch.kind},
        int_columns=("seed",),
    )


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def write_checkpoint_summary(path, batch: BatchResult, config: dict, target: float | None = None):
    """Quantiles of ``y`` (and the median of ``x``) at every checkpoint."""
    header = ["n", "count", "median_x", "q05_y", "q25_y", "median_y", "q75_y", "q95_y"]
    n_traj = batch.y.shape[0]
    if n_traj:
        qy = np.quantile(batch.y, QUANTILES, axis=0)
        mx = np.median(batch.x, axis=0)
    else:
        qy = np.full((len(QUANTILES), batch.n.size), np.nan)
        mx = np.full(batch.n.size, np.nan)
    cols = [batch.n, np.full(batch.n.size, n_traj), mx, *qy]
    if target is not None:
        header.append("median_rel_error")
        cols.append(
            np.median(np.abs(batch.y - target), axis=0) / abs(target)
            if n_traj else np.full(batch.n.size, np.nan)
        )
    return write_csv(path, header, cols, config, "checkpoint_summary", int_columns=("n", "count"))


def write_path(path, pdmp_path: PdmpPath, config: dict):
    return write_csv(
        path, ["jump_time", "pre_value", "post_value"],
        [pdmp_path.jump_times, pdmp_path.pre_values, pdmp_path.post_values],
        config, "pdmp_path",
        meta={"y0": pdmp_path.y0, "horizon": pdmp_path.horizon, "g": pdmp_path.g},
    )


def write_histogram(path, hist: OccupationHistogram, config: dict, meta: dict | None = None):
    m = {"total_time": hist.total_time, "outside_weight": hist.overflow}
    m.update(meta or {})
    return write_csv(
        path, ["bin_lo", "bin_hi", "weight", "normalized_density"],
        [hist.edges[:-1], hist.edges[1:], hist.weights, hist.density],
        config, "histogram", meta=m,
    )


def density_grid(density: PiecewiseDensity, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Uniform grid on ``[r_A, y_max]`` whose points include every kink.

    ``step`` is rounded down so that ``g`` is a whole number of steps.
    Returns the interval index and ``y`` for each point; each kink
    ``r_A + k g`` is listed once, as the left end of interval ``k``.
    """
    per = max(1, int(np.ceil(density.g / step - 1e-9)))
    j = np.arange(density.n_max * per + 1)
    k = np.minimum(j // per, density.n_max - 1)
    y = density.r_A + density.g * (j / per)
    return k, y


def write_density(path, density: PiecewiseDensity, config: dict, step: float = 0.01):
    """Columns ``interval,y,phi,cdf``; the value at ``r_A`` is the boundary limit."""
    k, y = density_grid(density, step)
    phi = density.pdf(y)
    phi[0] = {"Zero": 0.0, "Diverges": np.inf}.get(
        density.boundary.value, float(density.pdf(np.array([density.r_A + 1e-12]))[0])
    )
    cdf = density.cdf(y)
    meta = {
        "boundary": density.boundary.value,
        "lambda0": density.lambda0,
        "tail_mass": density.tail_mass,
        "tail_rate": density.tail_rate,
        "y_max": density.y_max,
        "mean": density.mean(),
        "variance": density.variance(),
    }
    return write_csv(
        path, ["interval", "y", "phi", "cdf"], [k, y, phi, cdf], config, "density",
        meta=meta, int_columns=("interval",),
    )


def write_laplace(path, ps, values, uncertainties, config: dict):
    return write_csv(path, ["p", "laplace", "uncertainty"], [ps, values, uncertainties], config, "laplace")
