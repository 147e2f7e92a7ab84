"""Empirical versus analytic comparison of distributions on shared bins."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .io import CsvTable


class IncompatibleInputs(ValueError):
    pass


@dataclass
class Metric:
    name: str
    empirical: float
    analytic: float
    tolerance: float
    passed: bool


@dataclass
class ComparisonReport:
    rows: list[Metric]
    runtime: float = 0.0
    seed_info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "rows": [asdict(r) for r in self.rows],
            "runtime": self.runtime,
            "seed_info": self.seed_info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"{'metric':<12} {'empirical':>14} {'analytic':>14} {'tolerance':>10}  result"]
        for r in self.rows:
            lines.append(
                f"{r.name:<12} {r.empirical:>14.6g} {r.analytic:>14.6g} {r.tolerance:>10.3g}  "
                + ("PASS" if r.passed else "FAIL")
            )
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


@dataclass
class BinnedLaw:
    """Probabilities on ``edges`` plus the mass outside ``[edges[0], edges[-1]]``."""

    edges: np.ndarray
    masses: np.ndarray
    outside: float
    mean: float | None = None
    variance: float | None = None


def _meta_float(table, key):
    v = table.meta.get(key)
    return None if v is None else float(v)


def _kind(table: CsvTable) -> str:
    kind = table.meta.get("kind")
    if kind not in ("histogram", "density"):
        raise IncompatibleInputs(f"cannot compare a file of kind {kind!r}")
    return kind


def histogram_law(table: CsvTable) -> BinnedLaw:
    lo, hi = table["bin_lo"], table["bin_hi"]
    total = _meta_float(table, "total_time")
    if total is None:
        total = float(table["weight"].sum())
    outside = _meta_float(table, "outside_weight") or 0.0
    edges = np.append(lo, hi[-1]) if lo.size else np.array([])
    return BinnedLaw(
        edges, table["weight"] / total, outside / total,
        _meta_float(table, "mean"), _meta_float(table, "variance"),
    )


def density_law(table: CsvTable, edges: np.ndarray) -> BinnedLaw:
    """Integrate a tabulated density over ``edges`` using its ``cdf`` column.

    The density vanishes left of its first grid point; edges beyond the
    last grid point are rejected.
    """
    y, cdf = table["y"], table["cdf"]
    if edges[-1] > y[-1] * (1 + 1e-12) + 1e-12:
        raise IncompatibleInputs(
            f"bins reach {edges[-1]:.6g} but the density is tabulated only up to {y[-1]:.6g}"
        )
    c = np.interp(edges, y, cdf, left=0.0)
    return BinnedLaw(
        edges, np.diff(c), 1.0 - (c[-1] - c[0]),
        _meta_float(table, "mean"), _meta_float(table, "variance"),
    )


def _same_edges(a, b):
    return a.size == b.size and np.allclose(a, b, rtol=0, atol=1e-9)


def to_common_bins(empirical: CsvTable, analytic: CsvTable) -> tuple[BinnedLaw, BinnedLaw]:
    ke, ka = _kind(empirical), _kind(analytic)
    if ke == "histogram" and ka == "histogram":
        e, a = histogram_law(empirical), histogram_law(analytic)
        if not _same_edges(e.edges, a.edges):
            raise IncompatibleInputs(
                f"histogram bins differ: [{e.edges[0]:.6g}, {e.edges[-1]:.6g}] with "
                f"{e.edges.size - 1} bins vs [{a.edges[0]:.6g}, {a.edges[-1]:.6g}] with "
                f"{a.edges.size - 1} bins"
            )
        return e, a
    if ke == "histogram":
        e = histogram_law(empirical)
        return e, density_law(analytic, e.edges)
    if ka == "histogram":
        a = histogram_law(analytic)
        return density_law(empirical, a.edges), a
    ye, ya = empirical["y"], analytic["y"]
    if not _same_edges(ye, ya):
        raise IncompatibleInputs(
            f"density grids differ: [{ye[0]:.6g}, {ye[-1]:.6g}] ({ye.size} points) vs "
            f"[{ya[0]:.6g}, {ya[-1]:.6g}] ({ya.size} points)"
        )
    return density_law(empirical, ye), density_law(analytic, ye)


def l1_distance(a: BinnedLaw, b: BinnedLaw) -> float:
    """Total absolute difference over the bins and the outside mass."""
    return float(np.abs(a.masses - b.masses).sum() + abs(a.outside - b.outside))


def compare_tables(
    empirical: CsvTable,
    analytic: CsvTable,
    l1_tol: float = 0.05,
    mean_tol: float = 0.01,
    var_tol: float = 0.05,
) -> ComparisonReport:
    """L1 distance on common bins and relative moment deltas where both sides report them."""
    e, a = to_common_bins(empirical, analytic)
    l1 = l1_distance(e, a)
    rows = [Metric("L1", l1, 0.0, l1_tol, l1 <= l1_tol)]
    for name, tol in (("mean", mean_tol), ("variance", var_tol)):
        ev, av = getattr(e, name), getattr(a, name)
        if ev is None or av is None or not math.isfinite(av):
            continue
        rel = abs(ev - av) / abs(av)
        rows.append(Metric(name, ev, av, tol, rel <= tol))
    return ComparisonReport(rows)
