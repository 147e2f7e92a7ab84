"""Composite Gauss-Legendre panels on [0, 1] with cumulative integration.

Panels are graded geometrically towards 0 (breakpoints ``2^-j``) and
uniform elsewhere, so integrands with an algebraic singularity at the
left end are resolved.  Each panel carries ``q`` Gauss nodes; cumulative
integrals at the nodes use the spectral integration matrix of the
Legendre interpolant.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as L


class PanelGrid:
    """Panels on [0, 1]: ``n_points // q`` split between graded and uniform.

    ``min_levels`` forces at least that many geometric levels, i.e. a first
    panel no wider than ``2^-min_levels``.
    """

    def __init__(self, n_points: int, q: int = 8, min_levels: int = 0):
        if n_points < 2 * q:
            raise ValueError(f"need at least {2 * q} points")
        n_panels = n_points // q
        n_geo = max(n_panels // 2, min_levels)
        n_uni = n_panels - n_panels // 2
        bp = {0.0, 1.0}
        bp.update(2.0 ** -np.arange(1, n_geo + 1))
        bp.update(np.arange(n_uni + 1) / n_uni)
        self.breaks = np.array(sorted(bp))
        self.q = q
        x, w = L.leggauss(q)
        self.x_ref, self.w_ref = x, w
        a, b = self.breaks[:-1], self.breaks[1:]
        self.h = b - a
        self.nodes = (a[:, None] + 0.5 * self.h[:, None] * (x + 1.0)).ravel()
        self.weights = (0.5 * self.h[:, None] * w).ravel()
        # Legendre coefficients of the interpolant: c = T @ f (per panel)
        n = np.arange(q)
        P = L.legvander(x, q - 1)  # (node, degree)
        self._T = (2 * n[:, None] + 1) / 2.0 * (P * w[:, None]).T
        # cumulative integral from -1 to each node, as a matrix on f
        Q = np.empty((q, q))
        for k in range(q):
            e = np.zeros(q)
            e[k] = 1.0
            Q[:, k] = L.legval(x, L.legint(e, lbnd=-1))
        self._S = Q @ self._T

    @property
    def n_panels(self) -> int:
        return self.h.size

    @property
    def size(self) -> int:
        return self.nodes.size

    def cumulative(self, f: np.ndarray) -> tuple[np.ndarray, float]:
        """Integrals of ``f`` from 0 to each node, and over [0, 1].

        ``f`` holds values at ``nodes``; leading axes are batched.
        """
        fp = f.reshape(f.shape[:-1] + (self.n_panels, self.q))
        within = 0.5 * self.h[:, None] * np.einsum("ij,...pj->...pi", self._S, fp)
        totals = 0.5 * self.h * np.einsum("j,...pj->...p", self.w_ref, fp)
        starts = np.cumsum(totals, axis=-1) - totals
        cum = (within + starts[..., None]).reshape(f.shape)
        return cum, totals.sum(axis=-1)

    def locate(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Panel index and reference coordinate in [-1, 1] for points ``t``."""
        p = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, self.n_panels - 1)
        xi = 2.0 * (t - self.breaks[p]) / self.h[p] - 1.0
        return p, xi

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Legendre coefficients per panel, shape ``(..., n_panels, q)``."""
        fp = f.reshape(f.shape[:-1] + (self.n_panels, self.q))
        return np.einsum("nj,...pj->...pn", self._T, fp)


def eval_legendre_rows(coef: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate row ``i`` of ``coef`` (shape (M, q)) at ``xi[i]``."""
    return L.legval(xi, coef.T, tensor=False)


def integrate_legendre_rows(coef: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Integral from -1 to ``xi[i]`` of the series in row ``i``."""
    anti = L.legint(coef.T, lbnd=-1, axis=0)
    return L.legval(xi, anti, tensor=False)
