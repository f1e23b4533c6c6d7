"""Universal kriging with linear drift {1, x, y} and a linear variogram.

Both velocity components share one variogram, fitted to pooled residuals
of an ordinary least-squares drift fit, so they also share the kriging
weights.  Coordinates are centred and scaled internally for conditioning.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spl
from scipy.spatial.distance import cdist, pdist

from ..errors import DegenerateGeometryError

N_BINS = 10


@dataclass(frozen=True)
class VariogramModel:
    slope: float
    nugget: float = 0.0

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h > 0, self.nugget + self.slope * h, 0.0)


def empirical_variogram(xy, residuals, n_bins=N_BINS):
    """Binned semivariances 0.5 * (e_i - e_j)^2 over pair distances.

    Bins are equal width up to half the largest pair distance; if that
    leaves no pairs, all pairs are used.  Multi-column residuals are pooled.
    Returns (mean distance, mean semivariance, pair count) per non-empty bin.
    """
    xy = np.asarray(xy, dtype=float)
    e = np.asarray(residuals, dtype=float).reshape(len(xy), -1)
    h = pdist(xy)
    if len(h) == 0 or h.max() == 0:
        raise DegenerateGeometryError("variogram needs at least two distinct points")
    g = sum(0.5 * pdist(e[:, [j]], "sqeuclidean") for j in range(e.shape[1])) / e.shape[1]
    keep = (h > 0) & (h <= 0.5 * h.max())
    if not keep.any():
        keep = h > 0
    h, g = h[keep], g[keep]
    edges = np.linspace(0.0, h.max(), n_bins + 1)
    which = np.clip(np.searchsorted(edges, h, side="right") - 1, 0, n_bins - 1)
    hb, gb, nb = [], [], []
    for b in range(n_bins):
        sel = which == b
        if sel.any():
            hb.append(h[sel].mean())
            gb.append(g[sel].mean())
            nb.append(int(sel.sum()))
    return np.array(hb), np.array(gb), np.array(nb)


def fit_variogram(xy, residuals, n_bins=N_BINS):
    """Least-squares line nugget + slope*h through the binned semivariances."""
    hb, gb, _ = empirical_variogram(xy, residuals, n_bins)
    if len(hb) == 1:
        return VariogramModel(slope=float(gb[0] / hb[0]), nugget=0.0)
    slope, nugget = np.polyfit(hb, gb, 1)
    if nugget < 0:
        nugget = 0.0
        slope = float(hb @ gb / (hb @ hb))
    if slope < 0:
        slope = 0.0
        nugget = float(gb.mean())
    return VariogramModel(slope=float(slope), nugget=float(nugget))


def drift_basis(xy):
    return np.column_stack([np.ones(len(xy)), xy[:, 0], xy[:, 1]])


def kriging_system(xy, variogram):
    """Augmented matrix [[Gamma, F], [F^T, 0]]."""
    n = len(xy)
    F = drift_basis(xy)
    A = np.zeros((n + 3, n + 3))
    A[:n, :n] = variogram(cdist(xy, xy))
    A[:n, n:] = F
    A[n:, :n] = F.T
    return A


class KrigingModel:
    def __init__(self, slice_, variogram=None):
        xy = np.array(slice_.points[:, :2], dtype=float)
        self.u = np.array(slice_.velocities, dtype=float)
        self.center = xy.mean(axis=0)
        self.scale = float(np.abs(xy - self.center).max()) or 1.0
        self.xy = (xy - self.center) / self.scale
        F = drift_basis(self.xy)
        if len(xy) < 3 or np.linalg.matrix_rank(F) < 3:
            raise DegenerateGeometryError(
                f"universal kriging needs >= 3 non-collinear stations, got {len(xy)} "
                "collinear or coincident points"
            )
        coef, *_ = np.linalg.lstsq(F, self.u, rcond=None)
        self.residuals = self.u - F @ coef
        if variogram is None:
            v = fit_variogram(self.xy, self.residuals)
        else:
            v = VariogramModel(variogram.slope * self.scale, variogram.nugget)
        self._variogram = v
        self._drift_coef = coef
        self.degenerate = v.slope == 0 and v.nugget == 0
        if not self.degenerate:
            self.A = kriging_system(self.xy, v)
            try:
                self._lu = spl.lu_factor(self.A, check_finite=True)
            except (spl.LinAlgError, ValueError) as exc:
                raise DegenerateGeometryError(f"singular kriging system: {exc}") from None
            if not np.all(np.isfinite(self._lu[0])) or np.min(np.abs(np.diag(self._lu[0]))) < 1e-14 * np.abs(self.A).max():
                raise DegenerateGeometryError("singular kriging system (coincident stations?)")

    @property
    def variogram(self):
        """Fitted variogram in the caller's distance units."""
        return VariogramModel(self._variogram.slope / self.scale, self._variogram.nugget)

    def _rhs(self, points):
        pts = np.asarray(points, dtype=float)
        pts = (pts.reshape(-1, pts.shape[-1])[:, :2] - self.center) / self.scale
        return np.hstack([self._variogram(cdist(pts, self.xy)), drift_basis(pts)]), pts

    def weights(self, points):
        rhs, _ = self._rhs(points)
        return spl.lu_solve(self._lu, rhs.T).T

    def predict(self, points):
        if self.degenerate:
            _, pts = self._rhs(points)
            return drift_basis(pts) @ self._drift_coef
        n = len(self.xy)
        return self.weights(points)[:, :n] @ self.u

    def variance(self, points):
        """Kriging variance w^T gamma(x) + mu^T f(x)."""
        if self.degenerate:
            return np.zeros(len(np.atleast_2d(points)))
        rhs, _ = self._rhs(points)
        sol = spl.lu_solve(self._lu, rhs.T).T
        return np.sum(sol * rhs, axis=1)


def kriging_fit(slice_, variogram=None):
    return KrigingModel(slice_, variogram)


def kriging_predict(model, x):
    return tuple(model.predict(np.asarray(x, dtype=float)[None, :])[0])


class KrigingFamily:
    def __init__(self, variogram=None):
        self.variogram = variogram

    def __call__(self, slice_):
        return KrigingModel(slice_, self.variogram)
