"""Cross-validated quality of fit and Monte-Carlo aggregation over time.

A *model family* is any callable taking a training :class:`TimeSlice` and
returning an object with ``predict(points) -> (n, 2)``.  Each time slice is
scored by M-fold cross-validation over stations; slice scores are averaged
over a sample of times, with variances normalised by 1/|K| (not 1/(|K|-1)).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import datetime

import numpy as np

from .errors import DataError, WindFieldError


@dataclass(frozen=True)
class FoldAssignment:
    folds: dict  # station id -> fold index
    M: int

    def members(self, m):
        return sorted(s for s, f in self.folds.items() if f == m)

    def sizes(self):
        return [sum(1 for f in self.folds.values() if f == m) for m in range(self.M)]


@dataclass(frozen=True)
class SliceScore:
    time: datetime
    q: float  # cross-validated mean squared error, (m/s)^2
    n: int
    q_zero: float  # same protocol for the zero predictor


@dataclass
class QualityReport:
    model: str
    samples: int
    Q_tilde: float
    var_Q: float
    Q_zero: float
    E_tilde: float
    var_E: float
    ci_half_width: float
    per_slice: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["per_slice"] = [
            {"time": s.time.isoformat(), "Q": s.q, "N": s.n, "Q_zero": s.q_zero} for s in self.per_slice
        ]
        return d


@dataclass(frozen=True)
class DifferenceReport:
    delta_Q: float
    var_delta_Q: float
    ci_half_width: float
    delta_E: float
    var_delta_E: float
    samples: int


def fold_seed(master_seed, time):
    """Per-slice fold seed shared by every model scored on that slice."""
    return np.random.SeedSequence([int(master_seed), int(time.timestamp())])


def make_folds(station_ids, M, rng):
    ids = list(station_ids)
    if M < 2:
        raise ValueError("need at least two folds")
    if len(ids) < M:
        raise ValueError(f"{M} folds requested for {len(ids)} stations")
    if len(set(ids)) != len(ids):
        raise ValueError("station ids must be unique")
    rng = np.random.default_rng(rng)
    order = rng.permutation(len(ids))
    return FoldAssignment({ids[i]: pos % M for pos, i in enumerate(order)}, M)


def _sq_err(pred, u):
    return float(np.sum((pred - u) ** 2))


def slice_quality(family, slice_, folds):
    """Cross-validated squared error of ``family`` on one slice."""
    fold_of = np.array([folds.folds[s] for s in slice_.station_ids])
    total = 0.0
    total_zero = 0.0
    for m in range(folds.M):
        test = fold_of == m
        if not test.any():
            continue
        if test.all():
            raise DataError(f"fold {m} at {slice_.time.isoformat()} leaves no training stations")
        try:
            model = family(slice_.subset(~test))
            pred = np.asarray(model.predict(slice_.points[test]), dtype=float)
        except WindFieldError as exc:
            raise type(exc)(f"fold {m} at {slice_.time.isoformat()}: {exc}") from exc
        u = slice_.velocities[test]
        total += _sq_err(pred, u)
        total_zero += _sq_err(np.zeros_like(u), u)
    n = len(slice_)
    return SliceScore(slice_.time, total / n, n, total_zero / n)


def _mean_var(values):
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    var_t = float(np.mean((v - mean) ** 2))
    return mean, var_t / len(v)


def aggregate(scores, model=""):
    if len(scores) < 2:
        raise ValueError("aggregate needs at least two slice scores")
    q, var_q = _mean_var([s.q for s in scores])
    q0 = float(np.mean([s.q_zero for s in scores]))
    e = q / q0 if q0 > 0 else math.nan
    var_e = var_q / q0**2 if q0 > 0 else math.nan
    return QualityReport(model, len(scores), q, var_q, q0, e, var_e, 2.0 * math.sqrt(var_q), list(scores))


def paired_difference(scores_f, scores_g):
    """Q(f) - Q(g) with variance from per-slice paired differences."""
    tf = [s.time for s in scores_f]
    tg = [s.time for s in scores_g]
    if tf != tg:
        raise ValueError("paired difference needs identical slice times in the same order")
    if len(tf) < 2:
        raise ValueError("paired difference needs at least two slices")
    d = np.array([a.q - b.q for a, b in zip(scores_f, scores_g)])
    delta, var_d = _mean_var(d)
    q0 = float(np.mean([s.q_zero for s in scores_f]))
    return DifferenceReport(delta, var_d, 2.0 * math.sqrt(var_d), delta / q0, var_d / q0**2, len(d))


def score_slices(family, slices, master_seed, M=5, station_ids=None):
    """Slice scores with folds drawn per slice from (master_seed, time).

    ``station_ids`` fixes the partitioned station set (default: the stations
    present in each slice).
    """
    out = []
    for sl in slices:
        ids = station_ids if station_ids is not None else sl.station_ids
        folds = make_folds(ids, M, np.random.default_rng(fold_seed(master_seed, sl.time)))
        out.append(slice_quality(family, sl, folds))
    return out


def grid_search(family_factory, grid, slices, folds_seed, M=5):
    """Evaluate every grid point on the same slices and folds.

    ``grid`` is a sequence of parameter dicts; ``family_factory(**params)``
    builds the family.  Returns ``(best_params, table)`` where each table row
    is the params dict extended with ``E_tilde`` and ``var``.  Ties keep the
    earliest grid point.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    table = []
    best = None
    for params in grid:
        rep = aggregate(score_slices(family_factory(**params), slices, folds_seed, M))
        row = dict(params, E_tilde=rep.E_tilde, var=rep.var_E)
        table.append(row)
        if best is None or rep.E_tilde < best[1]:
            best = (params, rep.E_tilde)
    return best[0], table


def bootstrap_distribution(values, resample_count, subsample_size, rng):
    """Means of ``resample_count`` with-replacement subsamples."""
    v = np.asarray(values, dtype=float)
    if subsample_size > len(v):
        raise ValueError("subsample larger than the score list")
    rng = np.random.default_rng(rng)
    if resample_count == 0:
        return np.empty(0)
    idx = rng.integers(0, len(v), size=(resample_count, subsample_size))
    return v[idx].mean(axis=1)


class ZeroFamily:
    """Predicts zero velocity everywhere."""

    def __call__(self, slice_):
        return self

    def predict(self, points):
        return np.zeros((len(np.atleast_2d(points)), 2))
