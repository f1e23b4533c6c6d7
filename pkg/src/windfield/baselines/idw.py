"""Inverse distance weighting and nearest neighbour interpolation.

Distances are horizontal only; altitude is ignored.
"""
from __future__ import annotations

import math

import numpy as np


class IdwModel:
    """Weights d^-p; ``p = inf`` selects the nearest station.

    Predictions at a station location return that station's velocity.
    """

    def __init__(self, slice_, p=2.0):
        if p < 0:
            raise ValueError("p must be >= 0")
        self.p = float(p)
        self.xy = np.array(slice_.points[:, :2])
        self.u = np.array(slice_.velocities)
        self.ids = np.array(slice_.station_ids, dtype=object)
        # rank of each station id, for nearest-neighbour tie breaking
        self._id_rank = np.argsort(np.argsort(self.ids.astype(str)))

    def _dist(self, points):
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, pts.shape[-1])[:, :2]
        return np.sqrt(((pts[:, None, :] - self.xy[None, :, :]) ** 2).sum(axis=-1))

    def predict(self, points):
        d = self._dist(points)
        if math.isinf(self.p):
            return self._nearest(d)
        out = np.empty((len(d), 2))
        for i, row in enumerate(d):
            hit = np.flatnonzero(row == 0)
            if len(hit):
                out[i] = self.u[hit[0]]
                continue
            if self.p == 0:
                w = np.ones_like(row)
            else:
                # log-space weights stay finite for very large p
                logw = -self.p * np.log(row)
                w = np.exp(logw - logw.max())
            out[i] = w @ self.u / w.sum()
        return out

    def _nearest(self, d):
        idx = np.lexsort((np.broadcast_to(self._id_rank, d.shape), d), axis=-1)[:, 0]
        return self.u[idx]


def idw_predict(model, x):
    return tuple(model.predict(np.asarray(x, dtype=float)[None, :])[0])


def nearest_neighbor_predict(model, x):
    d = model._dist(np.asarray(x, dtype=float)[None, :])
    return tuple(model._nearest(d)[0])


class IdwFamily:
    def __init__(self, p=2.0):
        self.p = p

    def __call__(self, slice_):
        return IdwModel(slice_, self.p)


class NearestNeighborFamily(IdwFamily):
    def __init__(self):
        super().__init__(math.inf)
