"""Weighted averages of fitted models."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError

WEIGHT_TOL = 1e-9


class EnsembleModel:
    def __init__(self, members, weights):
        weights = np.asarray(weights, dtype=float)
        if len(members) != len(weights) or len(members) == 0:
            raise ConfigError("ensemble needs one weight per member")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ConfigError(f"ensemble weights sum to {weights.sum()!r}, expected 1")
        self.members = list(members)
        self.weights = weights

    def predict(self, points):
        preds = np.stack([m.predict(points) for m in self.members])
        return np.tensordot(self.weights, preds, axes=1)


def ensemble_predict(ensemble, x):
    return tuple(ensemble.predict(np.asarray(x, dtype=float)[None, :])[0])


class EnsembleFamily:
    def __init__(self, families, weights):
        self.families = list(families)
        self.weights = list(weights)
        EnsembleModel([None] * len(self.families), self.weights)  # validate early

    def __call__(self, slice_):
        return EnsembleModel([f(slice_) for f in self.families], self.weights)
