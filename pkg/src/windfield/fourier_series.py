"""Fourier series on a fixed square frequency grid centred at the origin."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .spectral import LossParams, fit_spectral


@dataclass(frozen=True)
class GridSpec:
    M: int = 10
    loss: LossParams = field(default_factory=LossParams)
    tau: tuple = (4e6, 4e6)
    origin: tuple | None = None

    def __post_init__(self):
        if self.M < 0:
            raise DomainError("M must be >= 0")


def grid_lattice(M):
    """All (m, n) with |m|, |n| <= M, first index slowest."""
    if M < 0:
        raise DomainError("M must be >= 0")
    r = np.arange(-M, M + 1, dtype=np.int64)
    mm, nn = np.meshgrid(r, r, indexing="ij")
    return np.column_stack([mm.ravel(), nn.ravel()])


def train_fourier_series(slice_, spec):
    return fit_spectral(slice_, grid_lattice(spec.M), spec.loss, spec.tau, spec.origin)


class FourierFamily:
    def __init__(self, spec):
        self.spec = spec

    def __call__(self, slice_):
        return train_fourier_series(slice_, self.spec)
