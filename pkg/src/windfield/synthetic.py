"""Synthetic ground-truth velocity fields with known Fourier coefficients.

Fields live on the rescaled unit square in the same ``exp(i*pi*m.x)`` basis
as the spectral models, so true coefficients compare directly with fitted
ones.  Physical coordinates map to the unit square through ``tau`` and
``origin``.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .data_model import TimeSlice, rescale_to_unit, unit_to_physical
from .spectral import evaluate_sum


@dataclass(frozen=True, eq=False)
class BandlimitedField:
    """f(x) = sum_m c(m) exp(i*pi*m.x) with complex 2-vector coefficients."""

    support: np.ndarray
    coefficients: np.ndarray
    tau: tuple = (1.0, 1.0)
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        m = np.asarray(self.support, dtype=np.int64).reshape(-1, 2)
        c = np.asarray(self.coefficients, dtype=complex).reshape(-1, 2)
        if len(m) != len(c):
            raise ValueError("support and coefficients differ in length")
        if len({tuple(p) for p in m.tolist()}) != len(m):
            raise ValueError("support entries must be unique")
        object.__setattr__(self, "support", m)
        object.__setattr__(self, "coefficients", c)

    def is_real(self, tol=1e-12):
        index = {tuple(p): i for i, p in enumerate(self.support.tolist())}
        for p, i in index.items():
            j = index.get((-p[0], -p[1]))
            if j is None:
                if np.any(np.abs(self.coefficients[i]) > tol):
                    return False
            elif np.any(np.abs(self.coefficients[j] - np.conj(self.coefficients[i])) > tol):
                return False
        return True

    def value_complex(self, xt):
        xt = np.asarray(xt, dtype=float).reshape(-1, 2)
        if len(self.support) == 0:
            return np.zeros((len(xt), 2), dtype=complex)
        return evaluate_sum(xt, self.support, self.coefficients)

    def value(self, xt):
        return self.value_complex(xt).real

    def to_bandlimited(self):
        return self

    def to_dict(self):
        return {
            "kind": "bandlimited",
            "tau": list(self.tau),
            "origin": list(self.origin),
            "support": self.support.tolist(),
            "coefficients": [[c[0].real, c[0].imag, c[1].real, c[1].imag] for c in self.coefficients],
        }


@dataclass(frozen=True, eq=False)
class StreamFunctionField:
    """Velocity (d psi/dy, -d psi/dx) of psi = sum_j a_j sin(pi m1 x) sin(pi m2 y).

    Derivatives are taken in rescaled coordinates, so the field is exactly
    divergence free on the unit square.
    """

    modes: np.ndarray  # (J, 2) integer lattice points
    amplitudes: np.ndarray  # (J,)
    tau: tuple = (1.0, 1.0)
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=np.int64).reshape(-1, 2)
        a = np.asarray(self.amplitudes, dtype=float).reshape(-1)
        if len(m) != len(a):
            raise ValueError("modes and amplitudes differ in length")
        object.__setattr__(self, "modes", m)
        object.__setattr__(self, "amplitudes", a)

    def psi(self, xt):
        xt = np.asarray(xt, dtype=float).reshape(-1, 2)
        k = np.pi * self.modes.astype(float)
        return np.sin(xt[:, :1] * k[:, 0]) * np.sin(xt[:, 1:] * k[:, 1]) @ self.amplitudes

    def value(self, xt):
        xt = np.asarray(xt, dtype=float).reshape(-1, 2)
        k = np.pi * self.modes.astype(float)
        sx, cx = np.sin(xt[:, :1] * k[:, 0]), np.cos(xt[:, :1] * k[:, 0])
        sy, cy = np.sin(xt[:, 1:] * k[:, 1]), np.cos(xt[:, 1:] * k[:, 1])
        u = (sx * cy * k[:, 1]) @ self.amplitudes
        v = -(cx * sy * k[:, 0]) @ self.amplitudes
        return np.column_stack([u, v])

    def value_complex(self, xt):
        return self.value(xt).astype(complex)

    def to_bandlimited(self):
        """Exact expansion in the exponential basis."""
        coeffs = {}
        for (m1, m2), a in zip(self.modes.tolist(), self.amplitudes):
            # sin(p)sin(q) = -1/4 sum_{s,t=+-1} s t exp(i(s p + t q))
            for s in (1, -1):
                for t in (1, -1):
                    c_psi = -0.25 * a * s * t
                    key = (s * m1, t * m2)
                    du = 1j * np.pi * t * m2 * c_psi
                    dv = -1j * np.pi * s * m1 * c_psi
                    prev = coeffs.get(key, (0j, 0j))
                    coeffs[key] = (prev[0] + du, prev[1] + dv)
        keys = sorted(k for k, c in coeffs.items() if abs(c[0]) > 0 or abs(c[1]) > 0)
        return BandlimitedField(
            np.array(keys, dtype=np.int64).reshape(-1, 2),
            np.array([coeffs[k] for k in keys], dtype=complex).reshape(-1, 2),
            self.tau,
            self.origin,
        )

    def to_dict(self):
        return {
            "kind": "stream_function",
            "tau": list(self.tau),
            "origin": list(self.origin),
            "modes": self.modes.tolist(),
            "amplitudes": self.amplitudes.tolist(),
            "bandlimited": self.to_bandlimited().to_dict(),
        }


def field_from_dict(d):
    if d["kind"] == "stream_function":
        return StreamFunctionField(np.array(d["modes"]), np.array(d["amplitudes"]), tuple(d["tau"]), tuple(d["origin"]))
    if d["kind"] == "bandlimited":
        c = np.array([[complex(a, b), complex(e, f)] for a, b, e, f in d["coefficients"]], dtype=complex)
        return BandlimitedField(np.array(d["support"]).reshape(-1, 2), c.reshape(-1, 2), tuple(d["tau"]), tuple(d["origin"]))
    raise ValueError(f"unknown field kind {d['kind']!r}")


def eval_field(field, xt):
    """Real field value at a rescaled point (or array of points)."""
    xt = np.asarray(xt, dtype=float)
    out = field.value(xt.reshape(-1, 2))
    if xt.ndim == 1:
        return float(out[0, 0]), float(out[0, 1])
    return out


def eval_physical(field, points):
    pts = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])[:, :2]
    return field.value(rescale_to_unit(pts, field.tau, field.origin))


class FieldPredictor:
    """Wraps a ground-truth field in the predictor interface."""

    def __init__(self, field):
        self.field = field

    def predict(self, points):
        return eval_physical(self.field, points)


def random_stream_field(rng, n_modes=5, max_mode=3, tau=(1.0, 1.0), origin=(0.0, 0.0)):
    """Distinct modes with components in 1..max_mode and N(0, 1) amplitudes."""
    cand = [(i, j) for i in range(1, max_mode + 1) for j in range(1, max_mode + 1)]
    pick = rng.choice(len(cand), size=min(n_modes, len(cand)), replace=False)
    modes = np.array([cand[i] for i in sorted(pick)], dtype=np.int64)
    return StreamFunctionField(modes, rng.standard_normal(len(modes)), tau, origin)


def single_mode_field(mode, amplitude=(1.0, 0.5), tau=(1.0, 1.0), origin=(0.0, 0.0)):
    """Real field supported on {m, -m}: 2 Re(c exp(i*pi*m.x))."""
    m = np.array([mode, (-mode[0], -mode[1])], dtype=np.int64)
    c = np.asarray(amplitude, dtype=complex)
    return BandlimitedField(m, np.array([c, np.conj(c)]), tau, origin)


def random_locations(rng, n, tau=(1.0, 1.0), origin=(0.0, 0.0), altitude_range=(0.0, 0.0)):
    xt = rng.uniform(size=(n, 2))
    xy = unit_to_physical(xt, tau, origin)
    z = rng.uniform(*altitude_range, size=n) if altitude_range[1] > altitude_range[0] else np.zeros(n)
    return np.column_stack([xy, z])


def sample_slice(field, locations, noise_sigma, rng_seed, time=None, station_ids=None):
    """Field values at physical locations plus iid N(0, noise_sigma^2) noise."""
    locs = np.asarray(locations, dtype=float)
    if locs.size == 0:
        raise ValueError("empty location list")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    locs = locs.reshape(-1, locs.shape[-1])
    vel = eval_physical(field, locs)
    if noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        vel = vel + noise_sigma * rng.standard_normal(vel.shape)
    if time is None:
        time = datetime(2018, 1, 1, tzinfo=timezone.utc)
    if station_ids is None:
        station_ids = tuple(f"S{i:03d}" for i in range(len(locs)))
    return TimeSlice(time, locs, vel, tuple(station_ids))
