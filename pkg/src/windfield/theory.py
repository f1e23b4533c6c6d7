"""Generalisation bound and optimal frequency density for random features.

Works on the periodic domain [0, 2*pi]^2 with
``f(x) = 1/(2*pi) * sum_w fhat(w) exp(i w.x)`` and frequencies drawn iid from
a density ``rho`` on the finite support of ``fhat``.  The bound is

    (1 + lam*Cbar) / ((2*pi)^2 K) * sqrt(E_rho[|fhat|^4 / rho^4])
        + sigma^2 - E|f|^2 / K

and is minimised over ``rho`` by ``rho(w) = |fhat(w)| / sum |fhat|``.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi
MAX_BRUTE_SUPPORT = 6


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    support: np.ndarray  # (n, 2) integer frequencies
    norms: np.ndarray  # |fhat(w)|
    mean_sq_field: float = 0.0  # E|f(x)|^2
    noise_variance: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.int64).reshape(-1, 2)
        a = np.asarray(self.norms, dtype=float).reshape(-1)
        if len(s) != len(a):
            raise ValueError("support and norms differ in length")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise DomainError("norms must be finite and non-negative")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "norms", a)

    @classmethod
    def from_norms(cls, norms, **kw):
        n = len(norms)
        return cls(np.column_stack([np.arange(n), np.zeros(n)]).astype(np.int64), norms, **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["support"]).reshape(-1, 2),
            np.array(d["norms"], dtype=float),
            float(d.get("mean_sq_field", 0.0)),
            float(d.get("noise_variance", 0.0)),
        )


@dataclass(frozen=True)
class BoundParams:
    K: int
    lam: float = 0.0
    cbar: float = 0.0

    def __post_init__(self):
        if self.K < 1 or self.lam < 0 or self.cbar < 0:
            raise DomainError("need K >= 1, lam >= 0, cbar >= 0")


def optimal_density(profile):
    """rho proportional to |fhat|; zero-norm points get probability 0."""
    a = profile.norms
    total = a.sum()
    if not total > 0:
        raise DomainError("all coefficient norms are zero")
    return a / total


def uniform_density(profile):
    """Uniform over the points with non-zero norm."""
    live = profile.norms > 0
    return live / live.sum()


def _fourth_moment_ratio(norms, density):
    a = np.asarray(norms, dtype=float)
    rho = np.asarray(density, dtype=float)
    live = a > 0
    if np.any(rho[live] <= 0):
        raise ZeroDivisionError("zero density at a frequency with non-zero coefficient")
    # E_rho[a^4 / rho^4] = sum a^4 / rho^3
    return float(np.sum(a[live] ** 4 / rho[live] ** 3))


def bound_value(profile, density, params):
    m4 = _fourth_moment_ratio(profile.norms, density)
    lead = (1.0 + params.lam * params.cbar) / (TWO_PI**2 * params.K)
    return lead * math.sqrt(m4) + profile.noise_variance - profile.mean_sq_field / params.K


def bound_objective(profile, p):
    """(sum |fhat|^4 / p^3) * (sum p)^3 for unnormalised positive p."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise DomainError("unnormalised density must be strictly positive")
    a = profile.norms
    return float(np.sum(a**4 / p**3) * np.sum(p) ** 3)


def _grid_steps(resolution):
    steps = round(1.0 / resolution)
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError(f"resolution {resolution} must divide 1")
    return steps


def brute_force_density_argmin(profile, grid_resolution):
    """Exact minimiser of the bound over the simplex grid of given resolution.

    On the normalised simplex the objective separates into a sum of
    per-frequency terms, so the exhaustive search over all grid points is
    carried out exactly by dynamic programming over frequencies.
    Zero-norm frequencies are excluded and receive probability 0.
    """
    a = profile.norms
    if len(a) > MAX_BRUTE_SUPPORT:
        raise ValueError(f"support of {len(a)} exceeds brute-force limit {MAX_BRUTE_SUPPORT}")
    live = np.flatnonzero(a > 0)
    if len(live) == 0:
        raise DomainError("all coefficient norms are zero")
    R = _grid_steps(grid_resolution)
    if R < len(live):
        raise ValueError("grid too coarse for a strictly positive density")
    k = np.arange(R + 1)
    with np.errstate(divide="ignore"):
        cost = [np.where(k > 0, a[i] ** 4 / (k / R) ** 3, np.inf) for i in live]
    # best[r] = minimal cost of the first j frequencies using r grid units
    best = cost[0].copy()
    choice = []
    for c in cost[1:]:
        total = best[:, None] + c[None, :]  # total[r, q]: r units before, q to this one
        new = np.full(R + 1, np.inf)
        arg = np.zeros(R + 1, dtype=np.int64)
        for r_tot in range(R + 1):
            q = np.arange(r_tot + 1)
            vals = total[r_tot - q, q]
            j = int(np.argmin(vals))
            new[r_tot], arg[r_tot] = vals[j], j
        choice.append(arg)
        best = new
    units = np.zeros(len(live), dtype=np.int64)
    r = R
    for j in range(len(live) - 1, 0, -1):
        units[j] = choice[j - 1][r]
        r -= units[j]
    units[0] = r
    rho = np.zeros(len(a))
    rho[live] = units / R
    return rho


def enumerate_simplex_grid(n, grid_resolution):
    """All points of the simplex grid with strictly positive entries (small n)."""
    R = _grid_steps(grid_resolution)
    for bars in combinations(range(1, R), n - 1):
        cuts = (0,) + bars + (R,)
        yield np.diff(cuts) / R


def field_value(support, coefficients, x):
    """f(x) = 1/(2 pi) sum fhat(w) exp(i w.x) on [0, 2 pi]^2; x is (n, 2)."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    ph = np.exp(1j * (x @ np.asarray(support, dtype=float).T))
    return ph @ np.asarray(coefficients, dtype=complex).reshape(-1, 2) / TWO_PI


@dataclass(frozen=True)
class UnbiasednessReport:
    max_standardized_deviation: float
    deviations: np.ndarray
    mean_estimates: np.ndarray
    truth: np.ndarray


def unbiasedness_check(field, density, K, draw_count, test_points, rng, batch=20000):
    """Monte-Carlo check that beta_k = fhat(w_k) / (2 pi K rho(w_k)) is unbiased.

    ``field`` supplies ``support`` and ``coefficients`` (e.g. a
    ``BandlimitedField``), read here as Fourier coefficients on [0, 2 pi]^2.

    For each draw, K frequencies are sampled iid from ``density`` and
    ``sum_k beta_k exp(i w_k.x)`` is evaluated at the test points.  The
    deviation of the draw mean from f(x) at each point is standardised by the
    Monte-Carlo standard error of the 4 real components (real and imaginary
    parts of both velocity components) taken jointly:
    ``|mean - f| / sqrt(trace(cov) / draws)``.
    """
    support = np.asarray(field.support, dtype=np.int64).reshape(-1, 2)
    fhat = np.asarray(field.coefficients, dtype=complex).reshape(-1, 2)
    rho = np.asarray(density, dtype=float)
    live = np.any(fhat != 0, axis=1)
    if np.any(rho[live] <= 0):
        raise DomainError("density must be positive on the field's support")
    rho = rho / rho.sum()
    x = np.asarray(test_points, dtype=float).reshape(-1, 2)
    rng = np.random.default_rng(rng)
    # per-support-point contribution K * beta(w) exp(i w.x) / K, shape (P, S, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(rho[:, None] > 0, fhat / (TWO_PI * K * np.where(rho > 0, rho, 1.0)[:, None]), 0)
    term = np.exp(1j * (x @ support.T.astype(float)))[:, :, None] * coef[None, :, :]
    truth = field_value(support, fhat, x)
    # accumulate deviations from the truth so an exact estimator has exactly zero spread
    s1 = np.zeros((len(x), 2), dtype=complex)
    s2 = np.zeros((len(x), 4))
    done = 0
    while done < draw_count:
        nb = min(batch, draw_count - done)
        draws = rng.choice(len(rho), size=(nb, K), p=rho)
        # counts of each support point per draw -> estimator is counts @ term
        counts = np.zeros((nb, len(rho)))
        np.add.at(counts, (np.repeat(np.arange(nb), K), draws.ravel()), 1.0)
        dev = np.einsum("ds,psc->dpc", counts, term) - truth[None]
        s1 += dev.sum(axis=0)
        parts = np.concatenate([dev.real, dev.imag], axis=2)
        s2 += (parts**2).sum(axis=0)
        done += nb
    bias = s1 / draw_count
    bparts = np.concatenate([bias.real, bias.imag], axis=1)
    var = np.maximum(s2 / draw_count - bparts**2, 0.0)
    dist = np.sqrt((bparts**2).sum(axis=1))
    se = np.sqrt(var.sum(axis=1) / draw_count)
    # a zero standard error means every draw was identical; compare exactly (to rounding)
    scale = np.abs(truth).max() + 1.0
    dev = np.where(se > 1e-13 * scale, dist / np.where(se > 0, se, 1.0), np.where(dist <= 1e-12 * scale, 0.0, np.inf))
    mean = truth + bias
    return UnbiasednessReport(float(dev.max()), dev, mean, truth)


def operator_cbar(ell1, ell2, moment_bound):
    """Cbar = (2 pi)^2 * C * sum_m |r_m| for r(w)^2 expanded in monomials.

    ``ell1`` and ``ell2`` describe the operator's action on each velocity
    component as lists of ``(c, a1, a2)`` terms of ``c * d1^a1 d2^a2``; the
    divergence is ``[(1, 1, 0)]`` and ``[(1, 0, 1)]``.  ``moment_bound`` is C.
    """

    def symbol(terms):
        # c * (i w1)^a1 (i w2)^a2 -> {(a1, a2): complex coefficient}
        out = defaultdict(complex)
        for c, a1, a2 in terms:
            out[(a1, a2)] += c * (1j) ** (a1 + a2)
        return out

    def mul(p, q):
        out = defaultdict(complex)
        for (a, b), c in p.items():
            for (d, e), g in q.items():
                out[(a + d, b + e)] += c * g
        return out

    def conj(p):
        return {k: np.conj(v) for k, v in p.items()}

    r = defaultdict(complex)
    for ell in (ell1, ell2):
        s = symbol(ell)
        for k, v in mul(s, conj(s)).items():
            r[k] += v
    r2 = mul(r, r)
    total = sum(abs(v.real) for v in r2.values() if abs(v) > 0)
    return TWO_PI**2 * moment_bound * total


DIVERGENCE_OPERATOR = ([(1.0, 1, 0)], [(1.0, 0, 1)])
