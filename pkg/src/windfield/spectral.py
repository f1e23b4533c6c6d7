"""Regularised least squares in a complex exponential basis.

Frequencies are integer lattice points ``m``; on the rescaled unit square the
basis function is ``exp(i*pi*(m1*x + m2*y))`` and the angular frequency used
by the Sobolev and divergence penalties is ``omega = pi*m``.  Coefficients
are complex 2-vectors, stored as a (K, 2) complex array.

The empirical loss of coefficients ``beta`` on data ``(x_n, u_n)`` is

    1/N sum_n |beta(x_n) - u_n|^2
      + lam * sum_k (g^2 |w_k|^4 + g |w_k|^2 + 1) |beta_k|^2
      + eta * sum_k |w_k . beta_k|^2

and its minimiser solves a 2K x 2K Hermitian block system.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spl

from .data_model import centered_origin, rescale_to_unit
from .errors import DomainError, IllPosedError

LSTSQ_RCOND = 1e-12


@dataclass(frozen=True)
class LossParams:
    lam: float = 0.01
    eta: float = 0.001
    gamma_s: float = 1.0

    def __post_init__(self):
        for name in ("lam", "eta", "gamma_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and non-negative, got {v}")


def as_lattice(lattice):
    m = np.asarray(lattice, dtype=np.int64).reshape(-1, 2)
    if len(m) == 0:
        raise ValueError("frequency lattice must have at least one entry")
    return m


def sobolev_factor(m, gamma_s):
    """gamma^2 |w|^4 + gamma |w|^2 + 1 with |w|^2 = pi^2 (m1^2 + m2^2).

    Vectorised over a (K, 2) array of lattice points.
    """
    m = np.asarray(m, dtype=float)
    w2 = np.pi**2 * np.sum(m * m, axis=-1)
    return gamma_s**2 * w2**2 + gamma_s * w2 + 1.0


def divergence_quadform(m, beta_k):
    m = np.asarray(m, dtype=float)
    beta_k = np.asarray(beta_k, dtype=complex)
    d = np.pi * np.sum(m * beta_k, axis=-1)
    return np.abs(d) ** 2


def design_matrix(points, lattice):
    """S[n, k] = exp(i*pi*(m_k . x_n)) for points on the unit square."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    m = as_lattice(lattice)
    return np.exp(1j * np.pi * (pts @ m.T.astype(float)))


def evaluate_sum(points, lattice, beta):
    """Complex model value at rescaled points, shape (n, 2)."""
    return design_matrix(points, lattice) @ np.asarray(beta, dtype=complex).reshape(-1, 2)


def empirical_loss(lattice, beta, points, velocities, params):
    m = as_lattice(lattice)
    beta = np.asarray(beta, dtype=complex).reshape(-1, 2)
    u = np.asarray(velocities, dtype=float).reshape(-1, 2)
    resid = evaluate_sum(points, m, beta) - u
    data = np.sum(np.abs(resid) ** 2) / len(u)
    sob = np.sum(sobolev_factor(m, params.gamma_s) * np.sum(np.abs(beta) ** 2, axis=1))
    div = np.sum(divergence_quadform(m, beta))
    return float(data + params.lam * sob + params.eta * div)


def normal_system(points, velocities, lattice, params):
    """Assemble the Hermitian block system A beta = b.

    Unknowns are ordered [beta_1 (first velocity component); beta_2].
    """
    m = as_lattice(lattice)
    S = design_matrix(points, m)
    U = np.asarray(velocities, dtype=float).reshape(-1, 2)
    n, k = S.shape
    gram = S.conj().T @ S / n
    lam_diag = params.lam * sobolev_factor(m, params.gamma_s)
    d = math.sqrt(params.eta) * np.pi * m.astype(float)
    A = np.empty((2 * k, 2 * k), dtype=complex)
    A[:k, :k] = gram + np.diag(lam_diag + d[:, 0] ** 2)
    A[k:, k:] = gram + np.diag(lam_diag + d[:, 1] ** 2)
    A[:k, k:] = np.diag(d[:, 0] * d[:, 1])
    A[k:, :k] = A[:k, k:]
    rhs = S.conj().T @ U / n
    b = np.concatenate([rhs[:, 0], rhs[:, 1]])
    return A, b


def _stacked_lstsq(points, velocities, m, params):
    # Minimum-norm minimiser via SVD of the square-root form of the loss.
    S = design_matrix(points, m)
    U = np.asarray(velocities, dtype=float).reshape(-1, 2)
    n, k = S.shape
    blocks = []
    rhs = []
    z = np.zeros((n, k))
    blocks.append(np.hstack([S, z]) / math.sqrt(n))
    blocks.append(np.hstack([z, S]) / math.sqrt(n))
    rhs += [U[:, 0] / math.sqrt(n), U[:, 1] / math.sqrt(n)]
    if params.lam > 0:
        r = np.diag(np.sqrt(params.lam * sobolev_factor(m, params.gamma_s)))
        blocks.append(np.hstack([r, np.zeros((k, k))]))
        blocks.append(np.hstack([np.zeros((k, k)), r]))
        rhs += [np.zeros(k), np.zeros(k)]
    if params.eta > 0:
        d = math.sqrt(params.eta) * np.pi * m.astype(float)
        blocks.append(np.hstack([np.diag(d[:, 0]), np.diag(d[:, 1])]))
        rhs.append(np.zeros(k))
    Phi = np.vstack(blocks).astype(complex)
    y = np.concatenate(rhs).astype(complex)
    sol, *_ = spl.lstsq(Phi, y, cond=LSTSQ_RCOND, lapack_driver="gelsd")
    return sol


def solve_coefficients(points, velocities, lattice, params):
    """Minimise the empirical loss; returns a (K, 2) complex array.

    With ``lam > 0`` the system is positive definite and is solved by a
    Cholesky factorisation.  Otherwise the minimum-norm minimiser is taken
    from an SVD of the stacked least-squares form.
    """
    m = as_lattice(lattice)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("need at least one observation")
    k = len(m)
    if params.lam > 0:
        A, b = normal_system(pts, velocities, m, params)
        try:
            c = spl.cho_factor(A, lower=True, check_finite=False)
            sol = spl.cho_solve(c, b, check_finite=False)
        except spl.LinAlgError:
            sol = _stacked_lstsq(pts, velocities, m, params)
    else:
        sol = _stacked_lstsq(pts, velocities, m, params)
    if not np.all(np.isfinite(sol)):
        raise IllPosedError("coefficient solve produced non-finite values")
    return np.column_stack([sol[:k], sol[k:]])


@dataclass(frozen=True, eq=False)
class SpectralModel:
    lattice: np.ndarray
    beta: np.ndarray
    tau: tuple
    origin: tuple

    def __post_init__(self):
        m = as_lattice(self.lattice)
        b = np.asarray(self.beta, dtype=complex).reshape(-1, 2)
        if len(m) != len(b):
            raise ValueError("lattice and coefficient lengths differ")
        m.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "lattice", m)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    def predict_complex(self, points):
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, pts.shape[-1])[:, :2]
        xt = rescale_to_unit(pts, self.tau, self.origin)
        return evaluate_sum(xt, self.lattice, self.beta)

    def predict(self, points):
        """Real part of the model at physical points (n, 2) or (n, 3)."""
        return self.predict_complex(points).real

    def evaluate(self, x):
        u = self.predict(np.asarray(x, dtype=float)[None, :2])[0]
        return float(u[0]), float(u[1])

    def to_dict(self):
        b = self.beta
        return {
            "tau": list(self.tau),
            "origin": list(self.origin),
            "lattice": self.lattice.tolist(),
            "beta": [[float(r[0].real), float(r[0].imag), float(r[1].real), float(r[1].imag)] for r in b],
        }

    @classmethod
    def from_dict(cls, d):
        beta = np.array([[complex(a, b), complex(c, e)] for a, b, c, e in d["beta"]], dtype=complex)
        return cls(np.array(d["lattice"], dtype=np.int64).reshape(-1, 2), beta, tuple(d["tau"]), tuple(d["origin"]))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_spectral(slice_, lattice, params, tau, origin=None):
    """Solve for coefficients on a time slice and wrap them in a model.

    With ``origin=None`` the box is centred on the slice's stations.
    """
    xy = slice_.points[:, :2]
    if origin is None:
        origin = centered_origin(xy.min(axis=0), xy.max(axis=0), tau)
    xt = rescale_to_unit(xy, tau, origin)
    beta = solve_coefficients(xt, slice_.velocities, lattice, params)
    return SpectralModel(lattice, beta, tuple(tau), tuple(origin))
