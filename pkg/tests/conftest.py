import numpy as np
import pytest

from windfield.spectral import LossParams


def random_instance(seed, lam_choices=(0.0, 0.01, 1.0), eta_choices=(0.0, 0.01, 1.0)):
    """Seeded solver instance with K <= 20, N <= 50."""
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 21))
    N = int(rng.integers(1, 51))
    pts = rng.uniform(size=(N, 2))
    vel = rng.normal(size=(N, 2))
    lattice = rng.integers(-4, 5, size=(K, 2))
    params = LossParams(float(rng.choice(lam_choices)), float(rng.choice(eta_choices)), 1.0)
    return pts, vel, lattice, params


def stacked_real_system(points, velocities, lattice, params):
    """Loss written as ||A theta - b||^2 over theta = [Re b1, Im b1, Re b2, Im b2].

    Built from scratch in real arithmetic, independently of the complex block
    assembly in the library.
    """
    N = len(points)
    m = np.asarray(lattice, dtype=float)
    K = len(m)
    ph = np.pi * (points @ m.T)
    C, S = np.cos(ph), np.sin(ph)
    Z = np.zeros((N, K))
    # Re(S b) = C Re b - S Im b ; Im(S b) = S Re b + C Im b
    rows = [
        np.hstack([C, -S, Z, Z]),
        np.hstack([S, C, Z, Z]),
        np.hstack([Z, Z, C, -S]),
        np.hstack([Z, Z, S, C]),
    ]
    A = np.vstack(rows) / np.sqrt(N)
    b = np.concatenate([velocities[:, 0], np.zeros(N), velocities[:, 1], np.zeros(N)]) / np.sqrt(N)
    w2 = np.pi**2 * (m**2).sum(axis=1)
    g = params.gamma_s
    sob = g * g * w2**2 + g * w2 + 1.0
    if params.lam > 0:
        d = np.sqrt(params.lam * sob)
        A = np.vstack([A, np.diag(np.concatenate([d, d, d, d]))])
        b = np.concatenate([b, np.zeros(4 * K)])
    if params.eta > 0:
        w1, w2c = np.sqrt(params.eta) * np.pi * m[:, 0], np.sqrt(params.eta) * np.pi * m[:, 1]
        D1, D2 = np.diag(w1), np.diag(w2c)
        ZK = np.zeros((K, K))
        # real and imaginary parts of w1 b1 + w2 b2
        A = np.vstack([A, np.hstack([D1, ZK, D2, ZK]), np.hstack([ZK, D1, ZK, D2])])
        b = np.concatenate([b, np.zeros(2 * K)])
    return A, b


def oracle_solve(points, velocities, lattice, params):
    A, b = stacked_real_system(points, velocities, lattice, params)
    K = len(lattice)
    if params.lam > 0:
        theta = np.linalg.solve(A.T @ A, A.T @ b)
    else:
        theta = np.linalg.lstsq(A, b, rcond=1e-12)[0]
    r1, i1, r2, i2 = theta.reshape(4, K)
    return np.column_stack([r1 + 1j * i1, r2 + 1j * i2])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
