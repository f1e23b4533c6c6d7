import math

import numpy as np
import pytest
from scipy.stats import norm

from windfield.data_model import TimeSlice
from windfield.errors import DomainError
from windfield.rff import (
    GAMMA_PRESETS,
    LATTICE_BOUND,
    ChainHistory,
    RffHyperparams,
    accept_frequency,
    acceptance_probability,
    chain_diagnostics,
    chain_rng,
    modal_frequency,
    propose_step,
    train,
)
from windfield.spectral import LossParams, empirical_loss, solve_coefficients
from windfield.synthetic import random_locations, random_stream_field, sample_slice

UNIT = dict(tau=(1.0, 1.0), origin=(0.0, 0.0))


def small_slice(seed, n=40, noise=0.05):
    rng = np.random.default_rng(seed)
    f = random_stream_field(rng)
    return sample_slice(f, random_locations(rng, n), noise, seed)


def test_hyperparam_validation():
    for bad in (dict(K=0), dict(B=-1), dict(sigma=-0.1), dict(gamma_exp=0.0)):
        with pytest.raises(DomainError):
            RffHyperparams(**bad)
    assert GAMMA_PRESETS["asymptotic"] == 4.0
    assert RffHyperparams().gamma_exp == 1.4


def test_propose_zero_sigma_and_determinism():
    lat = np.array([[1, 2], [-3, 0]])
    p, nc = propose_step(lat, 0.0, np.random.default_rng(0))
    assert np.array_equal(p, lat) and nc == 0
    a, _ = propose_step(lat, 2.25, np.random.default_rng(5))
    b, _ = propose_step(lat, 2.25, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_proposal_is_rounded_gaussian():
    sigma = 2.25
    p, _ = propose_step(np.zeros((50_000, 2), dtype=np.int64), sigma, np.random.default_rng(1))
    inc = p.ravel()
    ks = np.arange(-15, 16)
    exact = norm.cdf((ks + 0.5) / sigma) - norm.cdf((ks - 0.5) / sigma)
    emp = np.array([(inc == k).mean() for k in ks])
    assert 0.5 * np.abs(emp - exact).sum() <= 0.01


def test_proposal_clamped():
    lat = np.full((4, 2), LATTICE_BOUND)
    p, nc = propose_step(lat, 50.0, np.random.default_rng(2))
    assert np.abs(p).max() <= LATTICE_BOUND
    assert nc > 0


def test_accept_special_cases():
    rng = np.random.default_rng(0)
    assert all(accept_frequency([1, 1j], [1j, -1], 1.4, rng) for _ in range(1000))
    assert not any(accept_frequency([1, 0], [0, 0], 1.4, rng) for _ in range(1000))
    assert all(accept_frequency([0, 0], [0, 0], 1.4, rng) for _ in range(100))
    assert acceptance_probability(0.0, 1.0, 2.0) == 1.0


@pytest.mark.parametrize("r,gamma", [(0.3, 2.0), (0.3, 1.4), (1.0, 1.4), (1.5, 1.4)])
def test_acceptance_rate_binomial(r, gamma):
    n = 100_000
    rng = np.random.default_rng(int(r * 100 + gamma * 10))
    hits = sum(accept_frequency([1.0, 0.0], [r, 0.0], gamma, rng) for _ in range(n))
    p = min(1.0, r**gamma)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) <= 3 * se + 1e-12


def test_b0_is_direct_solve():
    sl = small_slice(0)
    hp = RffHyperparams(K=6, B=0, loss=LossParams(0.01, 0.001), **UNIT)
    model, hist = train(sl, hp)
    assert len(hist) == 0
    ref = solve_coefficients(sl.points[:, :2], sl.velocities, np.zeros((6, 2), dtype=int), hp.loss)
    assert np.array_equal(model.lattice, np.zeros((6, 2)))
    assert np.allclose(model.beta, ref, atol=1e-14)


def test_single_observation_shrinkage():
    sl = TimeSlice(None, [[0.3, 0.6]], [[2.0, -1.0]], ("a",))
    lam = 0.01
    model, _ = train(sl, RffHyperparams(K=5, B=20, loss=LossParams(lam, 0.0), seed=3, **UNIT))
    pred = model.predict([[0.3, 0.6]])[0]
    assert np.linalg.norm(pred - sl.velocities[0]) <= np.linalg.norm(sl.velocities[0]) * lam * 2


def test_deterministic():
    sl = small_slice(1)
    hp = RffHyperparams(K=8, B=15, seed=7, **UNIT)
    m1, h1 = train(sl, hp)
    m2, h2 = train(sl, hp)
    assert np.array_equal(m1.lattice, m2.lattice)
    assert np.array_equal(m1.beta, m2.beta)
    assert np.array_equal(h1.lattices, h2.lattices) and np.array_equal(h1.accepted, h2.accepted)


def test_final_coefficients_optimal():
    sl = small_slice(2)
    hp = RffHyperparams(K=6, B=20, seed=1, loss=LossParams(0.01, 0.001), **UNIT)
    model, _ = train(sl, hp)
    xt, u = sl.points[:, :2], sl.velocities
    b = model.beta
    theta = np.concatenate([b.real.ravel(), b.imag.ravel()])
    n = b.size

    def loss(t):
        return empirical_loss(model.lattice, (t[:n] + 1j * t[n:]).reshape(b.shape), xt, u, hp.loss)

    h = 1e-6
    g = [(loss(theta + h * e) - loss(theta - h * e)) / (2 * h) for e in np.eye(len(theta))]
    assert np.max(np.abs(g)) <= 1e-6 * (1 + loss(theta))


def test_chain_does_not_hurt():
    better = 0
    for seed in range(50):
        sl = small_slice(100 + seed, n=30)
        par = LossParams(0.01, 0.001, 0.01)
        hp = RffHyperparams(K=10, B=30, seed=seed, loss=par, **UNIT)
        m, _ = train(sl, hp)
        m0, _ = train(sl, RffHyperparams(K=10, B=0, loss=par, **UNIT))
        xt = sl.points[:, :2]
        l1 = empirical_loss(m.lattice, m.beta, xt, sl.velocities, par)
        l0 = empirical_loss(m0.lattice, m0.beta, xt, sl.velocities, par)
        better += l1 <= l0
    assert better >= 45


def test_history_csv():
    sl = small_slice(3)
    _, h = train(sl, RffHyperparams(K=3, B=4, seed=0, **UNIT))
    lines = h.to_csv().splitlines()
    assert lines[0] == "step,k,m1,m2,accepted"
    assert len(lines) == 1 + 4 * 3
    step, k, m1, m2, acc = lines[-1].split(",")
    assert (int(step), int(k)) == (4, 2)
    assert [int(m1), int(m2)] == h.lattices[3, 2].tolist()


def test_diagnostics_examples():
    lat = np.zeros((5, 3, 2), dtype=np.int64)
    rate, hist = chain_diagnostics(ChainHistory(lat, np.zeros((5, 3), dtype=bool)))
    assert rate == 0.0 and hist == {(0, 0): 15}
    rate, _ = chain_diagnostics(ChainHistory(np.ones((1, 2, 2), dtype=np.int64), np.ones((1, 2), dtype=bool)))
    assert rate == 1.0
    with pytest.raises(ValueError):
        chain_diagnostics(ChainHistory(np.zeros((0, 2, 2)), np.zeros((0, 2), dtype=bool)))
    assert modal_frequency({(1, 0): 3, (-1, 0): 3, (2, 2): 1}) == (-1, 0)


def test_chain_streams_independent():
    a = chain_rng(5, 0).standard_normal(4)
    b = chain_rng(5, 1).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(chain_rng(5, 1).standard_normal(4), b)
