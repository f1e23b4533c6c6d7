import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windfield.synthetic import (
    BandlimitedField,
    StreamFunctionField,
    eval_field,
    field_from_dict,
    random_locations,
    random_stream_field,
    sample_slice,
    single_mode_field,
)


def unit_psi():
    return StreamFunctionField([[1, 1]], [1.0])


def test_stream_function_examples():
    f = unit_psi()
    assert eval_field(f, (0.5, 0.5)) == pytest.approx((0.0, 0.0), abs=1e-15)
    u, v = eval_field(f, (0.25, 0.5))
    assert u == pytest.approx(0.0, abs=1e-15)
    assert v == pytest.approx(-math.pi * math.cos(math.pi / 4), rel=1e-14)
    assert v == pytest.approx(-2.2214, abs=1e-4)


def test_empty_support_is_zero():
    f = BandlimitedField(np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2), dtype=complex))
    assert np.array_equal(eval_field(f, np.random.default_rng(0).uniform(size=(5, 2))), np.zeros((5, 2)))


def test_support_unique():
    with pytest.raises(ValueError):
        BandlimitedField([[1, 0], [1, 0]], [[1, 0], [1, 0]])


def test_divergence_free():
    rng = np.random.default_rng(1)
    f = random_stream_field(rng)
    x = rng.uniform(0.01, 0.99, size=(100, 2))
    h = 1e-5
    ex, ey = np.array([h, 0]), np.array([0, h])
    div = (f.value(x + ex)[:, 0] - f.value(x - ex)[:, 0] + f.value(x + ey)[:, 1] - f.value(x - ey)[:, 1]) / (2 * h)
    scale = np.abs(f.value(x)).max()
    assert np.abs(div).max() <= 1e-6 * scale


def test_stream_field_bandlimited_form_is_exact():
    rng = np.random.default_rng(2)
    f = random_stream_field(rng)
    b = f.to_bandlimited()
    assert b.is_real()
    x = rng.uniform(size=(50, 2))
    assert np.allclose(b.value(x), f.value(x), atol=1e-12)


def test_real_bandlimited_has_no_imaginary_part():
    f = single_mode_field((2, -1), amplitude=(0.4 + 1j, -0.7j))
    z = f.value_complex(np.random.default_rng(3).uniform(size=(40, 2)))
    assert np.abs(z.imag).max() <= 1e-12 * np.abs(z).max()


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_linear_in_coefficients(seed):
    rng = np.random.default_rng(seed)
    sup = np.array([[0, 1], [2, -1], [-3, 3]])
    c1 = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    c2 = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    x = rng.uniform(size=(10, 2))
    a = BandlimitedField(sup, c1).value_complex(x) + BandlimitedField(sup, c2).value_complex(x)
    assert np.allclose(BandlimitedField(sup, c1 + c2).value_complex(x), a, atol=1e-12)


def test_sample_slice_noise_free_and_deterministic():
    rng = np.random.default_rng(4)
    f = random_stream_field(rng)
    locs = random_locations(rng, 30)
    sl = sample_slice(f, locs, 0.0, 9)
    assert np.array_equal(sl.velocities, f.value(locs[:, :2]))
    assert sample_slice(f, locs, 0.3, 9) == sample_slice(f, locs, 0.3, 9)
    with pytest.raises(ValueError):
        sample_slice(f, np.zeros((0, 3)), 0.1, 0)


def test_noise_variance_chi_square_window():
    rng = np.random.default_rng(5)
    f = random_stream_field(rng)
    locs = random_locations(rng, 10_000)
    sl = sample_slice(f, locs, 0.1, 11)
    resid = sl.velocities - f.value(locs[:, :2])
    var = resid.var(axis=0, ddof=1)
    assert np.all((0.009 <= var) & (var <= 0.011))


def test_dict_round_trip():
    f = random_stream_field(np.random.default_rng(6), tau=(2.0, 3.0), origin=(1.0, -1.0))
    g = field_from_dict(f.to_dict())
    x = np.random.default_rng(0).uniform(size=(5, 2))
    assert np.array_equal(g.value(x), f.value(x))
    b = f.to_bandlimited()
    assert np.allclose(field_from_dict(b.to_dict()).value(x), b.value(x))
