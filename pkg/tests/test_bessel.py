import mpmath
import numpy as np
import pytest

from shellsonar.errors import ParameterError
from shellsonar.physics import spherical_bessel_table

mpmath.mp.dps = 40


def mp_sph(n, x):
    """Arbitrary-precision j_n, y_n from half-integer cylinder functions."""
    x = mpmath.mpf(x)
    scale = mpmath.sqrt(mpmath.pi / (2 * x))
    return float(scale * mpmath.besselj(n + 0.5, x)), float(scale * mpmath.bessely(n + 0.5, x))


ORDERS = list(range(0, 31, 3)) + [30]
ARGS = [0.05, 0.3, 1.0, 2.7, 7.5, 13.0, 29.9, 44.4, 60.0]


@pytest.fixture(scope="module")
def oracle():
    return {(n, x): mp_sph(n, x) for n in ORDERS for x in ARGS}


def error_scale(ref, n, x):
    """Relative error, except near oscillation zeros where the envelope 1/x is used."""
    return max(abs(ref), 1.0 / x) if n < x else abs(ref)


def test_against_arbitrary_precision(oracle):
    x = np.array(ARGS)
    t = spherical_bessel_table(30, x)
    for (n, xv), (jr, yr) in oracle.items():
        i = ARGS.index(xv)
        assert abs(t.j[n, i] - jr) <= 1e-10 * error_scale(jr, n, xv), (n, xv)
        assert abs(t.y[n, i] - yr) <= 1e-10 * error_scale(yr, n, xv), (n, xv)


@pytest.mark.parametrize("x", [0.1, 1.0, 25.0, 100.0])
def test_wronskian(x):
    t = spherical_bessel_table(60, np.array([x]))
    w = t.j[:, 0] * t.yp[:, 0] - t.jp[:, 0] * t.y[:, 0]
    rel = np.abs(w * x**2 - 1.0)
    finite = np.isfinite(w)
    assert finite.all()
    assert rel.max() <= 1e-10


def test_closed_forms():
    x = np.linspace(0.2, 40.0, 200)
    t = spherical_bessel_table(2, x)
    s, c = np.sin(x), np.cos(x)
    np.testing.assert_allclose(t.j[0], s / x, atol=1e-14)
    np.testing.assert_allclose(t.y[0], -c / x, atol=1e-14)
    np.testing.assert_allclose(t.j[1], s / x**2 - c / x, atol=1e-14)
    np.testing.assert_allclose(t.j[2], (3 / x**2 - 1) * s / x - 3 * c / x**2, atol=1e-13)
    np.testing.assert_allclose(t.jp[0], -t.j[1], atol=1e-14)
    np.testing.assert_allclose(t.yp[0], -t.y[1], atol=1e-14)


def test_small_argument_limit():
    x = np.array([1e-4])
    t = spherical_bessel_table(3, x)
    # j_n(x) ~ x^n / (2n+1)!!
    np.testing.assert_allclose(t.j[:, 0], [1.0, x[0] / 3, x[0] ** 2 / 15, x[0] ** 3 / 105], rtol=1e-6)


def test_shape_follows_argument():
    t = spherical_bessel_table(4, np.ones((3, 2)))
    assert t.j.shape == (5, 3, 2)


@pytest.mark.parametrize("x", [0.0, -1.0, np.nan])
def test_domain_error(x):
    with pytest.raises(ParameterError):
        spherical_bessel_table(3, np.array([1.0, x]))


def test_overflow_is_reported():
    with pytest.raises(OverflowError):
        spherical_bessel_table(200, np.array([0.05]))
