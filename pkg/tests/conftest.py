import math

import numpy as np
import pytest

from inextbeam import BeamParameters, build_basis, build_context, build_operators


def bisect(f, lo, hi, tol=1e-14, max_iter=200):
    """Plain bisection; the independent root oracle for the wavenumbers."""
    flo = f(lo)
    assert flo * f(hi) < 0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or hi - lo < tol:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def char_fn(z):
    return math.cos(z) * math.cosh(z) + 1.0


def trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def closed_form_mode(kappa, length, x, order=0):
    """Textbook c[cos - cosh] + C[sin - sinh] with c = 1 (unnormalized), differentiated by hand."""
    z = kappa * length
    r = -(math.cos(z) + math.cosh(z)) / (math.sin(z) + math.sinh(z))
    kx = kappa * x
    trig = [np.cos(kx) + r * np.sin(kx), -np.sin(kx) + r * np.cos(kx),
            -np.cos(kx) - r * np.sin(kx), np.sin(kx) - r * np.cos(kx)]
    hyp = [np.cosh(kx) + r * np.sinh(kx), np.sinh(kx) + r * np.cosh(kx)]
    return kappa**order * (trig[order % 4] - hyp[order % 2])


@pytest.fixture(scope="session")
def quad():
    return build_context()


@pytest.fixture(scope="session")
def basis4(quad):
    return build_basis(4, 1.0, quad)


@pytest.fixture(scope="session")
def ops_full():
    """sigma = iota = 1, k2 = 0.05, four modes."""
    return build_operators(BeamParameters(k2=0.05, sigma=1, iota=1), 4)


@pytest.fixture(scope="session")
def ops_factory():
    cache = {}

    def make(n=4, **params):
        key = (n, tuple(sorted(params.items())))
        if key not in cache:
            base = cache.get((n, ()))
            if base is None:
                base = cache[(n, ())] = build_operators(BeamParameters(), n)
            cache[key] = base.with_params(BeamParameters(**params))
        return cache[key]

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
