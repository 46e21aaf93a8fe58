"""Clamped-free Euler-Bernoulli eigenfunctions.

Mode n is

    s_n(x) = c_n [cos(k x) - cosh(k x)] + C_n [sin(k x) - sinh(k x)],

with k = kappa_n the n-th positive root of cos(kL) cosh(kL) = -1 and
d^4 s_n / dx^4 = kappa_n^4 s_n. The shapes do not depend on the flexural
stiffness D; callers multiply by D where stiffness enters.

The hyperbolic terms grow like exp(kx) and cancel against each other, so
the closed form loses all precision past kL ~ 35. Evaluation here uses the
algebraically identical split

    s_n / c_n = cos(kx) + r sin(kx) - exp(-kx) - beta sinh(kx),
    r = C_n / c_n,    beta = 1 + r = O(exp(-kL)),

where beta is computed directly from exp(-kL) and beta * sinh(kx) stays O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .quadrature import QuadratureContext, build_context, inner_product

MAX_DEFAULT_MODES = 16
ROOT_TOL = 1e-12


class ModeBasisError(ValueError):
    pass


def characteristic(z):
    """cos(z) cosh(z) + 1, the unscaled clamped-free characteristic function."""
    return np.cos(z) * np.cosh(z) + 1.0


def characteristic_scaled(z):
    """cos(z) + sech(z); same roots as :func:`characteristic`, no overflow."""
    return np.cos(z) + 1.0 / np.cosh(z)


def characteristic_residual(z) -> np.ndarray:
    """|cos(z) + sech(z)|, the characteristic residual in overflow-safe form.

    The unscaled product cos(z) cosh(z) + 1 amplifies the last-bit error in
    z by cosh(z), so it cannot reach 1e-12 beyond the third root in double
    precision; the sech form has the same roots and stays at round-off.
    """
    return np.abs(characteristic_scaled(np.asarray(z, dtype=float)))


def solve_wavenumbers(n: int, length: float = 1.0) -> np.ndarray:
    """The ``n`` smallest positive roots kappa of cos(kappa L) cosh(kappa L) = -1.

    Each root is bracketed on (g - 1, g + 1) around the asymptotic guess
    g = (2m - 1) pi / 2 and polished with Brent's method on the sech form.
    """
    if int(n) != n or n < 1:
        raise ModeBasisError(f"mode count must be a positive integer, got {n!r}")
    if not np.isfinite(length) or length <= 0:
        raise ModeBasisError(f"length must be positive, got {length!r}")

    roots = np.empty(int(n))
    for m in range(1, int(n) + 1):
        guess = (2 * m - 1) * np.pi / 2
        lo, hi = guess - 1.0, guess + 1.0
        flo, fhi = characteristic_scaled(lo), characteristic_scaled(hi)
        if not (np.isfinite(flo) and np.isfinite(fhi)):
            raise ModeBasisError(f"non-finite characteristic value bracketing mode {m} on [{lo}, {hi}]")
        if np.sign(flo) == np.sign(fhi):
            raise ModeBasisError(f"no sign change bracketing mode {m} on [{lo}, {hi}]")
        z = brentq(characteristic_scaled, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        if not abs(characteristic_scaled(z)) <= ROOT_TOL:
            raise ModeBasisError(f"root for mode {m} did not converge: residual {characteristic_scaled(z):.3e}")
        roots[m - 1] = z
    return roots / length


def _split_coefficients(z: float) -> tuple[float, float]:
    """(r, beta) = (C/c, 1 + C/c) at kL = z, evaluated without cosh/sinh."""
    e = np.exp(-z)
    denom = 1.0 - e * e + 2.0 * np.sin(z) * e
    if abs(denom) < 1e-14:
        raise ModeBasisError(f"sin(kL) + sinh(kL) vanishes at kL={z!r}")
    beta = 2.0 * e * (np.sin(z) - np.cos(z) - e) / denom
    return beta - 1.0, beta


def _unit_shape(kappa: float, r: float, beta: float, x: np.ndarray, order: int) -> np.ndarray:
    """d^order/dx^order of s/c (c = 1) at x, with r = beta - 1 imposed."""
    th = kappa * x
    if order == 1:
        # grouped so that every bracket vanishes identically at x = 0
        val = (-np.sin(th) + r * (np.cos(th) - 1.0) + np.expm1(-th)
               - beta * (2.0 * np.sinh(0.5 * th) ** 2))
        return kappa * val
    cos_t, sin_t = np.cos(th), np.sin(th)
    trig = (cos_t + r * sin_t, -sin_t + r * cos_t, -cos_t - r * sin_t, sin_t - r * cos_t)[order % 4]
    hyper = np.sinh(th) if order % 2 == 0 else np.cosh(th)
    return kappa**order * (trig - (-1.0) ** order * np.exp(-th) - beta * hyper)


def shape_coefficients(kappa: float, length: float, quad: QuadratureContext) -> tuple[float, float]:
    """(c, C) for wavenumber ``kappa``: C from the free-end conditions, c > 0 from unit L2 norm."""
    z = kappa * length
    if abs(characteristic_scaled(z)) > 1e-10:
        raise ModeBasisError(f"kappa={kappa!r} does not satisfy the characteristic equation")
    r, beta = _split_coefficients(z)
    norm2 = inner_product(_unit_shape(kappa, r, beta, quad.nodes, 0),
                          _unit_shape(kappa, r, beta, quad.nodes, 0), quad)
    c = 1.0 / np.sqrt(norm2)
    return c, c * r


@dataclass(frozen=True)
class ModeBasis:
    n_modes: int
    length: float
    wavenumbers: np.ndarray
    shape_coeffs: np.ndarray  # (n, 2): columns c_n, C_n
    _ratio: np.ndarray = field(repr=False, default=None)  # C_n / c_n
    _beta: np.ndarray = field(repr=False, default=None)  # 1 + C_n / c_n

    @property
    def kappa4(self) -> np.ndarray:
        return self.wavenumbers**4

    def key(self) -> tuple:
        return (self.n_modes, float(self.length))

    def _values(self, j: int, x: np.ndarray, order: int) -> np.ndarray:
        k = self.wavenumbers[j]
        c = self.shape_coeffs[j, 0]
        if order == 4:
            return k**4 * c * _unit_shape(k, self._ratio[j], self._beta[j], x, 0)
        return c * _unit_shape(k, self._ratio[j], self._beta[j], x, order)

    def evaluate(self, x, order: int = 0) -> np.ndarray:
        """All modes at ``x``; shape ``(n_modes, len(x))``."""
        if order not in (0, 1, 2, 3, 4):
            raise ModeBasisError(f"derivative order must be in 0..4, got {order!r}")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([self._values(j, x, order) for j in range(self.n_modes)])


def build_basis(n_modes: int, length: float = 1.0, quad: QuadratureContext | None = None) -> ModeBasis:
    if quad is None:
        quad = build_context(length=length)
    if abs(quad.length - length) > 1e-14 * length:
        raise ModeBasisError(f"quadrature length {quad.length} differs from beam length {length}")
    kappa = solve_wavenumbers(n_modes, length)
    coeffs = np.empty((n_modes, 2))
    ratios = np.empty(n_modes)
    betas = np.empty(n_modes)
    for j, k in enumerate(kappa):
        coeffs[j] = shape_coefficients(k, length, quad)
        ratios[j], betas[j] = _split_coefficients(k * length)
    for arr in (kappa, coeffs, ratios, betas):
        arr.setflags(write=False)
    return ModeBasis(n_modes=int(n_modes), length=float(length), wavenumbers=kappa,
                     shape_coeffs=coeffs, _ratio=ratios, _beta=betas)


def eval_mode(basis: ModeBasis, n: int, x, order: int = 0):
    """d^order s_n / dx^order at ``x`` for the 1-based mode index ``n``.

    Returns a float for scalar ``x``, an array otherwise.
    """
    if int(n) != n or not 1 <= n <= basis.n_modes:
        raise ModeBasisError(f"mode index {n!r} outside 1..{basis.n_modes}")
    if order not in (0, 1, 2, 3, 4):
        raise ModeBasisError(f"derivative order must be in 0..4, got {order!r}")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0) or np.any(xs > basis.length):
        raise ModeBasisError("evaluation points must lie in [0, L]")
    vals = basis._values(int(n) - 1, xs, order)
    return float(vals[0]) if scalar else vals


@dataclass(frozen=True)
class BasisReport:
    orthonormality_error: float  # max |(s_i, s_j) - delta_ij|
    stiffness_error: float  # max |(s_i'', s_j'') - kappa_i^4 delta_ij|
    stiffness_error_scaled: float  # same, divided by kappa_i^2 kappa_j^2
    characteristic_residual: float
    free_end_error: float  # max over n of |s''(L)|/k^2 and |s'''(L)|/k^3
    clamped_error: float  # max |s(0)|, |s'(0)|


def verify_basis(basis: ModeBasis, quad: QuadratureContext) -> BasisReport:
    s0 = basis.evaluate(quad.nodes, 0)
    s2 = basis.evaluate(quad.nodes, 2)
    gram = (s0 * quad.weights) @ s0.T
    stiff = (s2 * quad.weights) @ s2.T
    k = basis.wavenumbers
    k2 = np.outer(k**2, k**2)
    stiff_dev = stiff - np.diag(k**4)
    L = basis.length
    free = max(np.max(np.abs(basis.evaluate([L], 2)[:, 0]) / k**2),
               np.max(np.abs(basis.evaluate([L], 3)[:, 0]) / k**3))
    clamped = max(np.max(np.abs(basis.evaluate([0.0], 0))), np.max(np.abs(basis.evaluate([0.0], 1))))
    return BasisReport(
        orthonormality_error=float(np.max(np.abs(gram - np.eye(basis.n_modes)))),
        stiffness_error=float(np.max(np.abs(stiff_dev))),
        stiffness_error_scaled=float(np.max(np.abs(stiff_dev) / k2)),
        characteristic_residual=float(np.max(characteristic_residual(k * L))),
        free_end_error=float(free),
        clamped_error=float(clamped),
    )
