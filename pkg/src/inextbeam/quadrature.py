"""Composite Gauss-Legendre quadrature on [0, L].

Everything that integrates in space goes through a :class:`QuadratureContext`:
inner products, nested primitives ``F(x) = int_0^x f``, and the mapped
partial rules used to evaluate primitives at arbitrary output points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

MAX_POINTS_PER_PANEL = 16


class QuadratureError(ValueError):
    pass


def _partial_integration_matrix(p: int) -> np.ndarray:
    """Map samples at the p Gauss nodes on [-1, 1] to int_{-1}^{xi_k} of their interpolant."""
    xi, _ = legendre.leggauss(p)
    vander = legendre.legvander(xi, p - 1)
    antideriv = np.empty((p, p))
    for m in range(p):
        coef = np.zeros(p)
        coef[m] = 1.0
        antideriv[:, m] = legendre.legval(xi, legendre.legint(coef, lbnd=-1))
    return np.linalg.solve(vander.T, antideriv.T).T


@dataclass(frozen=True)
class QuadratureContext:
    panels: int
    points_per_panel: int
    length: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    order: int = 0
    _ref_nodes: np.ndarray = field(repr=False, default=None)
    _ref_weights: np.ndarray = field(repr=False, default=None)
    _partial: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.nodes.size

    def key(self) -> tuple:
        return (self.panels, self.points_per_panel, float(self.length))


def build_context(panels: int = 16, points_per_panel: int = 16, length: float = 1.0) -> QuadratureContext:
    """Composite rule with ``panels`` equal panels of ``points_per_panel`` Gauss points each.

    The rule integrates polynomials of degree ``2 * points_per_panel - 1``
    exactly on every panel.
    """
    if int(panels) != panels or panels < 1:
        raise QuadratureError(f"panels must be a positive integer, got {panels!r}")
    if int(points_per_panel) != points_per_panel or not 2 <= points_per_panel <= MAX_POINTS_PER_PANEL:
        raise QuadratureError(
            f"points_per_panel must be an integer in [2, {MAX_POINTS_PER_PANEL}], got {points_per_panel!r}"
        )
    if not np.isfinite(length) or length <= 0:
        raise QuadratureError(f"length must be positive, got {length!r}")
    panels, points_per_panel, length = int(panels), int(points_per_panel), float(length)

    xi, wi = legendre.leggauss(points_per_panel)
    edges = np.linspace(0.0, length, panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = (edges[:-1, None] + (xi[None, :] + 1.0) * half[:, None]).ravel()
    weights = (wi[None, :] * half[:, None]).ravel()
    for arr in (nodes, weights, edges, xi, wi):
        arr.setflags(write=False)
    partial = _partial_integration_matrix(points_per_panel)
    partial.setflags(write=False)
    return QuadratureContext(
        panels=panels,
        points_per_panel=points_per_panel,
        length=length,
        nodes=nodes,
        weights=weights,
        edges=edges,
        order=2 * points_per_panel - 1,
        _ref_nodes=xi,
        _ref_weights=wi,
        _partial=partial,
    )


def _check_finite(samples: np.ndarray, quad: QuadratureContext, what: str = "sample") -> None:
    if np.all(np.isfinite(samples)):
        return
    bad = np.argwhere(~np.isfinite(samples))[0]
    x = quad.nodes[bad[-1]] if samples.shape[-1] == quad.size else float("nan")
    raise QuadratureError(f"non-finite {what} at node x={x:.17g} (index {tuple(bad)})")


def sample(f: Callable[[np.ndarray], np.ndarray] | np.ndarray | float, quad: QuadratureContext) -> np.ndarray:
    """Samples of ``f`` on the node grid; arrays pass through, scalars broadcast."""
    if callable(f):
        vals = np.asarray(f(quad.nodes), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    if vals.ndim == 0:
        vals = np.full(quad.size, float(vals))
    if vals.shape[-1] != quad.size:
        raise QuadratureError(f"expected {quad.size} samples on the last axis, got shape {vals.shape}")
    return vals


def integrate(f, quad: QuadratureContext) -> np.ndarray | float:
    """int_0^L f dx; leading axes of sampled input are kept."""
    vals = sample(f, quad)
    _check_finite(vals, quad)
    return vals @ quad.weights


def inner_product(f, g, quad: QuadratureContext) -> np.ndarray | float:
    """L2(0, L) inner product sum_k w_k f(x_k) g(x_k)."""
    fv = sample(f, quad)
    gv = sample(g, quad)
    _check_finite(fv, quad)
    _check_finite(gv, quad)
    return (fv * gv) @ quad.weights


def cumulative_primitive(f, quad: QuadratureContext, with_end: bool = False) -> np.ndarray:
    """F(x_k) = int_0^{x_k} f at every node.

    Whole panels left of the node are summed with the full Gauss rule; the
    partial panel integrates the panel's degree ``p - 1`` interpolant up to
    the node. Leading axes are batch axes. With ``with_end`` the value
    F(L) is appended as one extra trailing sample.
    """
    vals = sample(f, quad)
    _check_finite(vals, quad)
    p, P = quad.points_per_panel, quad.panels
    batch = vals.shape[:-1]
    blocks = vals.reshape(*batch, P, p)
    half = 0.5 * np.diff(quad.edges)
    partial = np.einsum("kj,...Pj->...Pk", quad._partial, blocks) * half[:, None]
    full = (blocks @ quad._ref_weights) * half
    offsets = np.cumsum(full, axis=-1) - full
    F = (partial + offsets[..., None]).reshape(*batch, P * p)
    if with_end:
        F = np.concatenate([F, np.sum(full, axis=-1)[..., None]], axis=-1)
    return F


def primitive_at(func: Callable[[np.ndarray], np.ndarray], points, quad: QuadratureContext) -> np.ndarray:
    """F(x) = int_0^x func at arbitrary points in [0, L].

    Preceding whole panels use the panel rule; the remainder uses the same
    Gauss rule mapped onto [panel start, x]. ``func`` is evaluated at the
    mapped points, so it must accept any x in [0, L] and may return extra
    leading axes (shape ``(..., len(x))``).
    """
    x = np.atleast_1d(np.asarray(points, dtype=float))
    L = quad.length
    if np.any(x < 0) or np.any(x > L * (1 + 1e-14)):
        raise QuadratureError("primitive points must lie in [0, L]")
    x = np.clip(x, 0.0, L)

    panel_vals = np.asarray(func(quad.nodes), dtype=float)
    _check_finite(panel_vals, quad)
    p, P = quad.points_per_panel, quad.panels
    half = 0.5 * np.diff(quad.edges)
    full = (panel_vals.reshape(*panel_vals.shape[:-1], P, p) @ quad._ref_weights) * half
    cum = np.concatenate([np.zeros(full.shape[:-1] + (1,)), np.cumsum(full, axis=-1)], axis=-1)

    idx = np.minimum(np.searchsorted(quad.edges, x, side="right") - 1, P - 1)
    start = quad.edges[idx]
    span = 0.5 * (x - start)
    mapped = (start[:, None] + (quad._ref_nodes[None, :] + 1.0) * span[:, None]).ravel()
    mapped_vals = np.asarray(func(mapped), dtype=float)
    if not np.all(np.isfinite(mapped_vals)):
        raise QuadratureError("non-finite integrand at a mapped partial-rule point")
    mapped_vals = mapped_vals.reshape(*mapped_vals.shape[:-1], x.size, p)
    partial = (mapped_vals @ quad._ref_weights) * span
    return cum[..., idx] + partial
