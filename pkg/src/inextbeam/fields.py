"""Physical-space fields from a modal state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import ModeBasis
from .quadrature import QuadratureContext, primitive_at
from .dynamics import _state_arrays

SNAPSHOT_COLUMNS = ("x", "w", "w_x", "w_xx", "w_xxx", "w_xxxx", "u", "u_t", "u_tt", "inext_deviation")
DEFAULT_GRID_POINTS = 201


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    grid: np.ndarray
    w: np.ndarray
    w_x: np.ndarray
    w_xx: np.ndarray
    w_xxx: np.ndarray
    w_xxxx: np.ndarray
    u: np.ndarray
    u_t: np.ndarray
    u_tt: np.ndarray | None
    inext_deviation: np.ndarray

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"x": self.grid}
        for name in SNAPSHOT_COLUMNS[1:]:
            val = getattr(self, name)
            cols[name] = np.full(self.grid.shape, np.nan) if val is None else val
        return cols


def uniform_grid(length: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if points < 2:
        raise FieldError("output grid needs at least two points")
    return np.linspace(0.0, length, int(points))


def reconstruct(basis: ModeBasis, quad: QuadratureContext, state, accel=None, grid=None,
                with_utt: bool | None = None) -> FieldSnapshot:
    """Fields of w = sum q_j s_j on ``grid`` (default: 201 uniform points).

    In-plane fields come from the effective constraint:
    u = -1/2 int_0^x w_x^2, u_t = -int_0^x w_x w_xt and
    u_tt = -int_0^x [w_xt^2 + w_x w_xtt]. The last needs the modal
    acceleration; it is computed whenever ``accel`` is given, and asking
    for it (``with_utt=True``) without one is an error.
    """
    q, v = _state_arrays(state)
    t = state.t if hasattr(state, "t") else float("nan")
    if with_utt is None:
        with_utt = accel is not None
    if with_utt and accel is None:
        raise FieldError("u_tt requires the modal acceleration")
    x = uniform_grid(basis.length) if grid is None else np.asarray(grid, dtype=float)
    if np.any(x < 0) or np.any(x > basis.length):
        raise FieldError("grid points must lie in [0, L]")

    d = [basis.evaluate(x, k) for k in range(4)]
    w, w_x, w_xx, w_xxx = (q @ dk for dk in d)
    w_xxxx = (q * basis.kappa4) @ d[0]

    def slope(coef):
        return lambda xs: coef @ basis.evaluate(xs, 1)

    wx_f, wxt_f = slope(q), slope(v)
    u = -0.5 * primitive_at(lambda xs: wx_f(xs) ** 2, x, quad)
    u_t = -primitive_at(lambda xs: wx_f(xs) * wxt_f(xs), x, quad)
    u_tt = None
    if with_utt:
        wxtt_f = slope(np.asarray(accel, dtype=float))
        u_tt = -primitive_at(lambda xs: wxt_f(xs) ** 2 + wx_f(xs) * wxtt_f(xs), x, quad)
    return FieldSnapshot(t=t, grid=x, w=w, w_x=w_x, w_xx=w_xx, w_xxx=w_xxx, w_xxxx=w_xxxx,
                         u=u, u_t=u_t, u_tt=u_tt, inext_deviation=0.25 * w_x**4)
