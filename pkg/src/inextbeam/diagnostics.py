"""Energy functionals, the damped energy identity, and fitted rates.

The energy is

    E = 1/2 (||w_t||^2 + iota ||u_t||^2) + D/2 (||w_xx||^2 + sigma ||w_x w_xx||^2)

and along solutions E(t) + k2 int_0^t ||w_xxt||^2 = E(0) + int_0^t (p, w_t).
Every modal formula here has a quadrature twin that rebuilds the fields on
the node grid; the twins exist to check each other.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .assembly import BeamParameters, DiscreteOperators
from .dynamics import _state_arrays
from .modes import ModeBasis
from .quadrature import QuadratureContext, cumulative_primitive


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyComponents:
    E_kinetic: float
    E_inertial: float
    E_bend: float
    E_nl: float
    dissipation_rate: float  # k2 ||w_xxt||^2

    @property
    def E_total(self) -> float:
        return self.E_kinetic + self.E_inertial + self.E_bend + self.E_nl

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        d["E_total"] = self.E_total
        return d


def _quartic(T: np.ndarray, a, b, c, d) -> np.ndarray:
    return np.einsum("ijkl,...i,...j,...k,...l->...", T, a, b, c, d)


def modal_energy(ops: DiscreteOperators, state) -> EnergyComponents:
    """Energy components from the modal coordinates and the assembled tensors."""
    q, v = _state_arrays(state)
    p = ops.params
    k4 = ops.kappa4
    wxx2 = float(np.sum(k4 * q * q))
    return EnergyComponents(
        E_kinetic=0.5 * float(v @ v),
        E_inertial=0.5 * p.iota * float(_quartic(ops.I, q, v, q, v)) if p.iota else 0.0,
        E_bend=0.5 * p.D * wxx2,
        E_nl=0.5 * p.D * p.sigma * float(_quartic(ops.S, q, q, q, q)) if p.sigma else 0.0,
        dissipation_rate=p.k2 * float(np.sum(k4 * v * v)),
    )


def modal_energy_batch(ops: DiscreteOperators, q: np.ndarray, v: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized :func:`modal_energy` over rows of q and v."""
    p = ops.params
    k4 = ops.kappa4
    m = q.shape[0]
    out = {
        "E_kinetic": 0.5 * np.sum(v * v, axis=-1),
        "E_inertial": 0.5 * _quartic(ops.I, q, v, q, v) if p.iota else np.zeros(m),
        "E_bend": 0.5 * p.D * np.sum(k4 * q * q, axis=-1),
        "E_nl": 0.5 * p.D * _quartic(ops.S, q, q, q, q) if p.sigma else np.zeros(m),
        "dissipation_rate": p.k2 * np.sum(k4 * v * v, axis=-1),
    }
    out["E_total"] = out["E_kinetic"] + out["E_inertial"] + out["E_bend"] + out["E_nl"]
    return out


def quadrature_energy(basis: ModeBasis, quad: QuadratureContext, state, params: BeamParameters) -> EnergyComponents:
    """Same components, from fields reconstructed on the quadrature grid.

    u_t = -int_0^x w_x w_xt is formed by the cumulative primitive, so no
    tensor enters this path.
    """
    q, v = _state_arrays(state)
    s0 = basis.evaluate(quad.nodes, 0)
    s1 = basis.evaluate(quad.nodes, 1)
    s2 = basis.evaluate(quad.nodes, 2)
    w_t, w_x, w_xt = v @ s0, q @ s1, v @ s1
    w_xx, w_xxt = q @ s2, v @ s2
    u_t = -cumulative_primitive(w_x * w_xt, quad)
    W = quad.weights
    return EnergyComponents(
        E_kinetic=0.5 * float(W @ w_t**2),
        E_inertial=0.5 * params.iota * float(W @ u_t**2),
        E_bend=0.5 * params.D * float(W @ w_xx**2),
        E_nl=0.5 * params.D * params.sigma * float(W @ (w_x * w_xx) ** 2),
        dissipation_rate=params.k2 * float(W @ w_xxt**2),
    )


@dataclass(frozen=True)
class IdentitySeries:
    t: np.ndarray
    E_total: np.ndarray
    dissipation_accum: np.ndarray
    work_accum: np.ndarray
    residual: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def identity_residual_series(t, E_total, dissipation_rate, power) -> IdentitySeries:
    """r(t) = E(t) - E(0) + k2 int ||w_xxt||^2 - int (p, w_t), integrals by trapezoid on the samples."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E_total, dtype=float)
    diss = _cumtrapz(np.asarray(dissipation_rate, dtype=float), t)
    work = _cumtrapz(np.asarray(power, dtype=float), t)
    r = E - E[0] + diss - work if E.size else E
    return IdentitySeries(t=t, E_total=E, dissipation_accum=diss, work_accum=work, residual=r)


def inextensibility_residual(basis: ModeBasis, quad: QuadratureContext, state, grid=None) -> tuple[float, float]:
    """(scaled algebraic residual, deviation) for u_x = -w_x^2 / 2.

    With the effective constraint, (1 + u_x)^2 + w_x^2 = 1 + w_x^4 / 4
    exactly, so the first number is pure round-off; it is divided by
    max(1 + w_x^2 + w_x^4 / 4), the size of the terms that cancel. The
    second, max w_x^4 / 4, is how far the effective constraint sits from
    true inextensibility.
    """
    q, _ = _state_arrays(state)
    x = quad.nodes if grid is None else np.asarray(grid, dtype=float)
    w_x = q @ basis.evaluate(x, 1)
    u_x = -0.5 * w_x**2
    resid = (1.0 + u_x) ** 2 + w_x**2 - 1.0 - 0.25 * w_x**4
    scale = float(np.max(1.0 + w_x**2 + 0.25 * w_x**4))
    return float(np.max(np.abs(resid))) / scale, float(np.max(0.25 * w_x**4))


def u_tt_norm2(ops: DiscreteOperators, q, v, a) -> float:
    """||u_tt||^2 with u_tt = -sum_{ab} (v_a v_b + q_a a_b) F_ab."""
    X = np.outer(v, v) + np.outer(q, a)
    return float(np.einsum("ab,abcd,cd->", X, ops.I, X))


def u_tt_norm2_quadrature(basis: ModeBasis, quad: QuadratureContext, q, v, a) -> float:
    """||u_tt||^2 from u_tt = -int_0^x [w_xt^2 + w_x w_xtt] on the grid."""
    s1 = basis.evaluate(quad.nodes, 1)
    w_x, w_xt, w_xtt = q @ s1, v @ s1, a @ s1
    u_tt = -cumulative_primitive(w_xt**2 + w_x * w_xtt, quad)
    return float(quad.weights @ u_tt**2)


def higher_energy_E1(ops: DiscreteOperators, state, accel) -> float:
    """E_1 = 1/2 [||w_tt||^2 + D ||w_xxt||^2 + sigma D (||w_xt w_xx||^2 + ||w_x w_xxt||^2)] + iota/2 ||u_tt||^2."""
    q, v = _state_arrays(state)
    a = np.asarray(accel, dtype=float)
    p = ops.params
    val = float(a @ a) + p.D * float(np.sum(ops.kappa4 * v * v))
    if p.sigma:
        val += p.D * float(_quartic(ops.S, q, q, v, v) + _quartic(ops.S, v, v, q, q))
    if p.iota:
        val += u_tt_norm2(ops, q, v, a)
    return 0.5 * val


def higher_energy_I1(ops: DiscreteOperators, state, accel) -> float:
    """I_1 = 1/2 ||u_tt||^2 + 3/4 ||int_0^x w_xt^2||^2."""
    q, v = _state_arrays(state)
    H = np.einsum("a,b,abk->k", v, v, ops.F)
    return 0.5 * u_tt_norm2(ops, q, v, np.asarray(accel, dtype=float)) + 0.75 * float(ops.quad.weights @ H**2)


def weak_form_residual(basis: ModeBasis, quad: QuadratureContext, params: BeamParameters,
                       state, accel, load=None) -> np.ndarray:
    """Weak-form residual tested against each s_j, entirely by quadrature on reconstructed fields.

    The inertia term is evaluated as written, -(w_x int_x^L u_tt, phi_x),
    with no integration by parts, and ``load`` is the transverse pressure
    sampled on the nodes (or None). Independent of the assembled tensors.
    """
    q, v = _state_arrays(state)
    a = np.asarray(accel, dtype=float)
    s0, s1, s2 = (basis.evaluate(quad.nodes, k) for k in (0, 1, 2))
    w_x, w_xx = q @ s1, q @ s2
    w_xt, w_xxt = v @ s1, v @ s2
    w_tt, w_xtt = a @ s0, a @ s1
    W = quad.weights

    R = s0 @ (W * w_tt)
    R += params.D * (s2 @ (W * w_xx)) + params.k2 * (s2 @ (W * w_xxt))
    if params.sigma:
        R += params.D * (s2 @ (W * w_xx * w_x * w_x) + s1 @ (W * w_xx * w_x * w_xx))
    if params.iota:
        u_tt = -cumulative_primitive(w_xt**2 + w_x * w_xtt, quad)
        tail = (W @ u_tt) - cumulative_primitive(u_tt, quad)  # int_x^L u_tt
        R -= s1 @ (W * w_x * tail)
    if load is not None:
        R -= s0 @ (W * np.broadcast_to(np.asarray(load, dtype=float), quad.nodes.shape))
    return R


@dataclass(frozen=True)
class DecayFit:
    omega: float
    M: float
    r2: float
    n_points: int
    t_start: float
    t_end: float


def fit_decay_rate(t, E, window=None, floor: float = 0.0) -> DecayFit:
    """Least-squares fit of ln E = ln M - omega t on the window.

    Samples at or below ``floor`` end the usable series: the fit stops at
    the first crossing.
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if window is None:
        window = (t[0], t[-1]) if t.size else (0.0, 0.0)
    ta, tb = float(window[0]), float(window[1])
    if not tb > ta:
        raise DiagnosticsError(f"decay window must have t_b > t_a, got [{ta}, {tb}]")
    sel = (t >= ta) & (t <= tb)
    t, E = t[sel], E[sel]
    below = np.flatnonzero(~(E > floor))
    if below.size:
        t, E = t[: below[0]], E[: below[0]]
    if t.size < 2:
        raise DiagnosticsError(f"fewer than two samples above floor {floor} in [{ta}, {tb}]")
    y = np.log(E)
    A = np.column_stack([np.ones_like(t), t])
    (intercept, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ np.array([intercept, slope])
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(omega=float(-slope), M=float(np.exp(intercept)), r2=r2,
                    n_points=int(t.size), t_start=float(t[0]), t_end=float(t[-1]))


def convergence_order(pairs) -> float:
    """Observed order: least-squares slope of log(error) against log(dt)."""
    pairs = [(float(dt), float(err)) for dt, err in pairs]
    if len(pairs) < 3:
        raise DiagnosticsError("need at least three (dt, error) points")
    dts = np.array([p[0] for p in pairs])
    errs = np.array([p[1] for p in pairs])
    if np.any(np.diff(dts) >= 0):
        raise DiagnosticsError("dt values must be strictly decreasing")
    if np.any(errs <= 0) or np.any(dts <= 0):
        raise DiagnosticsError("errors and step sizes must be positive")
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    return float(slope)
