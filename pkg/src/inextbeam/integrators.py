"""Fixed-step time integration of the modal system.

Two schemes: classical RK4 as the explicit reference and the implicit
midpoint rule (Newton on the 2n stage equations) for production runs,
where the Kelvin-Voigt term k2 kappa^4 makes the system stiff.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import DiscreteOperators
from .diagnostics import IdentitySeries, identity_residual_series, modal_energy_batch
from .dynamics import AccelerationError, ModalState, solve_acceleration

log = logging.getLogger(__name__)

SCHEMES = ("rk4", "implicit-midpoint")
Load = Callable[[float], np.ndarray]


class IntegrationError(ArithmeticError):
    pass


class StepRejected(IntegrationError):
    """Newton did not converge within the iteration budget."""

    def __init__(self, t: float, residual: float, iterations: int):
        super().__init__(f"Newton failed at t={t:.9g}: residual {residual:.3e} after {iterations} iterations")
        self.t = t
        self.residual = residual
        self.iterations = iterations


class BlowUp(IntegrationError):
    """A stage or iterate left the finite numbers, or energy passed the ceiling."""

    def __init__(self, t: float, reason: str, stage: int | None = None):
        where = f" (stage {stage})" if stage is not None else ""
        super().__init__(f"blow-up at t={t:.9g}{where}: {reason}")
        self.t = t
        self.reason = reason
        self.stage = stage


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "implicit-midpoint"
    dt: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be a positive integer")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


def _zero_load(n: int) -> Load:
    z = np.zeros(n)
    return lambda t: z


def _accel(ops: DiscreteOperators, q, v, P, t: float, stage: int | None = None) -> np.ndarray:
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
        raise BlowUp(t, "non-finite state", stage)
    try:
        a = solve_acceleration(ops, (q, v), P)
    except AccelerationError as exc:
        raise BlowUp(t, str(exc), stage) from exc
    if not np.all(np.isfinite(a)):
        raise BlowUp(t, "non-finite acceleration", stage)
    return a


def step_rk4(ops: DiscreteOperators, state: ModalState, forcing: Load | None, dt: float) -> ModalState:
    load = forcing or _zero_load(ops.n_modes)
    t, q, v = state.t, state.q, state.v
    h = 0.5 * dt
    a1 = _accel(ops, q, v, load(t), t, 1)
    q2, v2 = q + h * v, v + h * a1
    a2 = _accel(ops, q2, v2, load(t + h), t + h, 2)
    q3, v3 = q + h * v2, v + h * a2
    a3 = _accel(ops, q3, v3, load(t + h), t + h, 3)
    q4, v4 = q + dt * v3, v + dt * a3
    a4 = _accel(ops, q4, v4, load(t + dt), t + dt, 4)
    q_new = q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(v_new))):
        raise BlowUp(t + dt, "non-finite state after step")
    return ModalState(t + dt, q_new, v_new)


def _nonlinear_accel_jacobian(ops: DiscreteOperators, q, v, P, a0, t: float):
    """Forward-difference Jacobians of a - a_linear with respect to q and v.

    a_linear = P - D kappa^4 q - k2 kappa^4 v, whose Jacobian is known exactly.
    """
    n = ops.n_modes
    p = ops.params
    if p.sigma == 0 and p.iota == 0:
        return np.zeros((n, n)), np.zeros((n, n))
    h = 1e-7 * (1.0 + np.max(np.abs(q)))
    eye = np.eye(n)
    qs = np.concatenate([q + h * eye, np.broadcast_to(q, (n, n))])
    vs = np.concatenate([np.broadcast_to(v, (n, n)), v + h * eye])
    try:
        a = solve_acceleration(ops, (qs, vs), P)
    except AccelerationError as exc:
        raise BlowUp(t, str(exc)) from exc
    lin_shift = np.concatenate([-p.D * ops.kappa4 * h * eye, -p.k2 * ops.kappa4 * h * eye])
    d = (a - a0 - lin_shift) / h  # row i: derivative along perturbation i
    return d[:n].T, d[n:].T


def step_implicit_midpoint(ops: DiscreteOperators, state: ModalState, forcing: Load | None,
                           cfg: IntegratorConfig, dt: float | None = None) -> ModalState:
    """One implicit midpoint step.

    Solves q+ = q + dt v_m, v+ = v + dt a(q_m, v_m, t + dt/2) with
    q_m = (q + q+)/2, v_m = (v + v+)/2, by Newton on z = (q+, v+). The
    Jacobian uses the exact linear part and forward differences for the
    rest. A negative ``dt`` steps backward.
    """
    dt = cfg.dt if dt is None else dt
    load = forcing or _zero_load(ops.n_modes)
    n = ops.n_modes
    p = ops.params
    t, q, v = state.t, state.q, state.v
    t_mid = t + 0.5 * dt
    P = load(t_mid)
    lin_q = -p.D * ops.kappa4
    lin_v = -p.k2 * ops.kappa4

    a0 = _accel(ops, q, v, P, t)
    q_new = q + dt * v + 0.5 * dt * dt * a0
    v_new = v + dt * a0
    eye = np.eye(n)
    res_norm = np.inf
    for it in range(1, int(cfg.newton_max_iter) + 1):
        qm, vm = 0.5 * (q + q_new), 0.5 * (v + v_new)
        am = _accel(ops, qm, vm, P, t_mid)
        R = np.concatenate([q_new - q - dt * vm, v_new - v - dt * am])
        res_norm = float(np.max(np.abs(R)))
        if not math.isfinite(res_norm):
            raise BlowUp(t + dt, "non-finite Newton residual")
        if res_norm <= cfg.newton_tol:
            return ModalState(t + dt, q_new, v_new)
        Jq_nl, Jv_nl = _nonlinear_accel_jacobian(ops, qm, vm, P, am, t_mid)
        Aq = np.diag(lin_q) + Jq_nl
        Av = np.diag(lin_v) + Jv_nl
        J = np.block([[eye, -0.5 * dt * eye], [-0.5 * dt * Aq, eye - 0.5 * dt * Av]])
        dz = np.linalg.solve(J, -R)
        q_new = q_new + dz[:n]
        v_new = v_new + dz[n:]
        if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(v_new))):
            raise BlowUp(t + dt, "non-finite Newton iterate")
    raise StepRejected(t + dt, res_norm, int(cfg.newton_max_iter))


def step(ops: DiscreteOperators, state: ModalState, forcing: Load | None, cfg: IntegratorConfig,
         dt: float | None = None) -> ModalState:
    dt = cfg.dt if dt is None else dt
    if cfg.scheme == "rk4":
        return step_rk4(ops, state, forcing, dt)
    return step_implicit_midpoint(ops, state, forcing, cfg, dt)


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    load: np.ndarray  # modal load P at each record
    energies: dict[str, np.ndarray] = field(repr=False)
    identity: IdentitySeries = field(repr=False)
    dt: float = 0.0
    scheme: str = ""
    blew_up: bool = False
    blowup_time: float | None = None
    blowup_reason: str | None = None

    @property
    def n_records(self) -> int:
        return self.t.size

    def state(self, k: int = -1) -> ModalState:
        return ModalState(self.t[k], self.q[k], self.v[k])

    @property
    def E_total(self) -> np.ndarray:
        return self.energies["E_total"]


def build_trajectory(ops: DiscreteOperators, t, q, v, load, **meta) -> Trajectory:
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float).reshape(t.size, ops.n_modes)
    v = np.asarray(v, dtype=float).reshape(t.size, ops.n_modes)
    load = np.asarray(load, dtype=float).reshape(t.size, ops.n_modes)
    energies = modal_energy_batch(ops, q, v)
    power = np.sum(load * v, axis=-1)
    ident = identity_residual_series(t, energies["E_total"], energies["dissipation_rate"], power)
    energies["dissipation_accum"] = ident.dissipation_accum
    energies["work_accum"] = ident.work_accum
    energies["identity_residual"] = ident.residual
    return Trajectory(t=t, q=q, v=v, load=load, energies=energies, identity=ident, **meta)


def run_simulation(ops: DiscreteOperators, initial: ModalState, forcing: Load | None,
                   cfg: IntegratorConfig, t_final: float, record_every: int = 1) -> Trajectory:
    """March from ``initial`` to ``t_final`` with fixed steps.

    Records every ``record_every`` steps and always at ``t_final``. The
    final step is shortened when dt does not divide the interval. Blow-up
    (non-finite state or total energy above the threshold) ends the run
    early and is reported on the returned trajectory.
    """
    if initial.q.size != ops.n_modes:
        raise ValueError(f"initial state has {initial.q.size} modes, operators have {ops.n_modes}")
    if t_final < initial.t:
        raise ValueError(f"t_final={t_final} precedes the initial time {initial.t}")
    if int(record_every) != record_every or record_every < 1:
        raise ValueError("record_every must be a positive integer")
    load = forcing or _zero_load(ops.n_modes)
    span = t_final - initial.t
    n_steps = max(0, math.ceil(span / cfg.dt - 1e-9))

    ts, qs, vs, Ps = [initial.t], [initial.q], [initial.v], [np.asarray(load(initial.t), dtype=float)]
    state = initial
    blew_up, t_blow, reason = False, None, None
    E_check = modal_energy_batch(ops, initial.q[None], initial.v[None])["E_total"][0]
    if not math.isfinite(E_check) or E_check > cfg.blowup_threshold:
        blew_up, t_blow, reason = True, initial.t, f"initial energy {E_check:.3e} above threshold"
        n_steps = 0

    for k in range(1, n_steps + 1):
        t_target = t_final if k == n_steps else initial.t + k * cfg.dt
        dt = t_target - state.t
        try:
            nxt = step(ops, state, load, cfg, dt)
        except BlowUp as exc:
            blew_up, t_blow, reason = True, exc.t, exc.reason
            break
        nxt = ModalState(t_target, nxt.q, nxt.v)
        E = modal_energy_batch(ops, nxt.q[None], nxt.v[None])["E_total"][0]
        if not math.isfinite(E) or E > cfg.blowup_threshold:
            blew_up, t_blow, reason = True, t_target, f"energy {E:.3e} exceeded threshold {cfg.blowup_threshold:.3e}"
            if math.isfinite(E) and nxt.is_finite:
                ts.append(nxt.t); qs.append(nxt.q); vs.append(nxt.v); Ps.append(np.asarray(load(nxt.t), dtype=float))
            break
        state = nxt
        if k % record_every == 0 or k == n_steps:
            ts.append(state.t); qs.append(state.q); vs.append(state.v); Ps.append(np.asarray(load(state.t), dtype=float))

    if blew_up and ts[-1] < state.t:
        # keep the last finite state so the growth curve ends where the run did
        ts.append(state.t); qs.append(state.q); vs.append(state.v); Ps.append(np.asarray(load(state.t), dtype=float))
    if blew_up:
        log.info("run stopped at t=%.6g: %s", t_blow, reason)
    return build_trajectory(ops, ts, qs, vs, Ps, dt=cfg.dt, scheme=cfg.scheme,
                            blew_up=blew_up, blowup_time=t_blow, blowup_reason=reason)
