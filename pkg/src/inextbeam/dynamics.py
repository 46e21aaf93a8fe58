"""Right-hand side of the truncated equations of motion.

Testing the weak form against phi = s_j with w = sum_a q_a s_a gives, for
every j,

    [M(q) a]_j + k2 kappa_j^4 v_j + D kappa_j^4 q_j + N_j(q) + V_j(q, v) = P_j

    M(q)[j, b] = delta_jb + iota * sum_{a,c} q_a q_c I[a, b, c, j]
    N_j(q)     = sigma * D * sum_{a,b,c} q_a q_b q_c (S[a, j, b, c] + S[a, c, b, j])
    V_j(q, v)  = iota * sum_{a,b,c} v_a v_b q_c I[a, b, c, j]

where a = q''. The two stiffness terms come from (w_xx w_x, w_x phi_xx) and
(w_xx w_x, w_xx phi_x). For the inertia term, integrating by parts once
(int_x^L u_tt vanishes at L, int_0^x w_x phi_x vanishes at 0) turns
-(w_x int_x^L u_tt, phi_x) into -(u_tt, int_0^x w_x phi_x), and
u_tt = -int_0^x [w_xt^2 + w_x w_xtt] splits into the acceleration part
(mass matrix) and the velocity-quadratic part V. With g_j = sum_a q_a F_aj,
M = Id + Gram(g), so M is symmetric with every eigenvalue >= 1.

All functions accept a single state (shape (n,)) or a batch (shape (m, n)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .assembly import DiscreteOperators


class AccelerationError(ArithmeticError):
    """The mass matrix could not be factorized (it is >= Id analytically)."""


@dataclass(frozen=True)
class ModalState:
    t: float
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float, ndmin=1)
        v = np.array(self.v, dtype=float, ndmin=1)
        if q.shape != v.shape or q.ndim != 1:
            raise ValueError(f"q and v must be equal-length vectors, got {q.shape} and {v.shape}")
        q.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def zeros(cls, n: int, t: float = 0.0) -> "ModalState":
        return cls(t, np.zeros(n), np.zeros(n))

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.t) and np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.v)))


def nonlinear_mass(ops: DiscreteOperators, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = ops.n_modes
    eye = np.broadcast_to(np.eye(n), q.shape[:-1] + (n, n))
    if ops.params.iota == 0:
        return eye.copy()
    G = np.einsum("jbac,...a,...c->...jb", ops.mass_kernel, q, q)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    return eye + G


def stiffness_force(ops: DiscreteOperators, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    p = ops.params
    if p.sigma == 0:
        return np.zeros_like(q)
    return p.D * np.einsum("jabc,...a,...b,...c->...j", ops.stiff_kernel, q, q, q)


def inertia_velocity_force(ops: DiscreteOperators, q, v) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if ops.params.iota == 0:
        return np.zeros(np.broadcast_shapes(q.shape, v.shape))
    return np.einsum("jcab,...a,...b,...c->...j", ops.velocity_kernel, v, v, q)


def linear_force(ops: DiscreteOperators, q, v) -> np.ndarray:
    """Kelvin-Voigt damping plus linear bending: k2 kappa^4 v + D kappa^4 q."""
    p = ops.params
    return ops.kappa4 * (p.k2 * np.asarray(v, dtype=float) + p.D * np.asarray(q, dtype=float))


def _state_arrays(state) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(state, ModalState):
        return state.q, state.v
    q, v = state
    return np.asarray(q, dtype=float), np.asarray(v, dtype=float)


def residual(ops: DiscreteOperators, state, accel, P=None) -> np.ndarray:
    """R = M(q) a + k2 kappa^4 v + D kappa^4 q + N(q) + V(q, v) - P; zero along solutions."""
    q, v = _state_arrays(state)
    a = np.asarray(accel, dtype=float)
    Ma = np.einsum("...jb,...b->...j", nonlinear_mass(ops, q), a)
    R = Ma + linear_force(ops, q, v) + stiffness_force(ops, q) + inertia_velocity_force(ops, q, v)
    if P is not None:
        R = R - np.asarray(P, dtype=float)
    return R


def acceleration_rhs(ops: DiscreteOperators, q, v, P=None) -> np.ndarray:
    rhs = -(linear_force(ops, q, v) + stiffness_force(ops, q) + inertia_velocity_force(ops, q, v))
    if P is not None:
        rhs = rhs + np.asarray(P, dtype=float)
    return rhs


def _factor_failure(M: np.ndarray, info: int) -> AccelerationError:
    return AccelerationError(
        f"mass matrix not positive definite: leading minor {info} failed, "
        f"min diagonal pivot {np.min(np.diag(M)):.6e}, min eigenvalue {np.min(np.linalg.eigvalsh(M)):.6e}"
    )


def solve_acceleration(ops: DiscreteOperators, state, P=None) -> np.ndarray:
    """a with M(q) a = P - k2 kappa^4 v - D kappa^4 q - N(q) - V(q, v), via Cholesky."""
    q, v = _state_arrays(state)
    rhs = acceleration_rhs(ops, q, v, P)
    if ops.params.iota == 0:
        return rhs
    M = nonlinear_mass(ops, q)
    if M.ndim == 2:
        chol, info = dpotrf(M, lower=True)
        if info != 0 or not np.all(np.isfinite(chol)):
            raise _factor_failure(M, info)
        return cho_solve((chol, True), rhs)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        bad = int(np.argmin(np.linalg.eigvalsh(M)[..., 0]))
        raise _factor_failure(M[bad], -1) from None
    return np.linalg.solve(M, rhs[..., None])[..., 0]
