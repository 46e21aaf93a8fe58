"""Spectral-Galerkin simulation of an inextensible cantilever beam.

The transverse deflection is expanded in clamped-free Euler-Bernoulli
modes, w(x, t) = sum_j q_j(t) s_j(x), and the in-plane displacement is
slaved to it through u_x = -w_x^2 / 2. The modal system carries a cubic
stiffness term (flag ``sigma``), a state-dependent mass matrix from the
in-plane inertia (flag ``iota``) and Kelvin-Voigt damping ``k2``.

Typical use::

    from inextbeam import BeamParameters, ModalState, IntegratorConfig, build_operators, run_simulation

    ops = build_operators(BeamParameters(k2=0.05, sigma=1, iota=1), n_modes=4)
    q0 = [0.1, 0.0, 0.0, 0.0]
    traj = run_simulation(ops, ModalState(0.0, q0, [0.0] * 4), None,
                          IntegratorConfig(dt=5e-4), t_final=10.0)
    traj.identity.max_abs
"""

__version__ = "0.1.0"

from .assembly import BeamParameters, DiscreteOperators, ParameterError, build_operators
from .diagnostics import (DecayFit, EnergyComponents, convergence_order, fit_decay_rate,
                          identity_residual_series, inextensibility_residual, modal_energy,
                          quadrature_energy, weak_form_residual)
from .dynamics import AccelerationError, ModalState, residual, solve_acceleration
from .fields import FieldSnapshot, reconstruct
from .forcing import Forcing, bind_forcing, project_forcing
from .integrators import (BlowUp, IntegratorConfig, StepRejected, Trajectory, run_simulation,
                          step_implicit_midpoint, step_rk4)
from .modes import ModeBasis, build_basis, eval_mode, solve_wavenumbers, verify_basis
from .quadrature import QuadratureContext, build_context, cumulative_primitive, integrate, inner_product

__all__ = [
    "AccelerationError", "BeamParameters", "BlowUp", "DecayFit", "DiscreteOperators",
    "EnergyComponents", "FieldSnapshot", "Forcing", "IntegratorConfig", "ModalState",
    "ModeBasis", "ParameterError", "QuadratureContext", "StepRejected", "Trajectory",
    "bind_forcing", "build_basis", "build_context", "build_operators", "convergence_order",
    "cumulative_primitive", "eval_mode", "fit_decay_rate", "identity_residual_series",
    "inextensibility_residual", "inner_product", "integrate", "modal_energy",
    "project_forcing", "quadrature_energy", "reconstruct", "residual", "run_simulation",
    "solve_acceleration", "solve_wavenumbers", "step_implicit_midpoint", "step_rk4",
    "verify_basis", "weak_form_residual",
]
