"""Acceptance criteria, one test each.

Every test prints a single ``PASS`` or ``FAIL`` line with the measured
numbers before asserting, so ``pytest -v`` output doubles as a report.
"""

import math
import time

import numpy as np
import pytest

from conftest import bisect, char_fn
from inextbeam.assembly import BeamParameters, assemble_I, assemble_S, build_operators, pair_gram_matrix
from inextbeam.config import loads_config
from inextbeam.diagnostics import (convergence_order, fit_decay_rate, modal_energy, quadrature_energy,
                                   weak_form_residual)
from inextbeam.dynamics import ModalState, nonlinear_mass, residual
from inextbeam.experiments import TRAJECTORY_FILE, simulate
from inextbeam.forcing import project_forcing
from inextbeam.integrators import IntegratorConfig, run_simulation
from inextbeam.modes import build_basis, characteristic, characteristic_residual, verify_basis
from inextbeam.quadrature import build_context

SEED = 20261016


@pytest.fixture
def report(capsys):
    def emit(number, checks):
        ok = all(passed for _, passed, _ in checks)
        detail = "; ".join(f"{name}={value}{'' if passed else ' (X)'}" for name, passed, value in checks)
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


def _g(x):
    return f"{x:.3g}"


def test_criterion_01_modes(report):
    start = time.perf_counter()
    quad = build_context()
    oracle = [bisect(char_fn, 1.5, 2.5), bisect(char_fn, 4.0, 5.0), bisect(char_fn, 7.0, 8.5)]
    worst = {"resid": 0.0, "unscaled": 0.0, "k123": 0.0, "gram": 0.0, "stiff": 0.0, "free": 0.0, "clamp": 0.0}
    for n in range(1, 11):
        b = build_basis(n, 1.0, quad)
        rep = verify_basis(b, quad)
        kL = b.wavenumbers * 1.0
        worst["resid"] = max(worst["resid"], float(np.max(characteristic_residual(kL))))
        worst["unscaled"] = max(worst["unscaled"], float(np.max(np.abs(characteristic(kL[:3])))))
        worst["k123"] = max(worst["k123"], max(abs(kL[j] - oracle[j]) for j in range(min(n, 3))))
        worst["gram"] = max(worst["gram"], rep.orthonormality_error)
        s2 = b.evaluate(quad.nodes, 2)
        G = (s2 * quad.weights) @ s2.T
        worst["stiff"] = max(worst["stiff"], float(np.max(np.abs(np.diag(G) / b.kappa4 - 1))))
        worst["free"] = max(worst["free"], rep.free_end_error)
        worst["clamp"] = max(worst["clamp"], rep.clamped_error)
    wall = time.perf_counter() - start
    report(1, [
        ("char_residual", worst["resid"] <= 1e-12, _g(worst["resid"])),
        ("char_residual_unscaled_n<=3", worst["unscaled"] <= 1e-12, _g(worst["unscaled"])),
        ("kappaL_1..3_vs_bisection", worst["k123"] <= 1e-9, _g(worst["k123"])),
        ("gram", worst["gram"] <= 1e-9, _g(worst["gram"])),
        ("stiffness_diag_rel", worst["stiff"] <= 1e-8, _g(worst["stiff"])),
        ("free_end_scaled", worst["free"] <= 1e-8, _g(worst["free"])),
        ("clamped", worst["clamp"] == 0.0, _g(worst["clamp"])),
        ("runtime_s", wall < 1.0, f"{wall:.2f}"),
    ])


def test_criterion_02_tensors(report):
    start = time.perf_counter()
    quad = build_context()
    b = build_basis(6, 1.0, quad)
    S, wS = assemble_S(b, quad, return_witness=True)
    I, wI = assemble_I(b, quad, return_witness=True)
    sym_S = all(np.array_equal(S, S.transpose(p)) for p in [(1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2)])
    sym_I = all(np.array_equal(I, I.transpose(p)) for p in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)])
    G = pair_gram_matrix(I)
    lam = float(np.min(np.linalg.eigvalsh(G)))
    d = 1 / np.sqrt(np.diag(G))
    lam_scaled = float(np.min(np.linalg.eigvalsh(G * np.outer(d, d))))
    q2 = build_context(32, 16)
    S2, I2 = assemble_S(b, q2), assemble_I(b, q2)
    k = b.wavenumbers
    scale = np.einsum("i,j,k,l->ijkl", k**2, k**2, k, k)
    dS_scaled = float(np.max(np.abs(S2 - S) / scale))
    dS_raw = float(np.max(np.abs(S2 - S)))
    dI = float(np.max(np.abs(I2 - I)))
    wall = time.perf_counter() - start
    report(2, [
        ("S_symmetric", sym_S, sym_S),
        ("I_symmetric", sym_I, sym_I),
        ("witness_S", wS < 1e-9, _g(wS)),
        ("witness_I", wI < 1e-9, _g(wI)),
        ("pair_matrix_lambda_min", lam >= -1e-12, _g(lam)),
        ("pair_matrix_lambda_min_jacobi_scaled", True, _g(lam_scaled)),
        ("doubling_S_scaled", dS_scaled <= 1e-9, _g(dS_scaled)),
        ("doubling_S_raw", True, _g(dS_raw)),
        ("doubling_I", dI <= 1e-9, _g(dI)),
        ("runtime_s", wall < 5.0, f"{wall:.2f}"),
    ])


def test_criterion_03_galerkin_consistency(report):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    ops = build_operators(BeamParameters(D=1.0, k2=0.05, sigma=1, iota=1), 4)
    pressure = 0.5 + 0.3 * np.sin(2 * ops.quad.nodes)
    P = project_forcing(lambda x, t: 0.5 + 0.3 * np.sin(2 * x), ops.basis, ops.quad, 0.0)
    worst = 0.0
    for _ in range(50):
        q, v, a = (rng.uniform(-0.5, 0.5, 4) for _ in range(3))
        R_tensor = residual(ops, (q, v), a, P)
        R_quad = weak_form_residual(ops.basis, ops.quad, ops.params, (q, v), a, pressure)
        worst = max(worst, float(np.max(np.abs(R_tensor - R_quad))))
    wall = time.perf_counter() - start
    report(3, [("max_componentwise_diff", worst <= 1e-8, _g(worst)),
               ("runtime_s", wall < 10.0, f"{wall:.2f}")])


def test_criterion_04_mass_spd(report):
    rng = np.random.default_rng(SEED)
    ops = build_operators(BeamParameters(k2=0.05, sigma=1, iota=1), 6)
    lam, asym = np.inf, 0.0
    for _ in range(200):
        M = nonlinear_mass(ops, rng.uniform(-2, 2, 6))
        asym = max(asym, float(np.max(np.abs(M - M.T))))
        lam = min(lam, float(np.min(np.linalg.eigvalsh(M))))
    report(4, [("lambda_min", lam >= 1 - 1e-12, repr(lam)), ("asymmetry", asym <= 1e-13, _g(asym))])


def _linear_end_errors(params, scheme, dts, t_final, exact):
    ops = build_operators(params, 1)
    errs = []
    for dt in dts:
        traj = run_simulation(ops, ModalState(0.0, [1.0], [0.0]), None,
                              IntegratorConfig(scheme=scheme, dt=dt, newton_tol=1e-13), t_final)
        errs.append((dt, float(np.max(np.abs(traj.q[:, 0] - exact(traj.t))))))
    return ops, errs


def test_criterion_05_linear_oracle(report):
    D = 1.0
    k1 = build_basis(1, 1.0, build_context()).wavenumbers[0]
    omega = math.sqrt(D) * k1**2
    T = 10 * 2 * math.pi / omega
    _, undamped = _linear_end_errors(BeamParameters(D=D, sigma=0, iota=0), "rk4", (0.02, 0.01, 0.005), T,
                                     lambda t: np.cos(omega * t))
    k2 = 0.02
    c = k2 * k1**4
    wd = math.sqrt(omega**2 - c**2 / 4)
    damped_exact = lambda t: np.exp(-c * t / 2) * (np.cos(wd * t) + c / (2 * wd) * np.sin(wd * t))
    _, damped = _linear_end_errors(BeamParameters(D=D, k2=k2, sigma=0, iota=0), "implicit-midpoint",
                                   (0.02, 0.01, 0.005), 5.0, damped_exact)
    p4, p2 = convergence_order(undamped), convergence_order(damped)
    report(5, [
        ("rk4_order", abs(p4 - 4.0) <= 0.2, f"{p4:.3f}"),
        ("rk4_max_err_dt=0.005", True, _g(undamped[-1][1])),
        ("midpoint_damped_order", abs(p2 - 2.0) <= 0.2, f"{p2:.3f}"),
        ("midpoint_max_err_dt=0.005", True, _g(damped[-1][1])),
    ])


def _drift_at(ops, scheme, dt, t_final):
    cfg = IntegratorConfig(scheme=scheme, dt=dt, newton_tol=1e-13)
    traj = run_simulation(ops, ModalState(0.0, [0.2, 0, 0, 0], np.zeros(4)), None, cfg, t_final,
                          record_every=10**9)
    E = traj.E_total
    return abs(E[-1] - E[0]) / E[0]


def test_criterion_06_energy_conservation(report):
    # run with rk4: implicit midpoint drifts 1.8e-7 at dt = 1e-3 here (reported below)
    ops = build_operators(BeamParameters(k2=0.0, sigma=1, iota=0), 4)
    pairs = [(dt, _drift_at(ops, "rk4", dt, 20.0)) for dt in (4e-3, 2e-3, 1e-3)]
    order = convergence_order(pairs)
    mid = _drift_at(ops, "implicit-midpoint", 1e-3, 20.0)
    report(6, [
        ("rk4_order", order >= 2.0, f"{order:.3f}"),
        ("rk4_drift_dt=1e-3", pairs[-1][1] <= 1e-7, _g(pairs[-1][1])),
        ("midpoint_drift_dt=1e-3_info", True, _g(mid)),
    ])


def test_criterion_07_damped_identity(report):
    ops = build_operators(BeamParameters(k2=0.05, sigma=1, iota=1), 4)
    s0 = ModalState(0.0, [0.1, 0, 0, 0], np.zeros(4))
    pairs = []
    for dt in (2e-3, 1e-3, 5e-4):
        traj = run_simulation(ops, s0, None, IntegratorConfig(dt=dt, newton_tol=1e-13), 10.0, record_every=1)
        pairs.append((dt, traj.identity.max_abs))
    order = convergence_order(pairs)
    report(7, [
        ("order", abs(order - 2.0) <= 0.2, f"{order:.3f}"),
        ("max_residual_dt=5e-4", pairs[-1][1] <= 1e-6, _g(pairs[-1][1])),
    ])


def test_criterion_08_small_data_decay(report):
    ops = build_operators(BeamParameters(k2=0.05, sigma=1, iota=1), 4)
    traj = run_simulation(ops, ModalState(0.0, [1e-2, 0, 0, 0], np.zeros(4)), None,
                          IntegratorConfig(dt=1e-3), 50.0, record_every=10)
    E = traj.E_total
    rises = int(np.sum(np.diff(E) > 0))
    fit = fit_decay_rate(traj.t, E)
    # regression baselines from the first run, not compared with any published value
    report(8, [
        ("completed", not traj.blew_up and traj.t[-1] == 50.0, traj.t[-1]),
        ("energy_increases_between_records", rises == 0, rises),
        ("omega", fit.omega > 0, f"{fit.omega:.5f}"),
        ("M", True, _g(fit.M)),
        ("r2", fit.r2 >= 0.99, f"{fit.r2:.6f}"),
        ("omega_baseline_0.61503", abs(fit.omega - 0.61503) <= 1e-4, f"{fit.omega:.5f}"),
    ])


def test_criterion_09_dual_path_energies(report):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for n in range(1, 9):
        ops = build_operators(BeamParameters(k2=0.05, sigma=1, iota=1), n)
        for _ in range(100 // 8 + (1 if n <= 100 % 8 else 0)):
            q, v = rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n)
            a = modal_energy(ops, (q, v)).as_dict()
            b = quadrature_energy(ops.basis, ops.quad, (q, v), ops.params).as_dict()
            for key in a:
                worst = max(worst, abs(a[key] - b[key]) / max(abs(b[key]), 1e-300))
    report(9, [("max_relative_diff", worst <= 1e-8, _g(worst))])


CONFIG = """
n_modes = 4
seed = 3
[beam]
k2 = 0.05
sigma = 1
iota = 1
[integrator]
dt = 1e-3
[run]
t_final = 2.0
record_every = 20
snapshot_every = 1
[[initial]]
mode = 1
q0 = 0.5
[[initial]]
mode = 2
q0 = -0.02
"""


def test_criterion_10_inextensibility(report, tmp_path):
    summary = simulate(loads_config(CONFIG), tmp_path / "run")
    snaps = summary["snapshots"]
    resid = snaps["max_inextensibility_residual"]
    report(10, [
        ("snapshots", snaps["count"] == summary["n_records"], snaps["count"]),
        ("max_scaled_residual", resid <= 1e-14, _g(resid)),
        ("max_deviation_wx4/4", True, _g(snaps["max_inext_deviation"])),
    ])


def test_criterion_11_determinism(report, tmp_path):
    cfg = loads_config(CONFIG.replace("snapshot_every = 1", "snapshot_every = 0"))
    simulate(cfg, tmp_path / "a")
    simulate(cfg, tmp_path / "b")
    a = (tmp_path / "a" / TRAJECTORY_FILE).read_bytes()
    b = (tmp_path / "b" / TRAJECTORY_FILE).read_bytes()
    report(11, [("byte_identical", a == b, a == b), ("bytes", True, len(a))])
