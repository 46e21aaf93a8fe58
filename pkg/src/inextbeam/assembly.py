"""Discrete operators of the truncated beam system.

With w = sum_j q_j s_j the Galerkin system needs

    kappa4[j]      = kappa_j^4                    (s_i'', s_j'') = kappa4 delta_ij
    S[i, j, k, l]  = int s_i'' s_j'' s_k' s_l'    nonlinear stiffness
    I[i, j, k, l]  = (F_ij, F_kl),  F_ab(x) = int_0^x s_a' s_b'   nonlinear inertia

The tensors depend only on the basis and the quadrature; the physical
parameters ride along in :class:`DiscreteOperators` so that one object
carries everything the right-hand side needs.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import numpy as np

from .modes import ModeBasis, build_basis
from .quadrature import QuadratureContext, build_context, cumulative_primitive

log = logging.getLogger(__name__)

CACHE_FORMAT = 1


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class BeamParameters:
    D: float = 1.0
    L: float = 1.0
    k2: float = 0.0
    sigma: int = 1
    iota: int = 0

    def __post_init__(self):
        for name in ("D", "L", "k2"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.D <= 0:
            raise ParameterError(f"flexural stiffness D must be positive, got {self.D}")
        if self.L <= 0:
            raise ParameterError(f"length L must be positive, got {self.L}")
        if self.k2 < 0:
            raise ParameterError(f"Kelvin-Voigt coefficient k2 must be >= 0, got {self.k2}")
        for name in ("sigma", "iota"):
            if getattr(self, name) not in (0, 1):
                raise ParameterError(f"flag {name} must be 0 or 1, got {getattr(self, name)!r}")


def require_simulable(params: BeamParameters, allow_undamped_inertia: bool = False) -> None:
    """Nonlinear inertia without Kelvin-Voigt damping is refused unless explicitly allowed."""
    if params.iota == 1 and params.k2 == 0 and not allow_undamped_inertia:
        raise ParameterError(
            "iota=1 with k2=0: nonlinear inertia requires some Kelvin-Voigt damping (k2 > 0) "
            "for well-posedness; pass allow_undamped_inertia to explore anyway"
        )


def _orbit_mean(T: np.ndarray, perms: list[tuple[int, ...]]) -> np.ndarray:
    """Average over the index orbit, then copy each orbit's canonical entry so symmetry is bitwise."""
    mean = sum(T.transpose(p) for p in perms) / len(perms)
    idx = np.indices(T.shape).reshape(T.ndim, -1)
    # canonical representative: lexicographically smallest permuted index tuple
    flat = np.stack([np.ravel_multi_index(idx[list(p)], T.shape) for p in perms])
    return mean.ravel()[flat.min(axis=0)].reshape(T.shape)


def _orbit_spread(T: np.ndarray, perms: list[tuple[int, ...]]) -> float:
    return float(max(np.max(np.abs(T - T.transpose(p))) for p in perms))


S_SYMMETRIES = [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2)]
I_SYMMETRIES = S_SYMMETRIES + [(2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]


def _mode_samples(basis: ModeBasis, quad: QuadratureContext, order: int) -> np.ndarray:
    return basis.evaluate(quad.nodes, order)


def assemble_S(basis: ModeBasis, quad: QuadratureContext, return_witness: bool = False):
    """S[i,j,k,l] = int s_i'' s_j'' s_k' s_l' dx, symmetrized over i<->j and k<->l.

    With ``return_witness`` also returns the largest pre-symmetrization
    asymmetry, a round-off/quadrature witness.
    """
    d1 = _mode_samples(basis, quad, 1)
    d2 = _mode_samples(basis, quad, 2)
    pair2 = d2[:, None, :] * d2[None, :, :]
    pair1 = d1[:, None, :] * d1[None, :, :]
    n = basis.n_modes
    raw = (pair2.reshape(n * n, -1) * quad.weights) @ pair1.reshape(n * n, -1).T
    raw = raw.reshape(n, n, n, n)
    witness = _orbit_spread(raw, S_SYMMETRIES)
    S = _orbit_mean(raw, S_SYMMETRIES)
    return (S, witness) if return_witness else S


def pair_primitives(basis: ModeBasis, quad: QuadratureContext) -> np.ndarray:
    """F[a, b, :] = int_0^x s_a' s_b' on the node grid, computed for a <= b and mirrored."""
    d1 = _mode_samples(basis, quad, 1)
    n = basis.n_modes
    ia, ib = np.triu_indices(n)
    canon = cumulative_primitive(d1[ia] * d1[ib], quad)
    F = np.empty((n, n, quad.size))
    F[ia, ib] = canon
    F[ib, ia] = canon
    return F


def assemble_I(basis: ModeBasis, quad: QuadratureContext, return_witness: bool = False,
               primitives: np.ndarray | None = None):
    """I[i,j,k,l] = (F_ij, F_kl), symmetrized over its eight-element index orbit."""
    F = pair_primitives(basis, quad) if primitives is None else primitives
    n = basis.n_modes
    flat = F.reshape(n * n, -1)
    raw = ((flat * quad.weights) @ flat.T).reshape(n, n, n, n)
    witness = _orbit_spread(raw, I_SYMMETRIES)
    I = _orbit_mean(raw, I_SYMMETRIES)
    return (I, witness) if return_witness else I


def pair_gram_matrix(I: np.ndarray) -> np.ndarray:
    """I restricted to canonical pairs (a <= b), as a symmetric matrix over pairs."""
    ia, ib = np.triu_indices(I.shape[0])
    return I[ia, ib][:, ia, ib]


@dataclass(frozen=True)
class DiscreteOperators:
    params: BeamParameters
    basis: ModeBasis
    quad: QuadratureContext
    kappa4: np.ndarray
    S: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)  # pair primitives on the node grid
    mode_integrals: np.ndarray = field(repr=False)  # int_0^L s_j
    witness_S: float = 0.0
    witness_I: float = 0.0
    # contraction kernels, see dynamics
    stiff_kernel: np.ndarray = field(repr=False, default=None)  # K[j,a,b,c] = S[a,j,b,c] + S[a,c,b,j]
    mass_kernel: np.ndarray = field(repr=False, default=None)  # [j,b,a,c] = I[a,b,c,j]
    velocity_kernel: np.ndarray = field(repr=False, default=None)  # [j,c,a,b] = I[a,b,c,j]

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    def with_params(self, params: BeamParameters) -> "DiscreteOperators":
        """Same tensors, different D/k2/flags (length must match)."""
        if params.L != self.params.L:
            raise ParameterError("changing L requires re-assembly")
        return _finish(params, self.basis, self.quad, self.S, self.I, self.F,
                       self.witness_S, self.witness_I)


def _finish(params, basis, quad, S, I, F, wS, wI) -> DiscreteOperators:
    kappa4 = basis.kappa4.copy()
    stiff = S.transpose(1, 0, 2, 3) + S.transpose(3, 0, 2, 1)
    # symmetrize over (a, b, c); contraction with q q q is unchanged
    stiff = sum(stiff.transpose((0,) + tuple(1 + i for i in p)) for p in permutations(range(3))) / 6.0
    mass = np.ascontiguousarray(I.transpose(3, 1, 0, 2))
    vel = np.ascontiguousarray(I.transpose(3, 2, 0, 1))
    integrals = (basis.evaluate(quad.nodes, 0) @ quad.weights)
    for arr in (kappa4, S, I, F, stiff, mass, vel, integrals):
        arr.setflags(write=False)
    return DiscreteOperators(
        params=params, basis=basis, quad=quad, kappa4=kappa4, S=S, I=I, F=F,
        mode_integrals=integrals, witness_S=wS, witness_I=wI,
        stiff_kernel=np.ascontiguousarray(stiff), mass_kernel=mass, velocity_kernel=vel,
    )


def _cache_key(n_modes: int, quad: QuadratureContext) -> dict:
    return {
        "format": CACHE_FORMAT,
        "n_modes": int(n_modes),
        "length": float(quad.length).hex(),
        "panels": quad.panels,
        "points_per_panel": quad.points_per_panel,
    }


def _cache_path(cache_dir: Path, key: dict) -> Path:
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]
    return cache_dir / f"tensors_n{key['n_modes']}_{digest}.npz"


def load_cached_tensors(cache_dir, n_modes: int, quad: QuadratureContext):
    """(S, I, F, wS, wI) from the cache, or None on a miss or any key mismatch."""
    key = _cache_key(n_modes, quad)
    path = _cache_path(Path(cache_dir), key)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            stored = json.loads(str(data["key"]))
            if stored != key:
                log.info("tensor cache key mismatch at %s; reassembling", path)
                return None
            return (data["S"].copy(), data["I"].copy(), data["F"].copy(),
                    float(data["witness_S"]), float(data["witness_I"]))
    except (OSError, KeyError, ValueError) as exc:
        log.warning("unreadable tensor cache %s (%s); reassembling", path, exc)
        return None


def save_cached_tensors(cache_dir, n_modes: int, quad: QuadratureContext, S, I, F, wS, wI) -> Path:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = _cache_key(n_modes, quad)
    path = _cache_path(cache_dir, key)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, key=json.dumps(key, sort_keys=True), S=S, I=I, F=F,
             witness_S=wS, witness_I=wI)
    tmp.replace(path)
    return path


def build_operators(params: BeamParameters, n_modes: int, quad: QuadratureContext | None = None,
                    cache_dir=None, allow_undamped_inertia: bool = False) -> DiscreteOperators:
    """Basis, tensors and kernels for ``n_modes`` modes; optionally through a tensor cache."""
    require_simulable(params, allow_undamped_inertia)
    if quad is None:
        quad = build_context(length=params.L)
    if abs(quad.length - params.L) > 1e-14 * params.L:
        raise ParameterError(f"quadrature length {quad.length} differs from beam length {params.L}")
    basis = build_basis(n_modes, params.L, quad)
    cached = load_cached_tensors(cache_dir, n_modes, quad) if cache_dir else None
    if cached is not None:
        S, I, F, wS, wI = cached
    else:
        S, wS = assemble_S(basis, quad, return_witness=True)
        F = pair_primitives(basis, quad)
        I, wI = assemble_I(basis, quad, return_witness=True, primitives=F)
        if cache_dir:
            save_cached_tensors(cache_dir, n_modes, quad, S, I, F, wS, wI)
    return _finish(params, basis, quad, S, I, F, wS, wI)
