"""Transverse pressure p(x, t) and its modal projection P_j(t) = (p(., t), s_j)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .modes import ModeBasis
from .quadrature import QuadratureContext, QuadratureError, inner_product

FORCING_KINDS = ("zero", "uniform", "harmonic", "modal")


class ForcingError(ValueError):
    pass


@dataclass(frozen=True)
class Forcing:
    """Preset loads.

    zero      p = 0
    uniform   p = amplitude
    harmonic  p = amplitude * sin(frequency * t)
    modal     p = amplitude * g(t) * sum_j profile[j] s_j(x), with g = 1, or
              sin(frequency * t) when frequency is nonzero
    """

    kind: str = "zero"
    amplitude: float = 0.0
    frequency: float = 0.0
    profile: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ForcingError(f"unknown forcing preset {self.kind!r}; expected one of {FORCING_KINDS}")
        if not (np.isfinite(self.amplitude) and np.isfinite(self.frequency)):
            raise ForcingError("forcing amplitude and frequency must be finite")
        if self.kind == "modal" and not self.profile:
            raise ForcingError("modal forcing needs a non-empty profile")

    def time_factor(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "harmonic" or (self.kind == "modal" and self.frequency != 0.0):
            return self.amplitude * np.sin(self.frequency * t)
        return self.amplitude

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0


FieldLoad = Callable[[np.ndarray, float], np.ndarray]


def project_forcing(p: Forcing | FieldLoad | None, basis: ModeBasis, quad: QuadratureContext, t: float) -> np.ndarray:
    """Modal load vector (p(., t), s_j) for a preset or a callable p(x, t)."""
    return bind_forcing(p, basis, quad)(t)


def bind_forcing(p: Forcing | FieldLoad | None, basis: ModeBasis,
                 quad: QuadratureContext) -> Callable[[float], np.ndarray]:
    """A function t -> P(t) with any time-independent spatial integrals precomputed."""
    n = basis.n_modes
    if p is None or (isinstance(p, Forcing) and p.kind == "zero"):
        zero = np.zeros(n)
        return lambda t: zero.copy()

    if isinstance(p, Forcing):
        if p.kind in ("uniform", "harmonic"):
            shape = basis.evaluate(quad.nodes, 0) @ quad.weights
        else:
            if len(p.profile) > n:
                raise ForcingError(f"modal profile has {len(p.profile)} entries but only {n} modes")
            shape = np.zeros(n)
            shape[: len(p.profile)] = p.profile
        return lambda t: p.time_factor(t) * shape

    modes = basis.evaluate(quad.nodes, 0)

    def project(t: float) -> np.ndarray:
        vals = np.broadcast_to(np.asarray(p(quad.nodes, t), dtype=float), quad.nodes.shape)
        try:
            return inner_product(modes, vals, quad)
        except QuadratureError as exc:
            raise ForcingError(f"forcing at t={t}: {exc}") from exc

    return project
