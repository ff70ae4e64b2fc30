"""Sampled-data form of the bilinear model.

Over one sampling interval the field is held constant, giving

    x_t = A x_{t-1} + B(x_{t-1}) u_{t-1},
    A = exp(A_tilde dt),
    B(x) = (int_0^dt exp(A_tilde s) ds) i N_tilde (x + x_e).

The integral is read off the upper-right block of one augmented exponential
(Van Loan's construction), so no quadrature is involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConfigurationError, DimensionError
from .lindblad import GeneratorPair


def _square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    m = _square(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix_exp: input has non-finite entries")
    return expm(m)


def exp_and_integral(a_tilde, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(exp(A dt), int_0^dt exp(A s) ds)`` from one exponential.

    exp([[A, I], [0, 0]] dt) = [[exp(A dt), int_0^dt exp(A s) ds], [0, I]].
    """
    a_tilde = _square(a_tilde, "generator")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    n = a_tilde.shape[0]
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[:n, :n] = a_tilde * dt
    block[:n, n:] = np.eye(n) * dt
    e = expm(block)
    return e[:n, :n].copy(), e[:n, n:].copy()


@dataclass(frozen=True)
class DiscreteModel:
    a: np.ndarray
    b: np.ndarray
    dt: float
    x_e: np.ndarray


class Discretizer:
    """Caches the state-independent pieces ``A`` and the interval integral.

    Only ``B`` depends on the state, and it is linear in ``x + x_e``, so one
    exponential per (generators, dt) pair serves the whole run.
    """

    def __init__(self, gen: GeneratorPair, dt: float, x_e=None):
        self.gen = gen
        self.dt = float(dt)
        n = gen.a_tilde.shape[0]
        self.x_e = np.zeros(n, dtype=complex) if x_e is None else np.asarray(x_e, dtype=complex)
        if self.x_e.shape != (n,):
            raise DimensionError(f"x_e has shape {self.x_e.shape}, expected {(n,)}")
        self.a, self.gamma_int = exp_and_integral(gen.a_tilde, self.dt)
        # B(x) = W (x + x_e)
        self.w = self.gamma_int @ (1j * gen.n_tilde)
        self.b_e = self.w @ self.x_e

    def b_of(self, x_prev) -> np.ndarray:
        return self.w @ np.asarray(x_prev) + self.b_e

    def model(self, x_prev) -> DiscreteModel:
        return DiscreteModel(a=self.a, b=self.b_of(x_prev), dt=self.dt, x_e=self.x_e)


def discretize(gen: GeneratorPair, x_prev, x_e, dt: float) -> DiscreteModel:
    """One-off discretization at ``x_prev``; see :class:`Discretizer` for runs."""
    x_prev = np.asarray(x_prev, dtype=complex)
    n = gen.a_tilde.shape[0]
    if x_prev.shape != (n,):
        raise DimensionError(f"x_prev has shape {x_prev.shape}, expected {(n,)}")
    return Discretizer(gen, dt, x_e).model(x_prev)
