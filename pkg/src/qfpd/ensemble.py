"""Closed-loop optimization on a nominal member and open-loop ensemble testing.

Randomness comes from a single integer seed split into named streams:
``opt`` for the optimization phase and ``test/k`` for ensemble member ``k``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretize import Discretizer
from .doubling import DoublingSolver
from .errors import ConfigurationError, ConvergenceError, DimensionError
from .fpd import ControlLaw, NoiseIdealSpec, sample_control
from .lindblad import (GeneratorPair, SystemSpec, build_generators, dim_from_length,
                       hermiticity_residual, real_basis)

log = logging.getLogger(__name__)

OPT_STREAM = (0,)
TEST_STREAM = 1
NOISE_CHUNK = 4096


def stream(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    """Independent generator for the named stream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def member_stream(seed: int, k: int) -> np.random.Generator:
    return stream(seed, (TEST_STREAM, k))


def _generators(system) -> GeneratorPair:
    if isinstance(system, GeneratorPair):
        return system
    if isinstance(system, SystemSpec):
        return build_generators(system)
    raise TypeError("system must be a SystemSpec or GeneratorPair")


@dataclass
class Trajectory:
    """Recorded optimization run.

    ``states`` holds the physical vectors ``x + x_e``; ``outputs`` and
    ``fidelities`` have one entry per state and ``controls`` one per step.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    outputs: np.ndarray
    fidelities: np.ndarray
    raw_fidelities: np.ndarray
    doublings: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    stopped_early: bool = False

    @property
    def steps(self) -> int:
        return self.controls.shape[0]

    @property
    def populations(self) -> np.ndarray:
        dim = dim_from_length(self.states.shape[1])
        return np.real(self.states[:, :dim])

    @property
    def trace_drift(self) -> np.ndarray:
        return self.populations.sum(axis=1) - 1.0


@dataclass(frozen=True)
class EnsembleReport:
    n_members: int
    final_fidelities: np.ndarray
    mean: float
    min: float
    max: float
    seed: int

    @classmethod
    def from_fidelities(cls, fidelities, seed: int) -> "EnsembleReport":
        f = np.asarray(fidelities, dtype=float)
        return cls(int(f.shape[0]), f, float(f.mean()), float(f.min()), float(f.max()), int(seed))


def fidelity(x, x_e, d_target) -> float:
    """``Tr(rho Pi_d)`` for the physical state ``x + x_e``, clamped to [0, 1]."""
    raw = np.real(np.ravel(d_target) @ (np.asarray(x) + np.asarray(x_e)))
    return float(np.clip(raw, 0.0, 1.0))


def simulate_step(x_prev, a, b, u, zeta: float, sigma_noise=0.0, d=None, x_e=None):
    """One step of ``x_t = A x + B u + zeta A x`` and ``o_t = Re(D (x_t + x_e)) + sigma``.

    Returns:
        ``(x_t, o_t)``; ``o_t`` is None when no output map ``d`` is given.
    """
    x_prev = np.asarray(x_prev, dtype=complex)
    ax = np.asarray(a) @ x_prev
    b = np.asarray(b, dtype=complex)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    bu = b @ u if b.ndim == 2 else b * u[0]
    x = ax + bu + zeta * ax
    if d is None:
        return x, None
    shifted = x if x_e is None else x + np.asarray(x_e)
    o = np.real(np.atleast_2d(d) @ shifted) + sigma_noise
    return x, o


def _target_row(spec: NoiseIdealSpec, target) -> np.ndarray:
    if target is not None:
        return np.atleast_2d(np.asarray(target, dtype=complex))
    if spec.d.shape[0] != 1:
        raise ConfigurationError("a target row is required when the output has several rows")
    return spec.d


def _prepare(system, spec, x0, x_e, dt):
    gen = _generators(system)
    n = gen.a_tilde.shape[0]
    x0 = np.asarray(x0, dtype=complex)
    x_e = np.zeros(n, dtype=complex) if x_e is None else np.asarray(x_e, dtype=complex)
    if x0.shape != (n,) or x_e.shape != (n,):
        raise DimensionError(f"x0 and x_e must have length {n}")
    if spec.n_state != n:
        raise DimensionError(f"output map acts on length {spec.n_state}, state has length {n}")
    return gen, Discretizer(gen, dt, x_e), x0 - x_e, x_e


def run_optimization(system, spec: NoiseIdealSpec, x0, x_e, dt: float, horizon: int,
                     rng_seed: int, stop_fidelity: float = 0.999, dwell: int = 100,
                     target=None, sample: bool = False, solver_tol: float = 1e-9,
                     noise_passes: int | None = None, progress_every: int = 0):
    """Closed-loop run of the steady-state controller on the nominal member.

    Each step draws the multiplicative noise, rebuilds ``B`` at the current
    state, solves for the steady-state controller, applies its mean (or a
    sample from it when ``sample`` is set) and advances the state.  The run
    stops once the fidelity has stayed at or above ``stop_fidelity`` for
    ``dwell`` consecutive steps, or after ``horizon`` steps.

    Args:
        system: SystemSpec or GeneratorPair.
        spec: noise and ideal-pdf parameters.
        x0: physical initial state vector.
        x_e: shift state; the model runs on ``x - x_e``.
        target: row vector for the fidelity; defaults to ``spec.d``.
        noise_passes: see :class:`~qfpd.doubling.DoublingSolver`.

    Returns:
        ``(trajectory, control_signal)``.

    Raises:
        ConvergenceError: the controller could not be computed; ``step`` is set.
    """
    if horizon < 1:
        raise ConfigurationError(f"horizon must be >= 1, got {horizon}")
    if dwell < 1:
        raise ConfigurationError(f"dwell must be >= 1, got {dwell}")
    gen, disc, x, x_e = _prepare(system, spec, x0, x_e, dt)
    d_target = _target_row(spec, target)[0]
    solver = DoublingSolver(disc.a, spec, tol=solver_tol, noise_passes=noise_passes)
    rng = stream(rng_seed, OPT_STREAM)
    sqrt_sigma = np.sqrt(spec.sigma)
    g_chol = np.linalg.cholesky(spec.g)
    m = spec.d.shape[0]

    n = x.shape[0]
    states = np.empty((horizon + 1, n), dtype=complex)
    outputs = np.empty((horizon + 1, m))
    raw = np.empty(horizon + 1)
    controls = np.empty((horizon, spec.n_control))
    doublings = np.empty(horizon, dtype=int)

    def record(t, x_int, sigma_draw):
        phys = x_int + x_e
        states[t] = phys
        outputs[t] = np.real(spec.d @ phys) + g_chol @ sigma_draw
        raw[t] = np.real(d_target @ phys)

    record(0, x, rng.standard_normal(m))
    held = 1 if raw[0] >= stop_fidelity else 0
    stopped = False
    t = 0
    for t in range(1, horizon + 1):
        zeta = sqrt_sigma * rng.standard_normal()
        b = disc.b_of(x)
        try:
            v, kk = solver.solve(b, x)
        except ConvergenceError as exc:
            exc.step = t - 1
            raise
        u = np.real(v)
        if sample:
            r = np.real(np.linalg.inv(kk))
            u = sample_control(ControlLaw(u, 0.5 * (r + r.T)), rng)
        controls[t - 1] = u
        doublings[t - 1] = solver.last_doublings
        ax = disc.a @ x
        x = ax + zeta * ax + b * u[0]
        record(t, x, rng.standard_normal(m))
        held = held + 1 if raw[t] >= stop_fidelity else 0
        if progress_every and t % progress_every == 0:
            log.info("step %d  u=%.6g  fidelity=%.6f  doublings=%d", t, u[0], raw[t],
                     solver.last_doublings)
        if held >= dwell:
            stopped = True
            break
    steps = t
    traj = Trajectory(
        times=dt * np.arange(steps + 1),
        states=states[:steps + 1],
        controls=controls[:steps],
        outputs=outputs[:steps + 1],
        fidelities=np.clip(raw[:steps + 1], 0.0, 1.0),
        raw_fidelities=raw[:steps + 1],
        doublings=doublings[:steps],
        stopped_early=stopped,
    )
    return traj, controls[:steps].copy()


class _MemberNoise:
    """Per-member noise streams read in fixed-size chunks."""

    def __init__(self, seed: int, n_members: int, sqrt_sigma: float, chunk: int = NOISE_CHUNK):
        self.gens = [member_stream(seed, k) for k in range(n_members)]
        self.sqrt_sigma = sqrt_sigma
        self.chunk = chunk
        self.block = np.zeros((0, n_members))
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos == self.block.shape[0]:
            draws = [g.standard_normal(self.chunk) for g in self.gens]
            self.block = self.sqrt_sigma * np.stack(draws, axis=1)
            self.pos = 0
        row = self.block[self.pos]
        self.pos += 1
        return row


def run_testing(system, spec: NoiseIdealSpec, control_signal, x0, x_e, dt: float,
                n_members: int, rng_seed: int, target=None, return_states: bool = False):
    """Replay a stored control signal on ``n_members`` noisy copies.

    Every member starts at ``x0`` and sees its own multiplicative noise
    ``zeta^k_t`` from stream ``test/k``; the field sequence is shared.

    Returns:
        EnsembleReport, or ``(report, final_states)`` with ``return_states``.
    """
    if n_members < 1:
        raise ConfigurationError(f"n_members must be >= 1, got {n_members}")
    gen, disc, x, x_e = _prepare(system, spec, x0, x_e, dt)
    d_target = _target_row(spec, target)[0]
    controls = np.asarray(control_signal, dtype=float)
    if controls.ndim == 1:
        controls = controls[:, None]
    if controls.shape[1] != 1:
        raise DimensionError("ensemble replay supports a single control field")
    u_seq = controls[:, 0]
    n = x.shape[0]

    # Hermiticity-preserving maps are real in the real basis; this cuts the
    # ensemble arithmetic by four and changes nothing but rounding.
    t_basis = real_basis(dim_from_length(n))
    th = t_basis.conj().T
    a_r, w_r = th @ disc.a @ t_basis, th @ disc.w @ t_basis
    xs = np.repeat((th @ x)[:, None], n_members, axis=1)
    be = th @ disc.b_e
    scale = 1e-12 * max(1.0, np.abs(disc.a).max(), np.abs(disc.w).max())
    if np.abs(a_r.imag).max() <= scale and np.abs(w_r.imag).max() <= scale \
            and np.abs(xs.imag).max() <= 1e-12 and np.abs(be.imag).max() <= 1e-12:
        a_r, w_r, xs, be = a_r.real, w_r.real, xs.real.copy(), be.real
    stacked = np.vstack([a_r, w_r])

    noise = _MemberNoise(rng_seed, n_members, float(np.sqrt(spec.sigma)))
    for u in u_seq:
        zeta = noise.next()
        y = stacked @ xs
        xs = y[:n] * (1.0 + zeta) + u * y[n:]
        xs += (u * be)[:, None]
    finals = (t_basis @ xs).T
    fid = np.clip(np.real((finals + x_e) @ d_target), 0.0, 1.0)
    report = EnsembleReport.from_fidelities(fid, rng_seed)
    if return_states:
        return report, finals + x_e
    return report


def check_hermiticity(traj: Trajectory) -> float:
    return hermiticity_residual(traj.states)
