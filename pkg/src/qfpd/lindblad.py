"""Open-system model: density-matrix vectorization and bilinear generators.

The state vector stacks the populations first and then the off-diagonal
elements in conjugate pairs.  For ``l = 3``::

    (rho00, rho11, rho22, rho01, rho02, rho10, rho20, rho12, rho21)

so that for every row block ``i`` the upper entries ``rho_ij (j > i)`` are
followed by their mirror images ``rho_ji``.  The generators satisfy

    dx/dt = (A_tilde + i u N_tilde) x

for a single real control field ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DimensionError, ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


@lru_cache(maxsize=None)
def element_order(dim: int) -> tuple[tuple[int, int], ...]:
    """Matrix index ``(i, j)`` stored at each position of the state vector."""
    if dim < 1:
        raise DimensionError(f"dimension must be positive, got {dim}")
    order = [(i, i) for i in range(dim)]
    for i in range(dim - 1):
        order += [(i, j) for j in range(i + 1, dim)]
        order += [(j, i) for j in range(i + 1, dim)]
    return tuple(order)


@lru_cache(maxsize=None)
def _position(dim: int) -> dict[tuple[int, int], int]:
    return {pair: k for k, pair in enumerate(element_order(dim))}


@lru_cache(maxsize=None)
def _index_arrays(dim: int) -> tuple[np.ndarray, np.ndarray]:
    order = element_order(dim)
    rows = np.array([p[0] for p in order], dtype=np.intp)
    cols = np.array([p[1] for p in order], dtype=np.intp)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def population_indices(dim: int) -> np.ndarray:
    """Positions of ``rho_kk`` in the state vector (always ``0..dim-1``)."""
    return np.arange(dim)


@lru_cache(maxsize=None)
def conjugate_partner(dim: int) -> np.ndarray:
    """``partner[k]`` is the position holding the mirror element of ``k``."""
    pos = _position(dim)
    partner = np.array([pos[(j, i)] for (i, j) in element_order(dim)], dtype=np.intp)
    partner.setflags(write=False)
    return partner


@lru_cache(maxsize=None)
def real_basis(dim: int) -> np.ndarray:
    """Unitary ``T`` with ``x = T y`` and ``y`` real for Hermitian ``rho``.

    ``y`` holds the populations followed by ``sqrt(2) Re rho_ij`` and
    ``sqrt(2) Im rho_ij`` in place of each conjugate pair.  Maps that preserve
    Hermiticity become real matrices in this basis.
    """
    pos = _position(dim)
    n = dim * dim
    t = np.zeros((n, n), dtype=complex)
    s = 1 / np.sqrt(2)
    for k, (i, j) in enumerate(element_order(dim)):
        if i == j:
            t[k, k] = 1.0
        elif i < j:
            m = pos[(j, i)]
            t[k, k], t[m, k] = s, s
            t[k, m], t[m, m] = 1j * s, -1j * s
    t.setflags(write=False)
    return t


def dim_from_length(n: int) -> int:
    dim = int(round(np.sqrt(n)))
    if dim * dim != n or dim < 1:
        raise DimensionError(f"vector length {n} is not a perfect square")
    return dim


def vectorize(rho) -> np.ndarray:
    """Flatten a square matrix into the population-first state vector."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    rows, cols = _index_arrays(rho.shape[0])
    return rho[rows, cols].astype(complex)


def devectorize(x) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    dim = dim_from_length(x.shape[0])
    rows, cols = _index_arrays(dim)
    rho = np.empty((dim, dim), dtype=complex)
    rho[rows, cols] = x
    return rho


def hermiticity_residual(x) -> float:
    """Max deviation between conjugate-paired coordinates of ``x``."""
    x = np.asarray(x)
    partner = conjugate_partner(dim_from_length(x.shape[-1]))
    return float(np.max(np.abs(x - np.conj(x[..., partner]))))


def trace_of(x) -> complex:
    x = np.asarray(x)
    dim = dim_from_length(x.shape[-1])
    return x[..., :dim].sum(axis=-1)


def projector_row(amplitudes) -> np.ndarray:
    """Row vector ``d`` with ``d @ vectorize(rho) == Tr(rho |psi><psi|)``.

    ``amplitudes`` are given in matrix-index order and are normalized here.
    """
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.ndim != 1:
        raise DimensionError("target amplitudes must be a 1-D vector")
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValidationError("target amplitudes are all zero", field="target")
    psi = psi / norm
    projector = np.outer(psi, psi.conj())
    # Tr(rho P) = sum_ij rho_ij P_ji
    return vectorize(projector.T)[None, :]


@dataclass(frozen=True)
class DensityState:
    """A validated density matrix together with its state vector."""

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 2:
            raise DimensionError(f"density matrix must be l x l with l >= 2, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {np.trace(rho)}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise ValidationError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def from_vector(cls, x) -> "DensityState":
        return cls(devectorize(x))

    @classmethod
    def pure(cls, amplitudes) -> "DensityState":
        psi = np.asarray(amplitudes, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def vector(self) -> np.ndarray:
        return vectorize(self.matrix)


@dataclass(frozen=True)
class SystemSpec:
    """Physical data of an ``l``-level system.

    Attributes:
        h0_eigenvalues: energies ``E_k`` of the free Hamiltonian (hbar = 1).
        h1: Hermitian control Hamiltonian, coupled to the field ``u``.
        rates: ``rates[k, j]`` is the dissipative rate from level ``k`` to ``j``.
    """

    h0_eigenvalues: np.ndarray
    h1: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        energies = np.asarray(self.h0_eigenvalues, dtype=float)
        h1 = np.asarray(self.h1, dtype=complex)
        rates = np.asarray(self.rates, dtype=float)
        dim = energies.shape[0] if energies.ndim == 1 else -1
        if dim < 2:
            raise DimensionError("h0_eigenvalues must be a vector with at least 2 levels")
        if h1.shape != (dim, dim):
            raise DimensionError(f"h1 has shape {h1.shape}, expected {(dim, dim)}")
        if rates.shape != (dim, dim):
            raise DimensionError(f"rates has shape {rates.shape}, expected {(dim, dim)}")
        if np.max(np.abs(h1 - h1.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("h1 is not Hermitian", field="h1")
        if np.any(rates < 0):
            raise ValidationError("dissipation rates must be nonnegative", field="rates")
        if np.any(np.diag(rates) != 0):
            raise ValidationError("self-transition rates must be zero", field="rates")
        for arr in (energies, h1, rates):
            arr.setflags(write=False)
        object.__setattr__(self, "h0_eigenvalues", energies)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "rates", rates)

    @property
    def dim(self) -> int:
        return self.h0_eigenvalues.shape[0]


@dataclass(frozen=True)
class GeneratorPair:
    a_tilde: np.ndarray
    n_tilde: np.ndarray
    gamma: np.ndarray

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def flow(self, u: float) -> np.ndarray:
        """Generator ``A_tilde + i u N_tilde`` for a constant field."""
        return self.a_tilde + 1j * u * self.n_tilde


def build_generators(spec: SystemSpec) -> GeneratorPair:
    """Assemble ``(A_tilde, N_tilde)`` entry by entry from the element-wise
    master equation."""
    dim = spec.dim
    n = dim * dim
    pos = _position(dim)
    energies, h1, rates = spec.h0_eigenvalues, spec.h1, spec.rates

    outflow = rates.sum(axis=1)
    gamma = 0.5 * (outflow[:, None] + outflow[None, :])

    a_tilde = np.zeros((n, n), dtype=complex)
    n_tilde = np.zeros((n, n), dtype=complex)
    for row, (p, q) in enumerate(element_order(dim)):
        a_tilde[row, row] = -1j * (energies[p] - energies[q]) - gamma[p, q]
        if p == q:
            for k in range(dim):
                if rates[k, p]:
                    a_tilde[row, pos[(k, k)]] += rates[k, p]
        # i u sum_k (rho_pk <k|H1|q> - <p|H1|k> rho_kq)
        for k in range(dim):
            if h1[k, q]:
                n_tilde[row, pos[(p, k)]] += h1[k, q]
            if h1[p, k]:
                n_tilde[row, pos[(k, q)]] -= h1[p, k]
    for arr in (a_tilde, n_tilde, gamma):
        arr.setflags(write=False)
    return GeneratorPair(a_tilde=a_tilde, n_tilde=n_tilde, gamma=gamma)


PRESETS = {
    "spin_half": "two-level spin in basis {|1>, |0>}, decay |1> -> |0>",
    "lambda_type": "three-level Lambda atom in basis {|2>, |1>, |0>}, decay |2> -> |0>",
}


def preset(name: str, theta: float) -> SystemSpec:
    """Built-in systems.

    Both use a descending basis, so matrix index 0 is the highest level.
    """
    if theta < 0:
        raise ConfigurationError(f"theta must be nonnegative, got {theta}")
    if name == "spin_half":
        sigma1 = np.array([[0, 1], [1, 0]], dtype=complex)
        sigma2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
        rates = np.zeros((2, 2))
        rates[0, 1] = theta
        return SystemSpec(np.array([0.5, -0.5]), 0.5 * (sigma1 + sigma2), rates)
    if name == "lambda_type":
        h1 = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=complex)
        rates = np.zeros((3, 3))
        rates[0, 2] = theta
        return SystemSpec(np.array([1.5, 1.0, 0.0]), h1, rates)
    raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
