"""Gaussian fully probabilistic design: cost-to-go recursion and controller.

The cost-to-go is kept in the quadratic form

    -ln gamma(x) = 0.5 x^H M x + 0.5 P x + 0.5 omega

and propagated backwards one sampling period at a time.  The optimal
randomized controller is Gaussian, ``u ~ N(v, R)``.

Shapes used throughout: ``a`` is ``(n, n)``, ``b`` is ``(n, p)`` (a length-n
vector is accepted for ``p = 1``), ``d`` is ``(m, n)``, ``P`` is a length-n row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, NumericalError, ValidationError

HERMITIAN_TOL = 1e-10
COND_LIMIT = 1e14


def _as_matrix(x, name) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {x.shape}")
    return x


def _chol(m, name):
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name} is not positive definite") from exc


@dataclass(frozen=True)
class NoiseIdealSpec:
    """Noise model and ideal (target) distribution.

    Attributes:
        sigma: variance of the scalar multiplicative state noise.
        g: covariance of the measurement noise.
        g_r: covariance of the ideal measurement pdf.
        omega: covariance of the ideal controller pdf.
        u_r: mean of the ideal controller pdf.
        o_d: desired measurement (mean of the ideal measurement pdf).
        d: output map, ``o = Re(d x)``.
    """

    sigma: float
    g: np.ndarray
    g_r: np.ndarray
    omega: np.ndarray
    u_r: np.ndarray
    o_d: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}", field="sigma")
        g = _as_matrix(self.g, "g")
        g_r = _as_matrix(self.g_r, "g_r")
        omega = _as_matrix(self.omega, "omega")
        u_r = np.atleast_1d(np.asarray(self.u_r, dtype=float))
        o_d = np.atleast_1d(np.asarray(self.o_d, dtype=float))
        d = np.atleast_2d(np.asarray(self.d, dtype=complex))
        m, p = o_d.shape[0], u_r.shape[0]
        for name, mat, size in (("g", g, m), ("g_r", g_r, m), ("omega", omega, p)):
            if mat.shape != (size, size):
                raise ValidationError(
                    f"{name} has shape {mat.shape}, expected {(size, size)}", field=name)
            if np.max(np.abs(mat - mat.T)) > 1e-12 * max(1.0, np.max(np.abs(mat))):
                raise ValidationError(f"{name} is not symmetric", field=name)
            try:
                _chol(mat, name)
            except NumericalError as exc:
                raise ValidationError(str(exc), field=name) from exc
        if d.shape[0] != m:
            raise ValidationError(
                f"d has {d.shape[0]} rows but o_d has length {m}", field="d")
        for name, arr in (("g", g), ("g_r", g_r), ("omega", omega), ("u_r", u_r),
                          ("o_d", o_d), ("d", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_state(self) -> int:
        return self.d.shape[1]

    @property
    def n_control(self) -> int:
        return self.u_r.shape[0]

    def replace(self, **changes) -> "NoiseIdealSpec":
        values = {k: getattr(self, k) for k in
                  ("sigma", "g", "g_r", "omega", "u_r", "o_d", "d")}
        values.update(changes)
        return NoiseIdealSpec(**values)


@dataclass(frozen=True)
class CostToGo:
    m: np.ndarray
    p: np.ndarray
    omega_const: float = 0.0
    iterations: int = 0

    @classmethod
    def zero(cls, n: int) -> "CostToGo":
        return cls(np.zeros((n, n), dtype=complex), np.zeros(n, dtype=complex), 0.0)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "CostToGo":
        """Random Hermitian positive semidefinite start, as an optional init."""
        z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return cls(z @ z.conj().T / n, np.zeros(n, dtype=complex), 0.0)


@dataclass(frozen=True)
class ControlLaw:
    v: np.ndarray
    r: np.ndarray
    im_residual: float = 0.0

    @property
    def warning(self) -> bool:
        """True when the discarded imaginary part of ``v`` is not negligible."""
        return self.im_residual > 1e-6 * (1.0 + float(np.linalg.norm(self.v)))


def _b_matrix(b, n) -> np.ndarray:
    b = np.asarray(b, dtype=complex)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != n:
        raise DimensionError(f"b has shape {b.shape}, expected ({n}, p)")
    return b


def _check_dims(a, b, spec: NoiseIdealSpec):
    a = np.asarray(a, dtype=complex)
    n = spec.n_state
    if a.shape != (n, n):
        raise DimensionError(f"a has shape {a.shape}, expected {(n, n)}")
    b = _b_matrix(b, n)
    if b.shape[1] != spec.n_control:
        raise DimensionError(f"b has {b.shape[1]} columns, u_r has length {spec.n_control}")
    return a, b


def _invert_checked(k: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(k)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(
            f"Omega^-1 + B^H Q B is singular or ill conditioned (cond = {cond:.3e})")
    return np.linalg.inv(k)


def _quadratic_pieces(ct: CostToGo, a, b, spec: NoiseIdealSpec):
    d, gri = spec.d, np.linalg.inv(spec.g_r)
    dh = d.conj().T
    q = dh @ gri @ d + ct.m
    bh = b.conj().T
    k = np.linalg.inv(spec.omega) + bh @ q @ b
    p_col = np.asarray(ct.p, dtype=complex).conj()
    c = np.linalg.inv(spec.omega) @ spec.u_r - 0.5 * bh @ (p_col - 2 * dh @ gri @ spec.o_d)
    return q, k, c, gri


def riccati_step(ct: CostToGo, a, b, spec: NoiseIdealSpec, hermitize: bool = True) -> CostToGo:
    """One backward step ``(M_t, P_t, omega_t) -> (M_{t-1}, P_{t-1}, omega_{t-1})``.

    Args:
        ct: cost-to-go at time ``t``.
        a, b: discrete model matrices.
        spec: noise and ideal-pdf parameters.
        hermitize: replace ``M`` by ``(M + M^H)/2`` on output.

    Raises:
        NumericalError: ``Omega^-1 + B^H Q B`` is singular.
    """
    a, b = _check_dims(a, b, spec)
    q, k, c, gri = _quadratic_pieces(ct, a, b, spec)
    ki = _invert_checked(k)
    ah, bh = a.conj().T, b.conj().T
    qa = q @ a
    aqa = ah @ qa
    bqa = bh @ qa
    m_new = aqa - ah @ q.conj().T @ b @ ki @ bqa + spec.sigma * aqa
    if hermitize:
        m_new = 0.5 * (m_new + m_new.conj().T)
    o_d = spec.o_d.astype(complex)
    p_new = (np.asarray(ct.p) - 2 * o_d.conj() @ gri @ spec.d) @ a + 2 * c.conj() @ ki @ bqa

    g, g_r, omega = spec.g, spec.g_r, spec.omega
    _, logdet_gr = np.linalg.slogdet(g_r)
    _, logdet_g = np.linalg.slogdet(g)
    _, logdet_om = np.linalg.slogdet(omega)
    sign_k, logdet_k = np.linalg.slogdet(k)
    increment = (
        o_d @ gri @ o_d
        + logdet_gr - logdet_g
        - np.trace(g @ (np.linalg.inv(g) - gri))
        + spec.u_r @ np.linalg.inv(omega) @ spec.u_r
        - c.conj() @ ki @ c
        + logdet_om + np.log(sign_k) + logdet_k
    )
    return CostToGo(m_new, p_new, float(ct.omega_const + np.real(increment)), ct.iterations + 1)


def steady_state(a, b, spec: NoiseIdealSpec, tol: float = 1e-10, max_iter: int = 100_000,
                 init: CostToGo | None = None, relative: bool = False) -> CostToGo:
    """Iterate :func:`riccati_step` until ``M`` and ``P`` stop changing.

    The stopping test is ``max|M_{k+1} - M_k| < tol`` and the same for ``P``;
    with ``relative=True`` the tolerance is scaled by ``max(1, max|M|)``.
    ``omega`` keeps accumulating and is not part of the test.

    Raises:
        ConvergenceError: no fixed point within ``max_iter`` steps.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}", field="tol")
    a, b = _check_dims(a, b, spec)
    ct = init if init is not None else CostToGo.zero(spec.n_state)
    residual = np.inf
    for it in range(1, max_iter + 1):
        nxt = riccati_step(ct, a, b, spec)
        dm = np.max(np.abs(nxt.m - ct.m))
        dp = np.max(np.abs(nxt.p - ct.p))
        residual = max(dm, dp)
        scale = max(1.0, np.max(np.abs(nxt.m)), np.max(np.abs(nxt.p))) if relative else 1.0
        ct = nxt
        if dm < tol * scale and dp < tol * scale:
            return CostToGo(ct.m, ct.p, ct.omega_const, it)
        if not np.isfinite(residual):
            break
    raise ConvergenceError(
        f"Riccati recursion did not settle in {max_iter} steps (residual {residual:.3e})",
        residual=residual, iterations=max_iter)


def law_from_gain(k, h, g, x_prev) -> ControlLaw:
    """Gaussian law from ``v = K^-1 (h - g x)`` and ``R = K^-1``."""
    ki = _invert_checked(np.atleast_2d(k))
    v_c = ki @ (np.atleast_1d(h) - np.atleast_2d(g) @ x_prev)
    r = np.real(ki)
    r = 0.5 * (r + r.T)
    return ControlLaw(np.real(v_c), r, float(np.linalg.norm(np.imag(v_c))))


def control_law(ct: CostToGo, a, b, spec: NoiseIdealSpec, x_prev) -> ControlLaw:
    """Mean and covariance of the optimal randomized controller at ``x_prev``."""
    a, b = _check_dims(a, b, spec)
    x_prev = np.asarray(x_prev, dtype=complex)
    q, k, c, _ = _quadratic_pieces(ct, a, b, spec)
    g = b.conj().T @ q @ a
    return law_from_gain(k, c, g, x_prev)


def one_step_exponent(u, x_prev, ct: CostToGo, a, b, spec: NoiseIdealSpec) -> float:
    """Exponent minimized by the controller mean, as a function of real ``u``.

    Expected quadratic cost of the next state under the multiplicative noise
    plus the ideal-controller penalty, dropping ``u``-free constants::

        0.5 E[x_t^H Q x_t] + 0.5 Re[(P - 2 o_d^T G_r^-1 D) E x_t]
        + 0.5 (u - u_r)^T Omega^-1 (u - u_r)
    """
    a, b = _check_dims(a, b, spec)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x_prev = np.asarray(x_prev, dtype=complex)
    gri = np.linalg.inv(spec.g_r)
    q = spec.d.conj().T @ gri @ spec.d + ct.m
    ax = a @ x_prev
    mean_next = ax + b @ u
    quad = np.real(mean_next.conj() @ q @ mean_next) + spec.sigma * np.real(ax.conj() @ q @ ax)
    lin_row = np.asarray(ct.p) - 2 * spec.o_d.astype(complex) @ gri @ spec.d
    lin = np.real(lin_row @ mean_next)
    du = u - spec.u_r
    return float(0.5 * quad + 0.5 * lin + 0.5 * du @ np.linalg.solve(spec.omega, du))


def sample_control(law: ControlLaw, rng: np.random.Generator) -> np.ndarray:
    """Draw ``u ~ N(v, R)``; a zero covariance returns ``v`` exactly."""
    r = np.atleast_2d(law.r)
    if not np.any(r):
        return np.array(law.v, dtype=float)
    lower = _chol(r, "R")
    return law.v + lower @ rng.standard_normal(r.shape[0])


def gaussian_logpdf(x, mean, cov, kind: str = "real_n") -> float:
    """Log density of a real or circularly-symmetric complex Gaussian.

    Args:
        kind: ``"real_n"`` for ``N(mean, cov)`` on R^n or ``"complex_n"`` for
            the complex normal on C^n, whose quadratic form carries no 1/2.
    """
    x = np.atleast_1d(np.asarray(x))
    mean = np.atleast_1d(np.asarray(mean))
    cov = np.atleast_2d(np.asarray(cov))
    n = x.shape[0]
    if mean.shape != (n,) or cov.shape != (n, n):
        raise DimensionError("x, mean and cov have inconsistent sizes")
    lower = _chol(cov, "cov")
    logdet = 2.0 * np.sum(np.log(np.real(np.diag(lower))))
    r = x - mean
    y = np.linalg.solve(lower, r)
    quad = float(np.real(np.vdot(y, y)))
    if kind == "real_n":
        return -0.5 * (n * np.log(2 * np.pi) + logdet + quad)
    if kind == "complex_n":
        return -(n * np.log(np.pi) + logdet + quad)
    raise ValueError(f"unknown kind {kind!r}")


def kld_gaussians(mean0, cov0, mean1, cov1) -> float:
    """KL(N(mean0, cov0) || N(mean1, cov1)) for real Gaussians."""
    mean0, mean1 = np.atleast_1d(mean0).astype(float), np.atleast_1d(mean1).astype(float)
    cov0, cov1 = np.atleast_2d(cov0).astype(float), np.atleast_2d(cov1).astype(float)
    n = mean0.shape[0]
    if mean1.shape != (n,) or cov0.shape != (n, n) or cov1.shape != (n, n):
        raise DimensionError("Gaussian parameters have inconsistent dimensions")
    _chol(cov0, "cov0")
    l1 = _chol(cov1, "cov1")
    _, ld0 = np.linalg.slogdet(cov0)
    _, ld1 = np.linalg.slogdet(cov1)
    diff = np.linalg.solve(l1, mean1 - mean0)
    trace = np.trace(np.linalg.solve(cov1, cov0))
    return float(max(0.0, 0.5 * (trace + diff @ diff - n + ld1 - ld0)))
