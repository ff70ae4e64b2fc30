"""Fast steady-state controller via structure-preserving doubling.

The cost-to-go recursion with a constant target is a discrete Riccati
recursion for the augmented state ``z = [x; 1]`` once the control is shifted
to ``u = u_r + du``::

    z_t = Abar z_{t-1} + Bbar du,   Abar = [[A, B u_r], [0, 1]],  Bbar = [B; 0]
    stage cost  z^H Cbar z + du^H Omega^-1 du

with ``Cbar`` holding ``D^H G_r^-1 D``, ``-D^H G_r^-1 o_d`` and the constant.
``X = Cbar + [[M, P^H/2], [P/2, *]]`` then obeys the plain Riccati map, and
the doubling iteration

    W = (I + G H)^-1
    A <- A W A,  G <- G + A W G A^H,  H <- H + A^H H W A

returns in ``H`` the result of ``2^k - 1`` literal recursion steps after ``k``
doublings.  Lindblad generators have undamped directions (the trace, and
any level the field cannot reach) in which ``M`` and ``P`` grow without
bound, but the controller only sees ``B^H X``, which annihilates them.  The
iteration is therefore stopped once the control law at the current state
has settled rather than once ``M`` has.

Hermiticity-preserving models are real in the basis of
:func:`qfpd.lindblad.real_basis`; the solver switches to real arithmetic there,
which leaves the control law unchanged and roughly halves the cost.

The multiplicative-noise term ``Sigma A^H Q A`` is handled by an outer
fixed-point loop that adds it to the stage cost and solves again.  The loop
is warm-started from the previous call, so along a trajectory a fixed number
of passes per step (``noise_passes``) tracks the fixed point cheaply; by
default every call iterates until the control settles.
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DimensionError, NumericalError
from .fpd import ControlLaw, NoiseIdealSpec
from .lindblad import dim_from_length, real_basis

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _doubling(a, b, u_r, om, om_inv, c_bar, noise, c_base, x, tol, kmax):
    n = a.shape[0]
    p = b.shape[1]
    m = n + 1
    ak = np.zeros((m, m), dtype=a.dtype)
    ak[:n, :n] = a
    ak[:n, n:] = b @ u_r.reshape((p, 1))
    ak[n, n] = 1.0
    b_bar = np.zeros((m, p), dtype=a.dtype)
    b_bar[:n, :] = b
    gk = b_bar @ om @ np.ascontiguousarray(b_bar.conj().T)
    hk = c_bar.copy()
    hk[:n, :n] += noise
    eye = np.eye(m).astype(a.dtype)
    bh = np.ascontiguousarray(b.conj().T)
    xc = np.ascontiguousarray(x.reshape((n, 1)))
    c_lin = np.ascontiguousarray(c_bar[:n, n:])
    s_prev = np.zeros((p, p), dtype=a.dtype)
    v_prev = np.zeros((p, 1), dtype=a.dtype)
    calm = 0
    for k in range(kmax):
        q = np.ascontiguousarray(hk[:n, :n])
        bq = bh @ q
        s = bq @ b
        kk = om_inv + s
        g = bq @ a
        h = c_base - bh @ (np.ascontiguousarray(hk[:n, n:]) - c_lin)
        v = np.linalg.solve(kk, h - g @ xc)
        if k > 0:
            # compare against the field-dependent parts only, so that short
            # horizons (where v is still pinned at u_r) do not look settled
            dv = np.abs(v - v_prev).max()
            ds = np.abs(s - s_prev).max()
            pull = np.abs(v[:, 0] - u_r).max()
            if (ds <= tol * np.abs(s).max()
                    and dv <= tol * pull + 1e-14 * (1.0 + np.abs(v).max())):
                calm += 1
            else:
                calm = 0
            if calm >= 2:
                return v[:, 0], kk, q, k
        s_prev = s
        v_prev = v
        wi = np.linalg.inv(eye + gk @ hk)
        aw = ak @ wi
        akh = np.ascontiguousarray(ak.conj().T)
        gk = gk + aw @ gk @ akh
        hk = hk + akh @ hk @ wi @ ak
        ak = aw @ ak
        gk = 0.5 * (gk + gk.conj().T)
        hk = 0.5 * (hk + hk.conj().T)
    return v[:, 0], kk, np.ascontiguousarray(hk[:n, :n]), -1


if numba is not None:
    _doubling_kernel = numba.njit(cache=True)(_doubling)
else:  # pragma: no cover
    _doubling_kernel = _doubling


class DoublingSolver:
    """Steady-state controller for a fixed ``A`` and varying ``B(x)``.

    Args:
        a: discrete state matrix.
        spec: noise and ideal-pdf parameters.
        tol: relative tolerance on the control mean and gain between doublings.
        max_doublings: budget; ``2^k`` recursion steps are covered after ``k``.
        max_outer: budget for the multiplicative-noise fixed point.
        noise_passes: fixed number of noise fixed-point passes per call once a
            warm start exists; ``None`` iterates to convergence every call.
        use_jit: compile the inner loop with numba when available.
        real_form: solve in the real Hermitian basis when the model allows it.
    """

    def __init__(self, a, spec: NoiseIdealSpec, tol: float = 1e-9, max_doublings: int = 64,
                 max_outer: int = 50, noise_passes: int | None = None, use_jit: bool = True,
                 real_form: bool = True):
        a = np.asarray(a, dtype=complex)
        self.spec = spec
        self.tol = float(tol)
        self.max_doublings = int(max_doublings)
        self.max_outer = int(max_outer)
        if noise_passes is not None and noise_passes < 1:
            raise ValueError("noise_passes must be >= 1 or None")
        self.noise_passes = noise_passes
        self._warm = False
        self._kernel = _doubling_kernel if use_jit else _doubling
        n = a.shape[0]
        d = spec.d
        self.basis = None
        if real_form:
            try:
                t = real_basis(dim_from_length(n))
            except DimensionError:
                t = None
            if t is not None:
                a_r = t.conj().T @ a @ t
                d_r = d @ t
                scale = 1e-12 * max(1.0, np.abs(a).max(), np.abs(d).max())
                if np.abs(a_r.imag).max() <= scale and np.abs(d_r.imag).max() <= scale:
                    self.basis = t
                    a, d = a_r.real, d_r.real
        dtype = complex if self.basis is None else float
        self.a = np.ascontiguousarray(a.astype(dtype))
        gri = np.linalg.inv(spec.g_r)
        o_d = spec.o_d.astype(dtype)
        c_bar = np.zeros((n + 1, n + 1), dtype=dtype)
        c_bar[:n, :n] = d.conj().T @ gri @ d
        c_bar[:n, n] = -d.conj().T @ gri @ o_d
        c_bar[n, :n] = c_bar[:n, n].conj()
        c_bar[n, n] = np.real(o_d.conj() @ gri @ o_d)
        self.c_bar = c_bar
        self.om_inv = np.ascontiguousarray(np.linalg.inv(spec.omega).astype(dtype))
        self._om_u_r = self.om_inv @ spec.u_r.astype(dtype)
        self._dh_gri_od = d.conj().T @ gri @ o_d
        self._u_r = spec.u_r.astype(dtype)
        self._om = np.ascontiguousarray(spec.omega.astype(dtype))
        self._noise = np.zeros((n, n), dtype=dtype)
        self._dtype = dtype
        self.last_doublings = 0
        self.last_outer = 0

    @property
    def real(self) -> bool:
        return self.basis is not None

    def reset(self):
        """Forget the warm start of the multiplicative-noise fixed point."""
        self._noise = np.zeros_like(self._noise)
        self._warm = False

    def _to_solver(self, v):
        if self.basis is None:
            return np.ascontiguousarray(v)
        return np.ascontiguousarray(np.real(self.basis.conj().T @ v))

    def _solve_once(self, b, x, noise):
        c_base = (self._om_u_r + b.conj().T @ self._dh_gri_od).reshape(-1, 1)
        v, kk, q, k = self._kernel(self.a, b, self._u_r, self._om, self.om_inv, self.c_bar,
                                   noise, c_base, x, self.tol, self.max_doublings)
        if k < 0:
            raise ConvergenceError(
                f"doubling did not settle in {self.max_doublings} doublings",
                iterations=self.max_doublings)
        return v, kk, q, k

    def solve(self, b, x_prev):
        """Return ``(v, K)``: the control mean and the inverse controller
        covariance ``Omega^-1 + B^H Q B`` at ``x_prev``."""
        b = np.asarray(b, dtype=complex)
        if b.ndim == 1:
            b = b[:, None]
        b = self._to_solver(b)
        x = self._to_solver(np.asarray(x_prev, dtype=complex))
        sigma = self.spec.sigma
        if sigma == 0:
            v, kk, _, k = self._solve_once(b, x, self._noise)
            self.last_doublings, self.last_outer = k, 1
            return v, kk
        at = self.a.conj().T
        v_prev = None
        total = 0
        fixed = self.noise_passes if self._warm else None
        for it in range(1, self.max_outer + 1):
            v, kk, q, k = self._solve_once(b, x, self._noise)
            total += k
            self._noise = sigma * (at @ q @ self.a)
            if fixed is not None and it >= fixed:
                self.last_doublings, self.last_outer = total, it
                return v, kk
            if v_prev is not None:
                dv = np.max(np.abs(v - v_prev))
                pull = np.max(np.abs(v - self._u_r))
                if dv <= self.tol * pull + 1e-14 * (1 + np.max(np.abs(v))):
                    self._warm = True
                    self.last_doublings, self.last_outer = total, it
                    return v, kk
            v_prev = v
        raise ConvergenceError(
            f"noise fixed point did not settle in {self.max_outer} passes "
            f"(sigma = {sigma:g}; undamped directions amplify by (1 + sigma) per step, "
            "so large sigma leaves no usable steady state)",
            iterations=self.max_outer)

    def policy(self, b, x_prev) -> ControlLaw:
        """Optimal Gaussian controller for the model ``(A, b)`` at ``x_prev``."""
        v, kk = self.solve(b, x_prev)
        if not np.all(np.isfinite(kk)) or np.any(np.real(np.diag(kk)) <= 0):
            raise NumericalError("Omega^-1 + B^H Q B is not positive definite")
        r = np.real(np.linalg.inv(kk))
        return ControlLaw(np.real(v), 0.5 * (r + r.T), float(np.linalg.norm(np.imag(v))))
