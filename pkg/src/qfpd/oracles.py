"""Independent reference computations used to check the main code paths.

Nothing here calls into the production solvers: exponentials are summed as
series, integrals by Simpson's rule, fixed points by plain scalar iteration,
and the optimal controller by brute-force Monte-Carlo minimization of the
one-step Kullback-Leibler divergence.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_discrete_lyapunov


def series_exp(m, terms: int = 50) -> np.ndarray:
    """Truncated Taylor series ``sum_{k < terms} m^k / k!``."""
    m = np.asarray(m, dtype=complex)
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def simpson_integral(a_tilde, dt: float, intervals: int = 10_000) -> np.ndarray:
    """``int_0^dt exp(A s) ds`` by composite Simpson on ``intervals`` panels."""
    if intervals % 2:
        intervals += 1
    a_tilde = np.asarray(a_tilde, dtype=complex)
    h = dt / intervals
    step = series_exp(a_tilde * h)
    node = np.eye(a_tilde.shape[0], dtype=complex)
    acc = node.copy()
    for j in range(1, intervals + 1):
        node = node @ step
        weight = 1 if j == intervals else (4 if j % 2 else 2)
        acc = acc + weight * node
    return acc * h / 3


def scalar_riccati_fixed_point(a, b, d, g_r, omega, sigma=0.0, tol=1e-15, max_iter=1_000_000):
    """Iterate the scalar cost-to-go map ``M -> a^2 Q (1 + sigma) - (a Q b)^2 / (1/omega + b^2 Q)``."""
    m = 0.0
    for _ in range(max_iter):
        q = d * d / g_r + m
        nxt = a * a * q * (1 + sigma) - (a * q * b) ** 2 / (1 / omega + b * b * q)
        if abs(nxt - m) < tol:
            return nxt
        m = nxt
    raise RuntimeError("scalar fixed point did not converge")


def lyapunov_cost(a, c) -> np.ndarray:
    """Solution of ``M = A^H (C + M) A`` (uncontrolled cost-to-go)."""
    a = np.asarray(a, dtype=complex)
    ah = a.conj().T
    return solve_discrete_lyapunov(ah, ah @ c @ a)


def _norm_logpdf(x, mean, var):
    return -0.5 * (np.log(2 * np.pi * var) + (x - mean) ** 2 / var)


class _Moments:
    """Sample moments of fixed standard-normal draws (common random numbers).

    Every term of the one-step KLD integrand is a quadratic polynomial in the
    draws, so its sample mean is an exact function of these moments; this is
    the same Monte-Carlo estimate as averaging the integrand sample by sample.
    """

    def __init__(self, z_u, z_o):
        self.u, self.o = z_u.mean(), z_o.mean()
        self.uu, self.oo, self.uo = (z_u * z_u).mean(), (z_o * z_o).mean(), (z_u * z_o).mean()


def one_step_kld(mu, s, mom: _Moments, a, b, d, x, g, g_r, omega, u_r, o_d) -> float:
    """Monte-Carlo one-step KLD between the closed-loop and ideal joint pdfs.

    Scalar model with a zero terminal cost: the controller ``N(mu, s)`` draws
    ``u = mu + sqrt(s) z_u``, the output is ``o = d (a x + b u) + sqrt(g) z_o``
    and the ideal pdf is ``N(u_r, omega) N(o_d, g_r)``.
    """
    rs, rg = math.sqrt(s), math.sqrt(g)
    # ln N(u; mu, s) - ln N(u; u_r, omega)
    e_u = mu - u_r
    ctrl = (-0.5 * math.log(s / omega) - 0.5 * mom.uu
            + 0.5 * (e_u * e_u + 2 * e_u * rs * mom.u + s * mom.uu) / omega)
    # ln N(o; mean_o, g) - ln N(o; o_d, g_r)
    e_o = d * (a * x + b * mu) - o_d
    k_u = d * b * rs
    sq = (e_o * e_o + k_u * k_u * mom.uu + g * mom.oo + 2 * e_o * k_u * mom.u
          + 2 * e_o * rg * mom.o + 2 * k_u * rg * mom.uo)
    out = -0.5 * math.log(g / g_r) - 0.5 * mom.oo + 0.5 * sq / g_r
    return float(ctrl + out)


def one_step_kld_samples(mu, s, z_u, z_o, a, b, d, x, g, g_r, omega, u_r, o_d) -> float:
    """Same estimate as :func:`one_step_kld`, averaged sample by sample."""
    u = mu + np.sqrt(s) * z_u
    mean_o = d * (a * x + b * u)
    o = mean_o + np.sqrt(g) * z_o
    integrand = (_norm_logpdf(u, mu, s) - _norm_logpdf(u, u_r, omega)
                 + _norm_logpdf(o, mean_o, g) - _norm_logpdf(o, o_d, g_r))
    return float(integrand.mean())


def kld_controller_search(a=1.0, b=1.0, d=1.0, x=0.0, g=0.5, g_r=1.0, omega=1.0, u_r=0.0,
                          o_d=1.0, samples=1_000_000, seed=12345, levels=8, points=41):
    """Grid-search the Gaussian controller minimizing the MC one-step KLD.

    Returns:
        ``(mu, s)`` of the best grid point after ``levels`` refinements.
    """
    rng = np.random.default_rng(seed)
    mom = _Moments(rng.standard_normal(samples), rng.standard_normal(samples))
    mu_lo, mu_hi = -3.0, 3.0
    ls_lo, ls_hi = math.log(1e-2), math.log(1e1)
    best = (0.0, 1.0)
    for _ in range(levels):
        mus = np.linspace(mu_lo, mu_hi, points)
        lss = np.linspace(ls_lo, ls_hi, points)
        vals = np.array([[one_step_kld(m, math.exp(ls), mom, a, b, d, x, g, g_r, omega,
                                       u_r, o_d) for ls in lss] for m in mus])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        best = (float(mus[i]), math.exp(lss[j]))
        dm, dl = mus[1] - mus[0], lss[1] - lss[0]
        mu_lo, mu_hi = mus[i] - dm, mus[i] + dm
        ls_lo, ls_hi = lss[j] - dl, lss[j] + dl
    return best


def kld_monte_carlo(mean0, cov0, mean1, cov1, samples=1_000_000, seed=0):
    """MC estimate of ``KL(N0 || N1)`` and its standard error."""
    rng = np.random.default_rng(seed)
    mean0, mean1 = np.atleast_1d(mean0), np.atleast_1d(mean1)
    cov0, cov1 = np.atleast_2d(cov0), np.atleast_2d(cov1)
    x = rng.multivariate_normal(mean0, cov0, size=samples)

    def logpdf(x, mean, cov):
        diff = x - mean
        sol = np.linalg.solve(cov, diff.T).T
        _, logdet = np.linalg.slogdet(cov)
        return -0.5 * (mean.shape[0] * np.log(2 * np.pi) + logdet + np.sum(diff * sol, axis=1))

    vals = logpdf(x, mean0, cov0) - logpdf(x, mean1, cov1)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))


def finite_difference(f, u0: float, h: float = 1e-6):
    """Central first and second derivatives of a scalar function."""
    f0, fp, fm = f(u0), f(u0 + h), f(u0 - h)
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def complex_gaussian_direct(x, mean, cov) -> float:
    """``ln[ exp(-(x-mu)^H cov^-1 (x-mu)) / (pi^n det cov) ]`` evaluated literally."""
    x, mean, cov = np.asarray(x), np.asarray(mean), np.asarray(cov)
    r = x - mean
    quad = np.real(r.conj() @ np.linalg.inv(cov) @ r)
    det = np.real(np.linalg.det(cov))
    return float(np.log(np.exp(-quad) / (np.pi ** x.shape[0] * det)))
