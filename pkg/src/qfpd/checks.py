"""Compare the production code paths against the reference oracles.

Each check returns ``(name, passed, detail)``; :func:`run_checks` runs them
all and backs the ``oracle`` subcommand.
"""
from __future__ import annotations

import numpy as np

from . import oracles
from .discretize import Discretizer, exp_and_integral, matrix_exp
from .doubling import DoublingSolver
from .ensemble import fidelity, simulate_step
from .fpd import (ControlLaw, CostToGo, NoiseIdealSpec, control_law, gaussian_logpdf,
                  kld_gaussians, riccati_step, sample_control, steady_state)
from .lindblad import build_generators, preset, projector_row, vectorize


def scalar_spec(sigma=0.0, u_r=0.0, omega=1.0, g_r=1.0, o_d=1.0, d=1.0, g=0.5):
    return NoiseIdealSpec(sigma=sigma, g=np.array([[g]]), g_r=np.array([[g_r]]),
                          omega=np.array([[omega]]), u_r=np.array([u_r]),
                          o_d=np.array([o_d]), d=np.array([[d]], dtype=complex))


def check_matrix_exp(seed=0, count=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        m = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        m /= np.abs(m).sum(axis=0).max()
        ref = oracles.series_exp(m)
        worst = max(worst, np.linalg.norm(matrix_exp(m) - ref) / np.linalg.norm(ref))
    return "matrix_exp vs series", worst <= 1e-12, f"max relative error {worst:.2e}"


def check_van_loan():
    gen = build_generators(preset("spin_half", 0.1))
    dt = 2.5e-6
    x0 = np.array([0, 1, 0, 0], dtype=complex)
    b = Discretizer(gen, dt).b_of(x0)
    quad = oracles.simpson_integral(gen.a_tilde, dt) @ (1j * gen.n_tilde) @ x0
    err = np.max(np.abs(b - quad)) / np.max(np.abs(quad))
    return "Van Loan B vs quadrature", err <= 1e-9, f"relative error {err:.2e}"


def check_one_step():
    gen = build_generators(preset("spin_half", 0.1))
    dt = 2.5e-6
    x0 = np.array([0, 1, 0, 0], dtype=complex)
    a, gamma = exp_and_integral(gen.a_tilde, dt)
    x1, _ = simulate_step(x0, a, gamma @ (1j * gen.n_tilde) @ x0, 1.0, 0.0)
    ref = oracles.series_exp(gen.a_tilde * dt) @ x0 + \
        oracles.simpson_integral(gen.a_tilde, dt) @ (1j * gen.n_tilde) @ x0
    err = np.max(np.abs(x1 - ref))
    return "one simulation step vs series", err <= 1e-12, f"max error {err:.2e}"


def check_riccati_scalar():
    spec = scalar_spec(sigma=0.3, omega=1.0)
    ct = riccati_step(CostToGo(np.array([[0.5]]), np.zeros(1)), np.array([[1.0]]),
                      np.array([[1.0]]), spec)
    q = 1.5
    ref = q * 1.3 - q * q / (1 + q)
    err = abs(ct.m[0, 0] - ref)
    return "scalar Riccati step", err <= 1e-14, f"M = {ct.m[0, 0].real:.15g}, expected {ref:.15g}"


def check_steady_scalar():
    spec = scalar_spec(sigma=0.1)
    a, b = 0.9, 0.7
    ct = steady_state(np.array([[a]]), np.array([[b]]), spec, tol=1e-15)
    ref = oracles.scalar_riccati_fixed_point(a, b, 1.0, 1.0, 1.0, sigma=0.1)
    err = abs(ct.m[0, 0] - ref)
    return "scalar steady state", err <= 1e-12, f"error {err:.2e}"


def check_lyapunov(seed=1):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    a *= 0.8 / np.max(np.abs(np.linalg.eigvals(a)))
    d = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
    spec = NoiseIdealSpec(sigma=0.0, g=np.eye(1), g_r=np.eye(1), omega=np.eye(1),
                          u_r=np.zeros(1), o_d=np.zeros(1), d=d)
    ct = steady_state(a, np.zeros((2, 1)), spec, tol=1e-14)
    ref = oracles.lyapunov_cost(a, d.conj().T @ d)
    err = np.max(np.abs(ct.m - ref))
    return "B = 0 steady state vs Lyapunov", err <= 1e-9, f"max error {err:.2e}"


def check_kld_controller():
    spec = scalar_spec()
    one = np.array([[1.0]])
    worst = 0.0
    for x in (0.0, 1.0):
        law = control_law(CostToGo.zero(1), one, one, spec, np.array([x], dtype=complex))
        mu, s = oracles.kld_controller_search(x=x)
        worst = max(worst, abs(law.v[0] - mu), abs(law.r[0, 0] - s))
    return "controller vs MC KLD minimizer", worst <= 1e-2, f"max deviation {worst:.2e}"


def check_sampling(seed=3):
    rng = np.random.default_rng(seed)
    law = ControlLaw(np.array([0.3]), np.array([[0.04]]))
    draws = np.array([sample_control(law, rng)[0] for _ in range(100_000)])
    err = max(abs(draws.mean() - 0.3) / (0.2 / np.sqrt(1e5)),
              abs(draws.var() - 0.04) / (0.04 * np.sqrt(2 / 1e5)))
    return "control sampling moments", err <= 4.0, f"worst z-score {err:.2f}"


def check_complex_logpdf(seed=4):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    cov = z @ z.conj().T + np.eye(3)
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    mean = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    got = gaussian_logpdf(x, mean, cov, kind="complex_n")
    ref = oracles.complex_gaussian_direct(x, mean, cov)
    return "complex normal log-density", abs(got - ref) <= 1e-12, f"error {abs(got - ref):.2e}"


def check_kld(seed=5):
    rng = np.random.default_rng(seed)
    z0, z1 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    c0, c1 = z0 @ z0.T + np.eye(3), z1 @ z1.T + np.eye(3)
    m0, m1 = rng.standard_normal(3), rng.standard_normal(3)
    got = kld_gaussians(m0, c0, m1, c1)
    est, se = oracles.kld_monte_carlo(m0, c0, m1, c1)
    return "Gaussian KLD vs Monte Carlo", abs(got - est) <= 3 * se, \
        f"closed form {got:.5f}, MC {est:.5f} +- {se:.1e}"


def check_fidelity():
    mixed = vectorize(np.eye(3) / 3)
    f = fidelity(mixed, np.zeros(9), projector_row([1, 1, 0])[0])
    return "maximally mixed fidelity", abs(f - 1 / 3) <= 1e-15, f"F = {f:.17g}"


def check_degenerate():
    spec = scalar_spec(u_r=0.7, omega=2.5)
    solver = DoublingSolver(np.array([[0.9]]), spec, use_jit=False, real_form=False)
    law = solver.policy(np.zeros((1, 1)), np.array([1.0]))
    err = max(abs(law.v[0] - 0.7), abs(law.r[0, 0] - 2.5))
    return "B = 0 controller equals ideal", err <= 1e-15, f"error {err:.1e}"


CHECKS = (check_matrix_exp, check_van_loan, check_one_step, check_riccati_scalar,
          check_steady_scalar, check_lyapunov, check_kld_controller, check_sampling,
          check_complex_logpdf, check_kld, check_fidelity, check_degenerate)


def run_checks():
    results = []
    for check in CHECKS:
        name, ok, detail = check()
        results.append((name, bool(ok), detail))
    return results
