import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfpd.discretize import Discretizer, discretize, exp_and_integral, matrix_exp
from qfpd.errors import ConfigurationError, DimensionError
from qfpd.lindblad import GeneratorPair, vectorize
from qfpd.oracles import series_exp, simpson_integral

SPIN_X0 = np.array([0, 1, 0, 0], dtype=complex)


def test_exp_of_zero_is_identity():
    assert np.array_equal(matrix_exp(np.zeros((4, 4))), np.eye(4))


def test_exp_of_diagonal():
    out = matrix_exp(np.diag([0.3, -1.2 + 0.5j]))
    assert np.allclose(out, np.diag(np.exp([0.3, -1.2 + 0.5j])), rtol=1e-15, atol=0)


def test_matrix_exp_matches_series_on_random_matrices(rng):
    for _ in range(20):
        m = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        m /= np.abs(m).sum(axis=0).max()
        ref = series_exp(m)
        assert np.linalg.norm(matrix_exp(m) - ref) / np.linalg.norm(ref) <= 1e-12


def test_matrix_exp_input_errors():
    with pytest.raises(DimensionError):
        matrix_exp(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        matrix_exp(np.array([[np.nan]]))


def test_nonpositive_dt_rejected():
    with pytest.raises(ConfigurationError):
        exp_and_integral(np.zeros((2, 2)), 0.0)


def test_zero_generator_gives_linear_integral(rng):
    n_tilde = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    gen = GeneratorPair(np.zeros((4, 4), dtype=complex), n_tilde, np.zeros((2, 2)))
    x = rng.standard_normal(4) + 0j
    x_e = rng.standard_normal(4) + 0j
    model = discretize(gen, x, x_e, 0.01)
    assert np.array_equal(model.a, np.eye(4))
    assert np.allclose(model.b, 0.01 * 1j * n_tilde @ (x + x_e), rtol=1e-14, atol=1e-16)


def test_spin_b_matches_quadrature(spin_gen):
    dt = 2.5e-6
    b = discretize(spin_gen, SPIN_X0, np.zeros(4), dt).b
    ref = simpson_integral(spin_gen.a_tilde, dt) @ (1j * spin_gen.n_tilde) @ SPIN_X0
    assert np.max(np.abs(b - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_lambda_b_matches_quadrature(lambda_gen):
    dt = 1e-10
    x0 = np.zeros(9, dtype=complex)
    x0[2] = 1
    b = discretize(lambda_gen, x0, np.zeros(9), dt).b
    ref = simpson_integral(lambda_gen.a_tilde, dt, intervals=2000) @ (1j * lambda_gen.n_tilde) @ x0
    assert np.max(np.abs(b - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_tiny_step_is_near_identity(lambda_gen):
    a, _ = exp_and_integral(lambda_gen.a_tilde, 1e-12)
    assert np.linalg.norm(a - np.eye(9)) <= 1e-10 * np.linalg.norm(lambda_gen.a_tilde)


def test_small_step_orders(spin_gen):
    errs, norms = [], []
    for dt in (1e-2, 1e-3):
        a, gamma = exp_and_integral(spin_gen.a_tilde, dt)
        errs.append(np.linalg.norm(a - np.eye(4) - spin_gen.a_tilde * dt))
        norms.append(np.linalg.norm(gamma @ (1j * spin_gen.n_tilde) @ SPIN_X0))
    # second order remainder, first order B
    assert 80 < errs[0] / errs[1] < 120
    assert 9 < norms[0] / norms[1] < 11


def test_discretizer_shift(spin_gen):
    x_e = np.array([0.5, 0.5, 0, 0], dtype=complex)
    disc = Discretizer(spin_gen, 1e-3, x_e)
    x = np.array([0.1, -0.1, 0.2j, -0.2j])
    direct = discretize(spin_gen, x, x_e, 1e-3).b
    assert np.allclose(disc.b_of(x), direct, rtol=1e-14, atol=1e-18)
    with pytest.raises(DimensionError):
        Discretizer(spin_gen, 1e-3, np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dt=st.floats(1e-4, 1.0))
def test_semigroup_property(seed, dt):
    rng = np.random.default_rng(seed)
    m = 0.5 * (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    a1, g1 = exp_and_integral(m, dt)
    a2, g2 = exp_and_integral(m, 2 * dt)
    assert np.allclose(a1 @ a1, a2, rtol=1e-11, atol=1e-12)
    # int_0^{2dt} = int_0^dt + e^{m dt} int_0^dt
    assert np.allclose(g1 + a1 @ g1, g2, rtol=1e-11, atol=1e-12)


def test_integral_matches_quadrature_on_random_stable_generators(rng):
    for _ in range(3):
        m = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        m -= (np.max(np.linalg.eigvals(m).real) + 0.1) * np.eye(9)
        _, gamma = exp_and_integral(m, 0.5)
        ref = simpson_integral(m, 0.5)
        assert np.max(np.abs(gamma - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_free_step_conserves_population_sum(lambda_gen, rng):
    a, _ = exp_and_integral(lambda_gen.a_tilde, 0.05)
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = z @ z.conj().T
    x = vectorize(rho / np.trace(rho))
    assert abs((a @ x)[:3].sum() - x[:3].sum()) <= 1e-10
