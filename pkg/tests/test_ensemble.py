import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfpd.discretize import exp_and_integral
from qfpd.ensemble import (EnsembleReport, check_hermiticity, fidelity, member_stream,
                           run_optimization, run_testing, simulate_step, stream)
from qfpd.errors import ConfigurationError, ConvergenceError, DimensionError
from qfpd.lindblad import (GeneratorPair, build_generators, hermiticity_residual, preset,
                           projector_row, vectorize)
from qfpd.oracles import series_exp

SPIN_X0 = np.array([0, 1, 0, 0], dtype=complex)
SPIN_XD = np.array([1, 0, 0, 0], dtype=complex)


def test_simulate_step_identity():
    x = np.array([0.2, 0.8, 0.1j, -0.1j])
    out, o = simulate_step(x, np.eye(4), np.ones(4), 0.0, 0.0)
    assert np.array_equal(out, x) and o is None


def test_simulate_step_multiplicative_noise(rng):
    a = rng.standard_normal((4, 4))
    x = rng.standard_normal(4) + 0j
    out, _ = simulate_step(x, a, np.ones(4), 0.0, 0.1)
    assert np.allclose(out, 1.1 * a @ x, rtol=1e-15, atol=1e-15)


def test_simulate_step_output():
    x, o = simulate_step(SPIN_XD, np.eye(4), np.zeros(4), 0.0, 0.0, sigma_noise=0.25,
                         d=projector_row([1, 0]), x_e=np.zeros(4))
    assert o[0] == 1.25


def test_spin_free_step_matches_series(spin_gen):
    a, _ = exp_and_integral(spin_gen.a_tilde, 2.5e-6)
    x, _ = simulate_step(SPIN_X0, a, np.zeros(4), 0.0, 0.0)
    ref = series_exp(spin_gen.a_tilde * 2.5e-6) @ SPIN_X0
    assert np.max(np.abs(x - ref)) <= 1e-12


def test_fidelity_values():
    d = projector_row([1, 0])[0]
    assert fidelity(SPIN_XD, np.zeros(4), d) == 1.0
    assert fidelity(SPIN_X0, np.zeros(4), d) == 0.0
    lam = projector_row([1, 1, 0])[0]
    assert abs(fidelity(vectorize(np.eye(3) / 3), np.zeros(9), lam) - 1 / 3) < 1e-15


def test_streams_are_independent_and_reproducible():
    a = stream(3, (0,)).standard_normal(5)
    assert np.array_equal(a, stream(3, (0,)).standard_normal(5))
    assert not np.array_equal(a, member_stream(3, 0).standard_normal(5))
    assert not np.array_equal(member_stream(3, 0).standard_normal(5),
                              member_stream(3, 1).standard_normal(5))


def test_report_statistics():
    rep = EnsembleReport.from_fidelities([0.9, 1.0, 0.95], seed=4)
    assert rep.n_members == 3 and rep.min == 0.9 and rep.max == 1.0
    assert rep.mean == pytest.approx(0.95)


def short_run(spin_gen, spec, **kw):
    args = dict(horizon=200, rng_seed=1, stop_fidelity=0.99, dwell=10)
    args.update(kw)
    return run_optimization(spin_gen, spec, SPIN_X0, None, 2.5e-6, **args)


def test_optimization_shapes(spin_gen, spin_spec):
    traj, controls = short_run(spin_gen, spin_spec)
    assert traj.states.shape[0] == traj.steps + 1 == traj.outputs.shape[0]
    assert controls.shape == (traj.steps, 1)
    assert np.all(traj.raw_fidelities >= -1e-9) and np.all(traj.raw_fidelities <= 1 + 1e-9)
    assert check_hermiticity(traj) < 1e-12


def test_vacuous_stop_rule(spin_gen, spin_spec):
    traj, _ = short_run(spin_gen, spin_spec, stop_fidelity=0.0, dwell=5)
    assert traj.stopped_early and traj.steps == 4


def test_optimization_deterministic(spin_gen, spin_spec):
    t1, c1 = short_run(spin_gen, spin_spec)
    t2, c2 = short_run(spin_gen, spin_spec)
    assert np.array_equal(c1, c2) and np.array_equal(t1.states, t2.states)


def test_sampled_controls_differ(spin_gen, spin_spec):
    _, mean_ctrl = short_run(spin_gen, spin_spec, horizon=20)
    _, sampled = short_run(spin_gen, spin_spec, horizon=20, sample=True)
    assert not np.array_equal(mean_ctrl, sampled)


def test_optimization_argument_errors(spin_gen, spin_spec):
    with pytest.raises(ConfigurationError):
        short_run(spin_gen, spin_spec, horizon=0)
    with pytest.raises(ConfigurationError):
        short_run(spin_gen, spin_spec, dwell=0)
    with pytest.raises(DimensionError):
        run_optimization(spin_gen, spin_spec, np.zeros(9), None, 2.5e-6, 10, 0)


def test_noise_free_ensemble_is_identical(spin_gen, spin_spec):
    spec = spin_spec.replace(sigma=0.0)
    _, controls = short_run(spin_gen, spec, horizon=50)
    rep = run_testing(spin_gen, spec, controls, SPIN_X0, None, 2.5e-6, 8, 3)
    assert np.all(rep.final_fidelities == rep.final_fidelities[0])


def test_ensemble_matches_direct_replay(spin_gen, spin_spec):
    spec = spin_spec.replace(sigma=1e-8)
    _, controls = short_run(spin_gen, spec, horizon=30)
    rep, finals = run_testing(spin_gen, spec, controls, SPIN_X0, None, 2.5e-6, 3, 9,
                              return_states=True)
    a, gamma = exp_and_integral(spin_gen.a_tilde, 2.5e-6)
    w = gamma @ (1j * spin_gen.n_tilde)
    for k in range(3):
        g = member_stream(9, k)
        zetas = np.sqrt(1e-8) * g.standard_normal(4096)[:controls.shape[0]]
        x = SPIN_X0.copy()
        for u, z in zip(controls[:, 0], zetas):
            x, _ = simulate_step(x, a, w @ x, u, z)
        assert np.allclose(finals[k], x, atol=1e-13)


def test_ensemble_deterministic(spin_gen, spin_spec):
    _, controls = short_run(spin_gen, spin_spec, horizon=30)
    r1 = run_testing(spin_gen, spin_spec, controls, SPIN_X0, None, 2.5e-6, 16, 2)
    r2 = run_testing(spin_gen, spin_spec, controls, SPIN_X0, None, 2.5e-6, 16, 2)
    assert np.array_equal(r1.final_fidelities, r2.final_fidelities)


def test_ensemble_argument_errors(spin_gen, spin_spec):
    with pytest.raises(ConfigurationError):
        run_testing(spin_gen, spin_spec, np.ones(3), SPIN_X0, None, 2.5e-6, 0, 1)
    with pytest.raises(DimensionError):
        run_testing(spin_gen, spin_spec, np.ones((3, 2)), SPIN_X0, None, 2.5e-6, 2, 1)


def test_large_sigma_reports_convergence_failure(spin_gen, spin_spec):
    with pytest.raises(ConvergenceError) as info:
        short_run(spin_gen, spin_spec.replace(sigma=1e-4), horizon=5)
    assert info.value.step is not None


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), u=st.floats(-50, 50))
def test_free_and_driven_steps_conserve_trace(seed, u):
    rng = np.random.default_rng(seed)
    gen: GeneratorPair = build_generators(preset("lambda_type", 0.9))
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = z @ z.conj().T
    x = vectorize(rho / np.trace(rho))
    a, gamma = exp_and_integral(gen.a_tilde, 1e-3)
    out, _ = simulate_step(x, a, gamma @ (1j * gen.n_tilde) @ x, u, 0.0)
    assert abs(out[:3].sum() - 1) < 1e-12
    assert hermiticity_residual(out) < 1e-12


def test_noise_free_run_keeps_trace(spin_gen, spin_spec):
    traj, _ = short_run(spin_gen, spin_spec.replace(sigma=0.0), horizon=500, stop_fidelity=1.1)
    assert np.max(np.abs(traj.trace_drift)) <= 1e-8
    assert check_hermiticity(traj) <= 1e-8


def test_mean_fidelity_does_not_increase_with_noise(spin_gen, spin_spec):
    _, controls = short_run(spin_gen, spin_spec, horizon=3000, stop_fidelity=1.1)
    reports = [run_testing(spin_gen, spin_spec.replace(sigma=s), controls, SPIN_X0, None,
                           2.5e-6, 1000, 4) for s in (0.0, 1e-4, 1e-2)]
    for lo, hi in zip(reports[1:], reports[:-1]):
        se = np.hypot(lo.final_fidelities.std(), hi.final_fidelities.std()) / np.sqrt(1000)
        assert lo.mean <= hi.mean + 3 * se
