from dataclasses import replace

import numpy as np
import pytest

from headerr import (
    ConvergenceError,
    EliminationError,
    FieldConfig,
    MeanFields,
    PumpConfig,
    RateConfig,
    SimulationConfig,
    build_effective,
    get_species,
    projectors,
    solve_steady_state,
    spin_operators,
    steady_state,
)

from .strategies import (
    DEFAULT_RATES,
    assert_close,
    assert_close_array,
    default_config,
    toy_config,
)


@pytest.mark.reduction
def test_projectors_partition():
    config = toy_config()
    basis = build_effective(config).basis
    proj = projectors(basis)
    d, n = basis.dim, basis.ground_dim
    assert_close_array(proj.P + proj.Q, np.eye(d * d))
    assert len(proj.p_index) == n * n
    assert len(proj.q_index) == d * d - n * n


@pytest.mark.parametrize("theta", [0.0, 0.7])
@pytest.mark.reduction
def test_effective_generator_preserves_trace(theta):
    eff = build_effective(default_config().with_theta(theta), MeanFields(0.3))
    assert eff.superop.sector == "ground"
    assert eff.superop.trace_residual() < 1e-8
    assert eff.pumping.trace_residual() < 1e-8


@pytest.mark.reduction
def test_ls_toggle():
    config = toy_config(theta=0.4)
    eff = build_effective(config)
    without = eff.with_ls(False)
    scale = np.max(np.abs(eff.matrix))
    assert_close_array(
        eff.matrix - without.matrix, eff.light_shift.matrix, abs_tol=1e-14 * scale
    )
    assert np.all(np.real(eff.light_shift.matrix) == 0)


@pytest.mark.reduction
def test_singular_elimination():
    "With no excited-state decay the eliminated block is singular."
    species = get_species("Rb87", twice_I=1)
    config = SimulationConfig(
        species,
        FieldConfig(B0=55e-6),
        PumpConfig(rabi=0.0),
        RateConfig(gamma_mix=0.0, gamma_Q=0.0, gamma_SD=100.0, gamma_SE=0.0),
    )
    with pytest.raises(EliminationError):
        build_effective(config)


@pytest.mark.reduction
def test_steady_state_is_a_state():
    state = solve_steady_state(default_config())
    assert state.converged
    assert_close(state.populations.sum(), 1.0, rel=1e-12)
    assert np.all(state.populations >= 0)
    assert_close(np.trace(state.rho), 1.0, rel=1e-12)
    assert state.polarization > 0
    assert state.manifold_population("a") > state.manifold_population("b")


@pytest.mark.reduction
def test_steady_state_fixed_point():
    "One more iteration moves no population by more than ten times the tolerance."
    config = default_config()
    eff = build_effective(config)
    state = solve_steady_state(config, eff)
    again = steady_state(eff, config.rates, config.numerics, state.meanfields)
    tol = 10 * config.numerics.tolerance
    assert np.max(np.abs(again.populations - state.populations)) < tol


@pytest.mark.reduction
def test_helicity_mirrors_polarization():
    config = default_config()
    plus = solve_steady_state(config.with_helicity(1))
    minus = solve_steady_state(config.with_helicity(-1))
    assert_close(minus.meanfields.s_z, -plus.meanfields.s_z, rel=1e-6)
    assert_close(minus.polarization, -plus.polarization, rel=1e-6)


@pytest.mark.reduction
def test_light_shift_neutral_at_zero_tilt():
    config = default_config()
    on = solve_steady_state(config)
    off = solve_steady_state(config.with_toggles(ls=False))
    assert np.max(np.abs(on.populations - off.populations)) < 1e-6


@pytest.mark.reduction
def test_full_and_diagonal_methods_agree_without_tilt():
    config = default_config()
    diagonal = solve_steady_state(config)
    full = solve_steady_state(config.with_numerics(steady_state="full"))
    assert full.method == "full"
    assert np.max(np.abs(full.populations - diagonal.populations)) < 1e-8
    assert_close_array(full.rho, full.rho.conj().T)


@pytest.mark.reduction
def test_no_spin_exchange_skips_iteration():
    rates = RateConfig(gamma_mix=5.86e10, gamma_Q=2.02e9, gamma_SD=101.9, gamma_SE=0.0)
    state = solve_steady_state(toy_config(rates=rates))
    assert state.iterations == 1
    assert state.converged


@pytest.mark.reduction
def test_meanfields_follow_the_returned_state():
    "Reported mean fields are Tr(S_z rho) of the returned state, never the seed."
    for gamma_SE in (0.0, 990.0):
        config = replace(default_config(), rates=replace(DEFAULT_RATES, gamma_SE=gamma_SE))
        state = solve_steady_state(config)
        s_z = spin_operators(state.basis).ground("S_z")
        assert_close(state.meanfields.s_z, np.real(np.trace(s_z @ state.rho)), rel=1e-12)
        assert_close(state.meanfields.s_z, np.real(state.expectation(s_z)), rel=1e-12)


@pytest.mark.reduction
def test_damping_does_not_change_the_fixed_point():
    config = default_config()
    slow = solve_steady_state(config.with_numerics(damping=0.3))
    fast = solve_steady_state(config.with_numerics(damping=0.7))
    assert np.max(np.abs(slow.populations - fast.populations)) < 1e-8
    assert_close(slow.meanfields.s_z, fast.meanfields.s_z, rel=1e-7)


@pytest.mark.reduction
def test_iteration_cap():
    config = default_config().with_numerics(max_iterations=1, tolerance=1e-15)
    with pytest.raises(ConvergenceError) as info:
        solve_steady_state(config)
    assert info.value.state is not None
    assert not info.value.state.converged


@pytest.mark.reduction
def test_aitken_reaches_same_state():
    config = default_config()
    plain = solve_steady_state(config)
    fast = solve_steady_state(config.with_numerics(aitken=True))
    assert np.max(np.abs(plain.populations - fast.populations)) < 1e-8


@pytest.mark.reduction
def test_spin_temperature_limit():
    "Fast spin exchange with weak pumping gives populations close to exp(beta F_z)."
    base = default_config()
    rates = replace(base.rates, gamma_SE=1e5)
    config = replace(base, rates=rates, pump=replace(base.pump, rabi=0.25 * base.pump.rabi))
    state = solve_steady_state(config)
    s_z = state.meanfields.s_z
    beta = np.log((1 + 2 * s_z) / (1 - 2 * s_z))
    m = state.basis.twice_m("S") / 2.0
    weights = np.exp(beta * m)
    expected = weights / weights.sum()
    assert np.max(np.abs(state.populations - expected) / expected) < 0.1
