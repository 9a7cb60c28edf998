import numpy as np
import pytest

from headerr import (
    PrecisionError,
    TimeTrace,
    curated_configs,
    demodulate,
    exact_zeeman_spectrum,
    find_precession_frequency,
    get_species,
    integrate_full,
    oracle_zero_crossing,
    solve_steady_state,
)
from headerr.units import TWO_PI
from headerr.validation import Checks, cubic_spacing_coefficient

from .strategies import assert_close, default_config


def sampled(periods, omega, samples_per_period=32, a=0.3, b=-0.7):
    period = TWO_PI / omega
    times = 1e-3 + np.arange(periods * samples_per_period) * (period / samples_per_period)
    wave = a * np.cos(omega * times) + b * np.sin(omega * times)
    return TimeTrace(times=times, s_x=wave, probe=2 * wave)


@pytest.mark.oracle
def test_demodulate_recovers_quadratures():
    omega = TWO_PI * 1e4
    out = demodulate(sampled(25, omega), omega, ("s_x", "probe", "s_y"))
    assert set(out) == {"s_x", "probe"}
    assert_close(out["s_x"][0], 0.3, rel=1e-9, abs_tol=1e-9)
    assert_close(out["s_x"][1], -0.7, rel=1e-9, abs_tol=1e-9)
    assert_close(out["probe"][1], -1.4, rel=1e-9, abs_tol=1e-9)


@pytest.mark.oracle
def test_demodulate_needs_whole_periods():
    omega = TWO_PI * 1e4
    with pytest.raises(PrecisionError):
        demodulate(sampled(10, omega), omega)


@pytest.mark.oracle
def test_exact_spectrum_low_field():
    "At low field the exact levels approach the second-order expansion."
    species = get_species("Rb85")
    spectrum = exact_zeeman_spectrum(species, 1e-6, steps=8)
    assert len(spectrum.labels) == species.manifold_dim
    spacing = spectrum.spacings("a")
    larmor = species.mu_eff * 1e-6
    assert np.all(np.abs(spacing - larmor) < 0.01 * larmor)
    assert_close(spectrum.energy("a", 3) - spectrum.energy("a", 2), spacing[-1])


@pytest.mark.oracle
def test_breit_rabi_residual_is_cubic():
    "The residual is the third-order Breit-Rabi term: 20 (mu_eff B)^3 / Delta_S^2 for 85Rb."
    result = Checks.breit_rabi(default_config())
    assert result.passed, result
    assert_close(result.value, 20.0, rel=0.02)


@pytest.mark.parametrize("twice_I, expected", [(3, 6.0), (5, 20.0), (7, 42.0)])
@pytest.mark.oracle
def test_cubic_spacing_coefficient(twice_I, expected):
    assert_close(cubic_spacing_coefficient(twice_I), expected, rel=1e-12)


@pytest.mark.oracle
def test_curated_configs():
    "Oracle points keep the true field and rates and only weaken the pump."
    base = default_config()
    configs = curated_configs()
    assert len(configs) == 3
    assert {c.pump.helicity for c in configs} == {1, -1}
    for config in configs:
        assert config.numerics.zeeman_mode == "exact"
        assert config.species == base.species
        assert config.field.B0 == base.field.B0
        assert config.rates == base.rates
        assert 0 < config.pump.rabi < base.pump.rabi
        assert 0 < config.field.B1 < 1e-5 * base.field.B0


@pytest.mark.slow
@pytest.mark.oracle
def test_undriven_trace_matches_steady_state():
    config = curated_configs()[0]
    trace = integrate_full(config, duration=2e-4, settle=2e-4, samples=8)
    assert trace.trace_error < 1e-6
    assert trace.min_eigenvalue > -1e-8
    n = config.species.manifold_dim
    full = np.real(np.diag(trace.final_state))[:n]
    expected = solve_steady_state(config).populations
    assert np.max(np.abs(full - expected) / expected) < 0.01


@pytest.mark.slow
@pytest.mark.oracle
@pytest.mark.parametrize("index", [0, 1, 2])
def test_oracle_zero_crossing(index):
    config = curated_configs()[index]
    effective = find_precession_frequency(config, "parallel")
    full = oracle_zero_crossing(config, geometry="parallel")
    threshold = max(0.5, 0.05 * abs(effective.shift))
    assert abs(full - effective.omega0) / TWO_PI < threshold
