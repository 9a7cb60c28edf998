from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import floats

import headerr.analysis as analysis
from headerr import (
    ConfigError,
    ExtractionError,
    GridError,
    HeadingCurve,
    PairingError,
    PolarizationError,
    asymmetry_metric,
    auxiliary_field_curve,
    build_response,
    check_grid,
    check_partner,
    derived_frequencies,
    dual_helicity_average,
    effect_decomposition,
    effect_toggles,
    find_precession_frequency,
    flattening_angle,
    get_species,
    heading_error_curve,
    manifold_signals,
    orthogonal_probe_diagnostic,
    parallel_map,
    required_angle_uncertainty,
    spin_temperature_frequency,
    spin_temperature_polarization,
)
from headerr.config import EffectToggles
from headerr.validation import Checks

from .strategies import assert_close, assert_close_array, default_config, toy_config


def curve(omega0, thetas_deg=(0.0, 20.0, 40.0), helicity="+"):
    omega0 = np.asarray(omega0, dtype=float)
    return HeadingCurve(
        thetas=np.radians(thetas_deg),
        omega0=omega0,
        reference=float(omega0[0]),
        fingerprint="f",
        geometry="parallel",
        helicity=helicity,
    )


@pytest.mark.analysis
def test_check_grid():
    assert_close_array(check_grid([0.0, 0.1]), [0.0, 0.1])
    for bad in ([], [0.2, 0.1], [0.0, 0.0], [0.0, 2.0], [[0.0, 0.1]]):
        with pytest.raises(GridError):
            check_grid(bad)


@pytest.mark.analysis
def test_heading_curve_lookup():
    c = curve([100.0, 101.0, 103.0])
    assert_close_array(c.heading_error, [0.0, 1.0, 3.0])
    assert c.at(np.radians(20.0)) == 101.0
    with pytest.raises(GridError):
        c.at(np.radians(10.0))
    rows = c.rows()
    assert len(rows) == 3
    assert_close(rows[2]["theta_deg"], 40.0)
    assert rows[2]["heading_error_hz"] == 3.0


@pytest.mark.analysis
def test_asymmetry_metric():
    "Mirror-symmetric heading errors give zero."
    t1, t2 = np.radians(40.0), np.radians(20.0)
    plus = curve([100.0, 101.0, 103.0])
    minus = curve([110.0, 109.0, 107.0], helicity="-")
    assert_close(asymmetry_metric(plus, minus, t1, t2), 0.0, abs_tol=1e-12)
    skewed = curve([110.0, 109.0, 106.0], helicity="-")
    assert_close(asymmetry_metric(plus, skewed, t1, t2), -1.0)
    with pytest.raises(GridError):
        asymmetry_metric(plus, minus, np.radians(30.0), t2)


@pytest.mark.analysis
def test_effect_toggles():
    assert effect_toggles("total") == dict(nlz=True, nuz=True, ls=True)
    assert effect_toggles("nuz") == dict(nlz=False, nuz=True, ls=False)
    with pytest.raises(ConfigError):
        effect_toggles("zeeman")


@pytest.mark.analysis
def test_decomposition_needs_perturbative_mode():
    with pytest.raises(ConfigError):
        effect_decomposition(toy_config(zeeman_mode="exact"))


@pytest.mark.analysis
def test_partner_check():
    config = default_config()
    check_partner(config, replace(config.with_helicity(-1), geometry="perpendicular"))
    other = replace(config, field=replace(config.field, B0=50e-6))
    with pytest.raises(PairingError):
        check_partner(config, other)
    with pytest.raises(PairingError):
        dual_helicity_average(config, [0.0], partner=other)
    with pytest.raises(PairingError):
        dual_helicity_average(config, [0.0], pairing="crossed")


@pytest.mark.analysis
def test_parallel_map_serial():
    assert parallel_map(abs, [-1, 2, -3], workers=1) == [1, 2, 3]


@pytest.mark.analysis
def test_heading_curve_reference():
    config = toy_config()
    thetas = np.radians([0.0, 30.0])
    c = heading_error_curve(config, thetas)
    assert c.heading_error[0] == 0.0
    assert c.helicity == "+"
    direct = find_precession_frequency(config.with_theta(thetas[1])).frequency
    assert_close(c.at(thetas[1]), direct, rel=1e-12)
    shifted = heading_error_curve(config, np.radians([30.0]))
    assert_close(shifted.reference, c.reference, rel=1e-12)


@pytest.mark.analysis
def test_manifold_split_adds_up():
    response = build_response(default_config().with_theta(0.6))
    omega = response.larmor
    split = manifold_signals(response, omega)
    scale = 1e-12 * max(abs(split.parallel_a), abs(split.perpendicular_a), 1e-300)
    assert_close(split.parallel, response.signal(omega, "parallel"), 1e-9, scale)
    assert_close(split.perpendicular, response.signal(omega, "perpendicular"), 1e-9, scale)


@pytest.mark.analysis
def test_angle_uncertainty_positive():
    value = required_angle_uncertainty(toy_config(), np.radians(40.0))
    assert value > 0


@given(floats(min_value=0.0, max_value=1.4))
@settings(max_examples=20)
@pytest.mark.analysis
def test_spin_temperature_polarization(theta):
    state = spin_temperature_polarization(50.0, 20.0, theta, get_species("Rb85"))
    assert 0 <= state.s_z < 0.5
    assert_close(state.populations.sum(), 1.0)
    assert_close(np.tanh(state.beta / 2) / 2, state.s_z, rel=1e-9, abs_tol=1e-12)


@pytest.mark.analysis
def test_spin_temperature_errors():
    with pytest.raises(PolarizationError):
        spin_temperature_polarization(0.0, 0.0, 0.0)
    with pytest.raises(PolarizationError):
        spin_temperature_polarization(1.0, 0.0, 0.0)
    zero = spin_temperature_polarization(5.0, 1.0, np.pi / 2)
    assert abs(zero.s_z) < 1e-12
    assert zero.rho is None


@pytest.mark.analysis
def test_spin_temperature_frequency_without_shifts():
    "With NLZ and NuZ removed every Zeeman line sits at omega_L."
    species = get_species("Rb85")
    toggles = EffectToggles(nlz=False, nuz=False)
    larmor = species.mu_eff * 55e-6
    for beta in (0.0, 0.5, 2.0):
        assert_close(spin_temperature_frequency(species, 55e-6, beta, toggles), larmor)


@pytest.mark.analysis
def test_nuclear_zeeman_only_helicity_independent():
    result = Checks.nuz_only(toy_config())
    assert result.passed, result


@pytest.mark.analysis
def test_nuclear_zeeman_off_symmetry():
    result = Checks.nuz_off(toy_config())
    assert result.passed, result


def failing_at(degrees):
    "find_precession_frequency that raises at one tilt."
    real = analysis.find_precession_frequency

    def find(config, geometry=None):
        if abs(config.field.theta - np.radians(degrees)) < 1e-9:
            raise ExtractionError("no sign change in window")
        return real(config, geometry)

    return find


@pytest.mark.analysis
def test_heading_curve_keeps_failed_points(monkeypatch):
    monkeypatch.setattr(analysis, "find_precession_frequency", failing_at(30.0))
    c = heading_error_curve(toy_config(), np.radians([0.0, 30.0, 60.0]))
    assert c.failed
    assert np.isfinite(c.omega0[[0, 2]]).all()
    assert np.isnan(c.omega0[1])
    assert c.error(0) is None and c.error(2) is None
    assert c.error(1).startswith("ExtractionError")
    assert [row["error"] for row in c.rows()] == [None, c.error(1), None]


@pytest.mark.analysis
def test_failed_reference_marks_every_point(monkeypatch):
    monkeypatch.setattr(analysis, "find_precession_frequency", failing_at(0.0))
    c = heading_error_curve(toy_config(), np.radians([20.0, 40.0]))
    assert np.isfinite(c.omega0).all()
    assert np.isnan(c.heading_error).all()
    assert all(row["error"].startswith("reference: ExtractionError") for row in c.rows())


@pytest.mark.analysis
def test_dual_average_carries_point_errors(monkeypatch):
    def fake(config, thetas=None, geometry=None, workers=1):
        c = curve([100.0, 101.0, 103.0], helicity=config.pump.helicity_label)
        if config.pump.helicity < 0:
            c = replace(
                c, omega0=np.array([100.0, np.nan, 97.0]), errors=(None, "ExtractionError: x", None)
            )
        return c

    monkeypatch.setattr(analysis, "heading_error_curve", fake)
    dual = dual_helicity_average(default_config(), np.radians([0.0, 20.0, 40.0]), "same_probe")
    assert dual.curve.error(0) is None
    assert dual.curve.error(1) == "ExtractionError: x"
    assert_close(dual.curve.omega0[2], 100.0)
    assert np.isnan(dual.residual)


@pytest.mark.analysis
def test_decomposition_curves():
    config = toy_config(corotating_only=True, drive_form="rwa")
    thetas = np.radians([0.0, 40.0])
    dec = effect_decomposition(config, thetas)
    assert sorted(dec.curves) == sorted((e, h) for e in ("nlz", "ls", "nuz", "total") for h in (1, -1))
    assert all(error is None for errors in dec.errors.values() for error in errors)
    assert_close(dec.larmor, derived_frequencies(config.species, config.field.B0).omega_L)
    total = find_precession_frequency(config.with_theta(thetas[1])).frequency
    assert_close(dec.curves[("total", 1)][1], total - dec.larmor, rel=1e-12, abs_tol=1e-9)
    tol = 2 * config.numerics.root_tolerance / (2 * np.pi)
    assert_close_array(dec.curves[("nuz", 1)], dec.curves[("nuz", -1)], rel=0.0, abs_tol=tol)
    for effect in ("nlz", "ls"):
        assert np.max(np.abs(dec.average(effect))) < 0.05


@pytest.mark.analysis
def test_auxiliary_field_offsets():
    config = toy_config()
    Ba = 2e-9
    shift = config.species.mu_eff * Ba
    aux = auxiliary_field_curve(config, [0.0, Ba], np.radians([0.0, 30.0, 60.0]))
    assert sorted(aux.curves) == [(0.0, -1), (0.0, 1), (Ba, -1), (Ba, 1)]
    assert aux.deviation[(0.0, 1)] == 0.0 and aux.deviation[(0.0, -1)] == 0.0
    assert aux.max_deviation() < 0.05 * shift
    for h in (1, -1):
        offset = aux.curves[(Ba, h)].reference - aux.curves[(0.0, h)].reference
        assert_close(offset, h * shift, rel=0.05)


@pytest.mark.analysis
@pytest.mark.slow
def test_flattening_angle_threshold():
    "theta0 stays 0 for a weak auxiliary field and grows once the field passes ~8 nT."
    config = default_config()
    assert flattening_angle(config, 4e-9) == 0.0
    low, high = flattening_angle(config, 17e-9), flattening_angle(config, 25e-9)
    assert 0.0 < low < high < np.radians(80.0)


@pytest.mark.analysis
def test_orthogonal_probe_diagnostic():
    config = default_config().with_theta(np.radians(40.0))
    diag = orthogonal_probe_diagnostic(config)
    response = build_response(config)
    split = manifold_signals(response, diag.omega_a)
    assert abs(split.parallel_a) <= 2 * abs(diag.C_a["parallel"]) * config.numerics.root_tolerance
    for geometry in ("parallel", "perpendicular"):
        assert diag.C_a[geometry] != 0.0
        omega0 = find_precession_frequency(config, geometry).omega0
        tol = 0.1 * abs(omega0 - diag.omega_a) + 2 * config.numerics.root_tolerance
        assert abs(diag.predicted[geometry] - omega0) < tol
