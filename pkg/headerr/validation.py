"""
Invariant checks run by ``headerr validate``.

Each public static method of :class:`Checks` takes a configuration and
returns a :class:`CheckResult`; :meth:`Checks._checks` enumerates them.
"""

import logging
from dataclasses import replace
from typing import NamedTuple

import numpy as np

from .analysis import PIPELINE_ERRORS, CurveError, dual_helicity_average
from .model import hamiltonian_zeeman
from .oracle import (
    LabelingError,
    PrecisionError,
    StiffnessError,
    curated_configs,
    exact_zeeman_spectrum,
    oracle_zero_crossing,
)
from .response import find_precession_frequency
from .species import derived_frequencies
from .spin_algebra import build_basis
from .units import TWO_PI

logger = logging.getLogger(__name__)

PARITY_ANGLES = (10.0, 40.0, 70.0)
SYMMETRY_ANGLES = (0.0, 40.0, 70.0)
BREIT_RABI_FIELDS = (10e-6, 30e-6, 55e-6, 80e-6)
BREIT_RABI_MARGIN = 1.05
ORTHOGONAL_GRID = np.radians(np.arange(0.0, 80.0 + 1e-9, 20.0))


def cubic_spacing_coefficient(twice_I):
    """
    Largest third-order Breit-Rabi term of an adjacent-level spacing, in
    units of (mu_eff B)^3 / Delta_S^2.

    With k = 2I+1 and x = k mu_eff B / Delta_S the level E(F, m) carries
    +-(Delta_S/2) x^3 (4m^3/k^3 - m/k) at third order; 20 for 85Rb.
    """
    k = twice_I + 1
    worst = 0.0
    for twice_F in (twice_I + 1, twice_I - 1):
        m = np.arange(-twice_F, twice_F + 1, 2) / 2.0
        g = 4 * m ** 3 / k ** 3 - m / k
        worst = max(worst, float(np.max(np.abs(np.diff(g)))))
    return 0.5 * k ** 3 * worst


class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _omega0(config, theta_deg=None, geometry=None):
    "omega0 in Hz"
    if theta_deg is not None:
        config = config.with_theta(np.radians(theta_deg))
    return find_precession_frequency(config, geometry).frequency


def _root_hz(config):
    return config.numerics.root_tolerance / TWO_PI


def _symmetric(config):
    "Rotating-wave response with the rwa probe, where the helicity mirror relations are exact."
    return config.with_numerics(corotating_only=True, drive_form="rwa")


def _result(name, value, threshold, detail=""):
    return CheckResult(name, bool(value < threshold), float(value), float(threshold), detail)


class Checks:
    @staticmethod
    def derived(config):
        "Perturbative a-manifold spacings equal omega_L - omega_NuZ - (2m+1) omega_rev"
        species, B0 = config.species, abs(config.field.B0)
        freqs = derived_frequencies(species, B0)
        basis = build_basis(species)
        levels = np.real(np.diag(hamiltonian_zeeman(basis, B0).matrix)) / TWO_PI
        rows = basis.indices("S", "a")
        worst = 0.0
        for lo, hi in zip(rows[:-1], rows[1:]):
            m = basis.labels[lo].m
            expected = freqs.omega_L - freqs.omega_NuZ - (2 * m + 1) * freqs.omega_rev
            worst = max(worst, abs(levels[hi] - levels[lo] - expected))
        return _result("derived", worst, 1e-6, "Hz")

    @staticmethod
    def parity(config):
        "omega0(theta) = omega0(-theta)"
        worst = max(abs(_omega0(config, t) - _omega0(config, -t)) for t in PARITY_ANGLES)
        return _result("parity", worst, 2 * _root_hz(config), "Hz")

    @staticmethod
    def inversion(config):
        "sigma- at B0 equals sigma+ at -B0"
        minus = config.with_helicity(-1)
        plus = replace(config.with_helicity(1), field=replace(config.field, B0=-config.field.B0))
        value = abs(_omega0(minus, 40.0) - _omega0(plus, 40.0))
        return _result("inversion", value, 2 * _root_hz(config), "Hz")

    @staticmethod
    def nuz_only(config):
        "With only the nuclear Zeeman effect both helicities agree"
        base = _symmetric(config).with_toggles(nlz=False, ls=False, nuz=True)
        worst = 0.0
        for geometry in ("parallel", "perpendicular"):
            worst = max(
                worst,
                abs(
                    _omega0(base.with_helicity(1), 40.0, geometry)
                    - _omega0(base.with_helicity(-1), 40.0, geometry)
                ),
            )
        return _result("nuz_only", worst, 2 * _root_hz(config), "Hz")

    @staticmethod
    def nuz_off(config):
        "Without the nuclear Zeeman effect omega0+ + omega0- = 2 omega_L"
        base = _symmetric(config.with_toggles(nuz=False))
        larmor = derived_frequencies(config.species, config.field.B0).omega_L
        worst = max(
            abs(_omega0(base.with_helicity(1), t) + _omega0(base.with_helicity(-1), t) - 2 * larmor)
            for t in SYMMETRY_ANGLES
        )
        return _result("nuz_off", worst, 0.05, "Hz")

    @staticmethod
    def decomposition(config):
        "Helicity average minus omega_L equals the nuclear-Zeeman-only shift, to first order in the effects"
        base = _symmetric(config)
        larmor = derived_frequencies(config.species, config.field.B0).omega_L
        nuz = base.with_toggles(nlz=False, ls=False, nuz=True)
        worst = 0.0
        for t in SYMMETRY_ANGLES:
            average = 0.5 * (_omega0(base.with_helicity(1), t) + _omega0(base.with_helicity(-1), t))
            worst = max(worst, abs(average - larmor - (_omega0(nuz, t) - larmor)))
        return _result("decomposition", worst, 0.1, "Hz")

    @staticmethod
    def breit_rabi(config):
        "Second-order Zeeman spacings deviate from exact ones by the third-order Breit-Rabi term"
        species = config.species
        residuals, scales = [], []
        for B0 in BREIT_RABI_FIELDS:
            basis = build_basis(species)
            levels = np.real(np.diag(hamiltonian_zeeman(basis, B0).matrix)) / TWO_PI
            exact = exact_zeeman_spectrum(species, B0)
            worst = 0.0
            for manifold in ("a", "b"):
                rows = basis.indices("S", manifold)
                approx = np.diff(levels[rows])
                worst = max(worst, np.max(np.abs(exact.spacings(manifold) - approx)))
            residuals.append(worst)
            scales.append((species.mu_eff * B0) ** 3 / species.delta_S ** 2)
        slope = np.polyfit(np.log(BREIT_RABI_FIELDS), np.log(residuals), 1)[0]
        coefficient = max(r / s for r, s in zip(residuals, scales))
        expected = cubic_spacing_coefficient(species.twice_I)
        bound = BREIT_RABI_MARGIN * expected
        passed = 2.8 <= slope <= 3.2 and expected / BREIT_RABI_MARGIN <= coefficient <= bound
        return CheckResult(
            "breit_rabi", bool(passed), float(coefficient), float(bound),
            "log-log slope %.3f, closed form %.3f" % (slope, expected),
        )

    @staticmethod
    def linear_response(config):
        "omega0 does not depend on the RF amplitude"
        B1 = config.field.B1 or 1e-4 * abs(config.field.B0)
        small = replace(config, field=replace(config.field, B1=B1))
        large_B1 = min(10 * B1, 5e-3 * abs(config.field.B0))
        large = replace(config, field=replace(config.field, B1=large_B1))
        value = abs(_omega0(small, 40.0) - _omega0(large, 40.0))
        return _result("linear_response", value, _root_hz(config), "Hz")

    @staticmethod
    def ordering(config):
        "omega0 < omega_L; omega0+ < omega0-; omega0+ rises and omega0- falls with theta"
        larmor = derived_frequencies(config.species, config.field.B0).omega_L
        plus, minus = config.with_helicity(1), config.with_helicity(-1)
        tol = 2 * _root_hz(config)
        failures = []
        for geometry in ("parallel", "perpendicular"):
            p0, p1 = _omega0(plus, 0.0, geometry), _omega0(plus, 40.0, geometry)
            m0, m1 = _omega0(minus, 0.0, geometry), _omega0(minus, 40.0, geometry)
            if max(p0, p1, m0, m1) >= larmor:
                failures.append("%s: omega0 >= omega_L" % geometry)
            if p0 >= m0:
                failures.append("%s: omega0+ >= omega0-" % geometry)
            if p1 < p0 - tol or m1 > m0 + tol:
                failures.append("%s: wrong heading slope" % geometry)
        return CheckResult(
            "ordering", not failures, float(len(failures)), 1.0, "; ".join(failures)
        )

    @staticmethod
    def orthogonal(config):
        "Orthogonal-probe helicity average leaves < 1 Hz heading error"
        dual = dual_helicity_average(config, ORTHOGONAL_GRID, "orthogonal_probe")
        return _result("orthogonal", dual.residual, 1.0, "Hz")

    @staticmethod
    def oracle(config):
        "Full time-domain zero crossing matches the effective model"
        curated = curated_configs()[1]
        effective = find_precession_frequency(curated, "parallel")
        full = oracle_zero_crossing(curated, geometry="parallel")
        value = abs(full - effective.omega0) / TWO_PI
        threshold = max(0.5, 0.05 * abs(effective.shift))
        return _result("oracle", value, threshold, "Hz")

    SLOW = ("oracle",)

    @classmethod
    def _checks(cls):
        """
        Returns a list of (name, check) pairs in alphabetical order.
        """
        return [
            (k, getattr(cls, k))
            for k in sorted(dir(cls))
            if not k.startswith("_") and callable(getattr(cls, k))
        ]


CHECK_ERRORS = PIPELINE_ERRORS + (CurveError, LabelingError, PrecisionError, StiffnessError)


def run_checks(config, quick=False, names=None):
    """
    Run the check suite.

    Args:
        config (:class:`SimulationConfig`): configuration under test
        quick (bool): skip the time-domain oracle
        names (list): run only these checks

    Returns:
        list of :class:`CheckResult` : one per check; failures carry the error text
    """
    results = []
    for name, check in Checks._checks():
        if names is not None and name not in names:
            continue
        if quick and name in Checks.SLOW:
            continue
        try:
            result = check(config)
        except CHECK_ERRORS as err:
            logger.error("check %s raised %s: %s", name, type(err).__name__, err)
            result = CheckResult(name, False, float("nan"), float("nan"), str(err))
        logger.info("check %s: %s", name, "pass" if result.passed else "FAIL")
        results.append(result)
    return results
