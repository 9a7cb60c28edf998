"""
Heading-error curves and the analyses built on them: effect decomposition,
dual-helicity averaging, the auxiliary-field flattening scheme and the
orthogonal-probe diagnostic.

Every curve is a set of independent pipeline runs (steady state, response,
zero crossing), one per grid point, optionally spread over a process pool.
"""

import logging
import multiprocessing
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import bisect

from .config import ConfigError, config_fingerprint
from .reduction import ConvergenceError, EliminationError
from .response import (
    AmbiguityError,
    ExtractionError,
    build_response,
    find_precession_frequency,
    scan_window,
    select_crossing,
    signal_parallel,
    signal_perpendicular,
)
from .species import derived_frequencies
from .superop import unvec
from .units import TWO_PI

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9
DERIVATIVE_STEP = np.radians(0.5)
EFFECTS = ("nlz", "ls", "nuz", "total")
PIPELINE_ERRORS = (
    ConfigError,
    ConvergenceError,
    EliminationError,
    ExtractionError,
    AmbiguityError,
    np.linalg.LinAlgError,
)


class GridError(ValueError):
    "Exception raised for a malformed angle grid or a lookup off the grid."
    pass


class PairingError(ValueError):
    "Exception raised when two helicity configurations differ beyond helicity and geometry."
    pass


class CurveError(RuntimeError):
    "Exception raised when one point of a curve fails; `theta` names the point."

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


def parallel_map(fn, items, workers=1):
    """
    Order-preserving map over a spawn-started process pool.

    Args:
        fn (callable): picklable top-level function
        items (list): arguments
        workers (int): pool size; 1 or less runs serially

    Returns:
        list : results in input order
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with multiprocessing.get_context("spawn").Pool(min(workers, len(items))) as pool:
        return pool.map(fn, items)


def _omega0_task(task):
    config, geometry = task
    try:
        return find_precession_frequency(config, geometry).frequency, None
    except PIPELINE_ERRORS as err:
        return float("nan"), "%s: %s" % (type(err).__name__, err)


def precession_frequencies(configs, geometry, workers=1):
    """
    omega0 (Hz) of each configuration. A failing point is NaN and keeps its
    error text; the other points are unaffected.

    Returns:
        tuple : (array of omega0, tuple of error strings or None)
    """
    results = parallel_map(_omega0_task, [(c, geometry) for c in configs], workers)
    for config, (_, error) in zip(configs, results):
        if error is not None:
            logger.error("theta=%.3f deg failed: %s", np.degrees(config.field.theta), error)
    values = np.array([value for value, _ in results], dtype=np.float64)
    return values, tuple(error for _, error in results)


def first_error(thetas, errors):
    """
    Raises:
        CurveError: for the first failed point
    """
    for theta, error in zip(thetas, errors):
        if error is not None:
            raise CurveError(error, theta)


def check_grid(thetas):
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.ndim != 1 or thetas.size == 0:
        raise GridError("theta grid must be a non-empty 1-d sequence")
    if np.any(np.diff(thetas) <= 0):
        raise GridError("theta grid must be strictly increasing")
    if np.any(np.abs(thetas) > np.pi / 2 + GRID_TOL):
        raise GridError("theta grid must lie in [-90, 90] deg")
    return thetas


@dataclass(frozen=True, eq=False)
class HeadingCurve:
    """
    omega0(theta) in Hz on a strictly increasing grid (rad) and its value at
    theta = 0 from the same run.

    Failed points are NaN with their message in `errors`; a failed reference
    makes every heading error NaN and is reported in `reference_error`.
    """

    thetas: np.ndarray
    omega0: np.ndarray
    reference: float
    fingerprint: str
    geometry: str
    helicity: str
    errors: Tuple[Optional[str], ...] = ()
    reference_error: Optional[str] = None

    @property
    def heading_error(self):
        return self.omega0 - self.reference

    def error(self, i):
        "Error text of grid point `i`, or None."
        own = self.errors[i] if i < len(self.errors) else None
        if own is not None:
            return own
        if self.reference_error is not None:
            return "reference: %s" % self.reference_error
        return None

    @property
    def failed(self):
        return any(self.error(i) is not None for i in range(len(self.thetas)))

    def _position(self, theta):
        hits = np.flatnonzero(np.abs(self.thetas - theta) < GRID_TOL)
        if hits.size == 0:
            raise GridError("theta=%.6g deg is not on the grid" % np.degrees(theta))
        return int(hits[0])

    def at(self, theta):
        "omega0 at a grid angle; no interpolation."
        return float(self.omega0[self._position(theta)])

    def rows(self):
        return [
            dict(
                theta_deg=np.degrees(t),
                omega0_hz=w,
                heading_error_hz=w - self.reference,
                error=self.error(i),
            )
            for i, (t, w) in enumerate(zip(self.thetas, self.omega0))
        ]


def heading_error_curve(config, thetas=None, geometry=None, workers=1):
    """
    omega0(theta) - omega0(0) over an angle grid.

    Args:
        config (:class:`SimulationConfig`): run configuration (its theta is ignored)
        thetas (array): strictly increasing grid, rad (config grid if omitted)
        geometry (str): probe geometry (config default)
        workers (int): process-pool size

    Returns:
        :class:`HeadingCurve` : curve

    Raises:
        GridError: malformed grid
    """
    thetas = check_grid(config.analysis.theta_grid if thetas is None else thetas)
    geometry = config.geometry if geometry is None else geometry
    has_zero = bool(np.any(np.abs(thetas) < GRID_TOL))
    points = list(thetas) if has_zero else [0.0] + list(thetas)
    values, errors = precession_frequencies(
        [config.with_theta(t) for t in points], geometry, workers
    )
    origin = int(np.argmin(np.abs(np.asarray(points))))
    skip = 0 if has_zero else 1
    return HeadingCurve(
        thetas=thetas,
        omega0=values[skip:],
        reference=float(values[origin]),
        fingerprint=config_fingerprint(config),
        geometry=geometry,
        helicity=config.pump.helicity_label,
        errors=errors[skip:],
        reference_error=errors[origin],
    )


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    omega0 - omega_L (Hz) with one effect enabled, keyed (effect, helicity)
    with effect in nlz, ls, nuz, total and helicity +1/-1.
    """

    thetas: np.ndarray
    larmor: float
    geometry: str
    curves: Dict[Tuple[str, int], np.ndarray]
    errors: Dict[Tuple[str, int], Tuple[Optional[str], ...]] = field(default_factory=dict)

    def average(self, effect):
        "(omega0+ + omega0-)/2 - omega_L"
        return 0.5 * (self.curves[(effect, 1)] + self.curves[(effect, -1)])


def effect_toggles(effect):
    if effect == "total":
        return dict(nlz=True, nuz=True, ls=True)
    if effect not in EFFECTS:
        raise ConfigError("unknown effect %r" % (effect,))
    return {name: name == effect for name in ("nlz", "nuz", "ls")}


def effect_decomposition(config, thetas=None, geometry=None, workers=1):
    """
    Contributions of NLZ, LS and NuZ to omega0 - omega_L, each alone, plus
    the total, for both helicities.

    Args:
        config (:class:`SimulationConfig`): run configuration
        thetas (array): grid, rad
        geometry (str): probe geometry
        workers (int): process-pool size

    Returns:
        :class:`Decomposition` : eight curves

    Raises:
        ConfigError: exact Zeeman mode (the effects only separate perturbatively)
    """
    if config.numerics.zeeman_mode != "perturbative":
        raise ConfigError("effect decomposition needs zeeman_mode = perturbative")
    thetas = check_grid(config.analysis.theta_grid if thetas is None else thetas)
    geometry = config.geometry if geometry is None else geometry
    keys = [(effect, h) for effect in EFFECTS for h in (1, -1)]
    configs = [
        config.with_toggles(**effect_toggles(effect)).with_helicity(h).with_theta(t)
        for effect, h in keys
        for t in thetas
    ]
    values, errors = precession_frequencies(configs, geometry, workers)
    larmor = derived_frequencies(config.species, config.field.B0).omega_L
    values = values.reshape(len(keys), len(thetas)) - larmor
    n = len(thetas)
    errors = {key: errors[i * n : (i + 1) * n] for i, key in enumerate(keys)}
    return Decomposition(thetas, larmor, geometry, dict(zip(keys, values)), errors)


@dataclass(frozen=True, eq=False)
class DualAverage:
    """
    Helicity-averaged heading curve. For orthogonal-probe pairing `curve`
    pairs parallel sigma+ with perpendicular sigma- and `mirror` the reverse.
    """

    pairing: str
    curve: HeadingCurve
    mirror: Optional[HeadingCurve] = None

    @property
    def residual(self):
        "Largest |heading error| of the averaged curve(s), Hz; NaN when a point failed."
        curves = [self.curve] if self.mirror is None else [self.curve, self.mirror]
        return float(np.max(np.abs(np.concatenate([c.heading_error for c in curves]))))


def _join(*errors):
    errors = [e for e in errors if e is not None]
    return "; ".join(errors) if errors else None


def _pair(a, b, geometry):
    count = len(a.thetas)
    return HeadingCurve(
        thetas=a.thetas,
        omega0=0.5 * (a.omega0 + b.omega0),
        reference=0.5 * (a.reference + b.reference),
        fingerprint=a.fingerprint,
        geometry=geometry,
        helicity="+/-",
        errors=tuple(
            _join(a.errors[i] if a.errors else None, b.errors[i] if b.errors else None)
            for i in range(count)
        ),
        reference_error=_join(a.reference_error, b.reference_error),
    )


def check_partner(config, partner):
    """
    Raises:
        PairingError: `partner` differs from `config` beyond helicity and geometry
    """
    aligned = replace(
        partner,
        pump=replace(partner.pump, helicity=config.pump.helicity),
        geometry=config.geometry,
    )
    if aligned != config:
        raise PairingError("paired configurations differ beyond helicity and geometry")


def dual_helicity_average(config, thetas=None, pairing=None, partner=None, workers=1):
    """
    Average the heading curves of a sigma+ and a sigma- pump.

    ``same_probe`` pairs equal geometries (the config's);
    ``orthogonal_probe`` pairs parallel sigma+ with perpendicular sigma- and,
    as the mirror, perpendicular sigma+ with parallel sigma-.

    Args:
        config (:class:`SimulationConfig`): sigma+ side (its helicity is forced to +)
        thetas (array): grid, rad
        pairing (str): ``same_probe`` or ``orthogonal_probe`` (config default)
        partner (:class:`SimulationConfig`): explicit sigma- side
        workers (int): process-pool size

    Returns:
        :class:`DualAverage` : averaged curve(s)

    Raises:
        PairingError: mismatched partner or unknown pairing
    """
    pairing = config.analysis.pairing if pairing is None else pairing
    plus = config.with_helicity(1)
    if partner is None:
        minus = config.with_helicity(-1)
    else:
        check_partner(config, partner)
        minus = partner.with_helicity(-1)

    def curve(c, geometry):
        return heading_error_curve(c, thetas, geometry, workers)

    if pairing == "same_probe":
        geometry = plus.geometry
        return DualAverage(pairing, _pair(curve(plus, geometry), curve(minus, geometry), geometry))
    if pairing == "orthogonal_probe":
        par_plus, perp_plus = curve(plus, "parallel"), curve(plus, "perpendicular")
        par_minus, perp_minus = curve(minus, "parallel"), curve(minus, "perpendicular")
        return DualAverage(
            pairing,
            _pair(par_plus, perp_minus, "parallel/perpendicular"),
            _pair(perp_plus, par_minus, "perpendicular/parallel"),
        )
    raise PairingError("unknown pairing %r" % (pairing,))


def asymmetry_metric(curve_plus, curve_minus, theta1, theta2):
    """
    [w+(t1) - w+(t2)] + [w-(t1) - w-(t2)], zero for mirror-symmetric heading errors.

    Raises:
        GridError: an angle is not on both grids
    """
    return (curve_plus.at(theta1) - curve_plus.at(theta2)) + (
        curve_minus.at(theta1) - curve_minus.at(theta2)
    )


@dataclass(frozen=True, eq=False)
class AuxFieldCurves:
    """
    Heading curves with an auxiliary field along the pump, keyed (Ba, helicity),
    and the largest deviation (Hz) of each from
    w0(t, 0) + sign(helicity) mu_eff Ba cos t.
    """

    thetas: np.ndarray
    curves: Dict[Tuple[float, int], HeadingCurve]
    deviation: Dict[Tuple[float, int], float]

    def max_deviation(self):
        "NaN when a point failed."
        return float(np.max(list(self.deviation.values()))) if self.deviation else 0.0


def with_aux_field(config, Ba):
    return replace(config, field=replace(config.field, Ba=Ba))


def auxiliary_field_curve(config, ba_list=None, thetas=None, geometry=None, workers=1):
    """
    Heading curves for each auxiliary field and both helicities, checked
    against the cosine approximation.

    Args:
        config (:class:`SimulationConfig`): run configuration
        ba_list (list): auxiliary fields, T (config list if omitted)
        thetas (array): grid, rad
        geometry (str): probe geometry
        workers (int): process-pool size

    Returns:
        :class:`AuxFieldCurves` : curves and deviations

    Raises:
        ConfigError: Ba/|B0| >= 1e-2
    """
    ba_list = config.analysis.ba_list if ba_list is None else ba_list
    thetas = check_grid(config.analysis.theta_grid if thetas is None else thetas)
    mu_eff = config.species.mu_eff
    curves, deviation = {}, {}
    for h in (1, -1):
        base = config.with_helicity(h)
        baseline = heading_error_curve(with_aux_field(base, 0.0), thetas, geometry, workers)
        for Ba in ba_list:
            if Ba == 0:
                curve = baseline
            else:
                curve = heading_error_curve(with_aux_field(base, Ba), thetas, geometry, workers)
            approx = baseline.omega0 + h * mu_eff * Ba * np.cos(thetas)
            curves[(Ba, h)] = curve
            deviation[(Ba, h)] = float(np.max(np.abs(curve.omega0 - approx)))
    return AuxFieldCurves(thetas, curves, deviation)


def _derivative_task(task):
    config, geometry, theta, step = task
    upper, lower = min(theta + step, np.pi / 2), theta - step
    hi, err_hi = _omega0_task((config.with_theta(upper), geometry))
    lo, err_lo = _omega0_task((config.with_theta(lower), geometry))
    return (hi - lo) / (upper - lower), err_hi or err_lo


def heading_slope(config, theta, geometry=None, step=DERIVATIVE_STEP):
    "Central-difference d omega0 / d theta in Hz/rad."
    geometry = config.geometry if geometry is None else geometry
    value, error = _derivative_task((config, geometry, theta, step))
    if error is not None:
        raise CurveError(error, theta)
    return value


def flattening_angle(config, Ba, thetas=None, geometry=None, workers=1):
    """
    Angle theta0 > 0 where d omega0 / d theta vanishes with the auxiliary field on.

    The derivative is sampled on the positive grid angles; the first interior
    sign change is refined by bisection. With no sign change theta0 = 0.

    Args:
        config (:class:`SimulationConfig`): run configuration
        Ba (float): auxiliary field, T
        thetas (array): grid, rad
        geometry (str): probe geometry
        workers (int): process-pool size

    Returns:
        float : theta0, rad

    Raises:
        CurveError: a derivative sample failed
    """
    geometry = config.geometry if geometry is None else geometry
    thetas = check_grid(config.analysis.theta_grid if thetas is None else thetas)
    thetas = thetas[thetas >= DERIVATIVE_STEP - GRID_TOL]
    aux = with_aux_field(config, Ba)
    results = parallel_map(
        _derivative_task, [(aux, geometry, t, DERIVATIVE_STEP) for t in thetas], workers
    )
    first_error(thetas, [error for _, error in results])
    slopes = np.array([value for value, _ in results])
    changes = np.flatnonzero(np.sign(slopes[:-1]) * np.sign(slopes[1:]) <= 0)
    if changes.size == 0:
        return 0.0
    if changes.size > 1:
        logger.warning(
            "%d sign changes of d omega0/d theta; using the smallest angle", changes.size
        )
    i = int(changes[0])
    if slopes[i] == 0.0:
        return float(thetas[i])
    if slopes[i + 1] == 0.0:
        return float(thetas[i + 1])
    return float(
        bisect(
            lambda t: heading_slope(aux, t, geometry),
            thetas[i],
            thetas[i + 1],
            xtol=np.radians(0.01),
        )
    )


def required_angle_uncertainty(config, theta, field_accuracy=1e-12, geometry=None):
    """
    Angle tolerance field_accuracy * mu_eff / |d omega0 / d theta| keeping the
    heading error below a target field accuracy.

    Args:
        config (:class:`SimulationConfig`): run configuration
        theta (float): operating angle, rad
        field_accuracy (float): target accuracy, T
        geometry (str): probe geometry

    Returns:
        float : angle tolerance, rad (inf where the curve is flat)
    """
    slope = abs(heading_slope(config, theta, geometry))
    if slope == 0:
        return float("inf")
    return field_accuracy * config.species.mu_eff / slope


@dataclass(frozen=True)
class ManifoldSignals:
    "Probe signals split into the a-block part and the rest."
    parallel_a: float
    parallel_b: float
    perpendicular_a: float
    perpendicular_b: float

    @property
    def parallel(self):
        return self.parallel_a + self.parallel_b

    @property
    def perpendicular(self):
        return self.perpendicular_a + self.perpendicular_b


def manifold_signals(response, omega):
    """
    Signals of the a-manifold block of rho1 and of the remainder (b block and
    the far-detuned a-b coherences), at drive frequency `omega`.
    """
    basis = response.basis
    n = basis.ground_dim
    rho1 = unvec(response.first_order(omega), n)
    a = basis.indices("S", "a")
    block = np.zeros_like(rho1)
    block[np.ix_(a, a)] = rho1[np.ix_(a, a)]
    theta = response.config.field.theta
    form = response.config.numerics.drive_form
    par_a = signal_parallel(block, theta, basis, form)
    perp_a = signal_perpendicular(block, basis)
    return ManifoldSignals(
        par_a,
        signal_parallel(rho1, theta, basis, form) - par_a,
        perp_a,
        signal_perpendicular(rho1, basis) - perp_a,
    )


@dataclass(frozen=True)
class OrthogonalDiagnostic:
    """
    Linearization about the a-manifold zero omega_a (rad/s):
    S^a = C_a (w - w_a), S^b = D + C_b (w - w_a) for each probe geometry, and
    the zero crossings these predict.
    """

    omega_a: float
    C_a: Dict[str, float]
    C_b: Dict[str, float]
    D: Dict[str, float]
    predicted: Dict[str, float] = field(default_factory=dict)


def orthogonal_probe_diagnostic(config, step=None):
    """
    Split the parallel and perpendicular signals by hyperfine manifold and
    fit them linearly around the a-manifold zero crossing.

    Args:
        config (:class:`SimulationConfig`): run configuration
        step (float): finite-difference step, rad/s (2 pi x 1 Hz by default)

    Returns:
        :class:`OrthogonalDiagnostic` : constants and predicted omega0 per geometry
    """
    response = build_response(config)
    step = TWO_PI * 1.0 if step is None else step
    lo, hi = scan_window(response)
    omegas = np.linspace(lo, hi, config.numerics.scan_points)

    def s_a(w):
        return manifold_signals(response, w).parallel_a

    values = np.array([s_a(w) for w in omegas])
    i = select_crossing(omegas, values, response.larmor, config.numerics.root_tolerance)
    if values[i] == 0.0:
        omega_a = float(omegas[i])
    else:
        omega_a = bisect(s_a, omegas[i], omegas[i + 1], xtol=config.numerics.root_tolerance)

    at = manifold_signals(response, omega_a)
    up = manifold_signals(response, omega_a + step)
    down = manifold_signals(response, omega_a - step)
    C_a, C_b, D, predicted = {}, {}, {}, {}
    for geometry in ("parallel", "perpendicular"):
        a_key, b_key = geometry + "_a", geometry + "_b"
        C_a[geometry] = (getattr(up, a_key) - getattr(down, a_key)) / (2 * step)
        C_b[geometry] = (getattr(up, b_key) - getattr(down, b_key)) / (2 * step)
        D[geometry] = getattr(at, b_key)
        slope = C_a[geometry] + C_b[geometry]
        predicted[geometry] = omega_a - D[geometry] / slope if slope != 0 else float("nan")
    return OrthogonalDiagnostic(omega_a, C_a, C_b, D, predicted)
