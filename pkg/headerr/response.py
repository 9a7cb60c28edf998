"""
Linear response of the pumped ground state to the RF drive and extraction of
the precession frequency from the zero crossing of the probe signal.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve
from scipy.optimize import bisect

from . import fast_ops
from .model import driving_superop, probe_operator, spin_exchange_feedback
from .reduction import build_effective, solve_steady_state
from .species import derived_frequencies
from .spin_algebra import spin_operators
from .superop import unvec, vec
from .units import TWO_PI

logger = logging.getLogger(__name__)

NUZ_WINDOW = 20.0
LINEWIDTH_WINDOW = 50.0


class ExtractionError(RuntimeError):
    "Exception raised when the scanned signal has no usable zero crossing."

    def __init__(self, message, omegas=None, values=None):
        super().__init__(message)
        self.omegas = omegas
        self.values = values


class AmbiguityError(RuntimeError):
    "Exception raised for two candidate crossings equidistant from the Larmor frequency."
    pass


@dataclass(frozen=True)
class ResponsePoint:
    omega: float
    s_parallel: float
    s_perpendicular: float


@dataclass(frozen=True)
class PrecessionResult:
    """
    Zero crossing `omega0` (rad/s) of the signal of `geometry`, found inside
    `bracket`; `residual` is the signal value at the returned root.
    """

    omega0: float
    geometry: str
    bracket: Tuple[float, float]
    residual: float
    larmor: float

    @property
    def frequency(self):
        "omega0 in Hz"
        return self.omega0 / TWO_PI

    @property
    def shift(self):
        "omega0 - omega_L in Hz"
        return (self.omega0 - self.larmor) / TWO_PI


def first_order_state(system, drive, rho0, omega, branch=1, source_mask=None):
    """
    Solve (L_eff -+ i omega) rho1 + L1 rho0 = 0 for the rho1 e^{+-i omega t}
    component.

    With a `source_mask` the rotating-wave form is solved instead: both the
    source and the generator are restricted to the masked coherences, so
    couplings to components oscillating at other multiples of omega_L drop out.

    Args:
        system (array or :class:`EffectiveLiouvillian`): ground generator,
            including the spin-exchange feedback
        drive (:class:`Superoperator`): L1
        rho0 (array): ground steady state
        omega (float): drive frequency, rad/s
        branch (int): +1 or -1
        source_mask (array): optional 0/1 mask selecting the kept coherences

    Returns:
        array : vectorized rho1
    """
    matrix = system if isinstance(system, np.ndarray) else system.matrix
    source = -(drive.matrix @ vec(rho0))
    shift = 1j * omega if branch > 0 else -1j * omega
    if source_mask is None:
        return solve(matrix - shift * np.eye(matrix.shape[0]), source)
    keep = np.flatnonzero(source_mask)
    rho1 = np.zeros(matrix.shape[0], dtype=complex)
    if len(keep):
        block = matrix[np.ix_(keep, keep)] - shift * np.eye(len(keep))
        rho1[keep] = solve(block, source[keep])
    return rho1


def _as_matrix(rho1, n):
    rho1 = np.asarray(rho1)
    return unvec(rho1, n) if rho1.ndim == 1 else rho1


def signal_parallel(rho1, theta, basis, form="full"):
    "2 Re Tr((S_x cos t - S_z sin t) rho1); the rwa form drops S_z sin t."
    o = probe_operator(basis, theta, form).matrix
    return float(2.0 * np.real(np.trace(o @ _as_matrix(rho1, basis.ground_dim))))


def signal_perpendicular(rho1, basis, branch=1):
    "branch * 2 Im Tr(S_y rho1)"
    s_y = spin_operators(basis).ground("S_y")
    value = 2.0 * np.imag(np.trace(s_y @ _as_matrix(rho1, basis.ground_dim)))
    return float(value if branch > 0 else -value)


def corotating_mask(basis, matrix):
    """
    1 on same-manifold |dm| = 1 coherences whose free evolution is e^{+i w t}
    (positive imaginary diagonal of the generator), 0 elsewhere.
    """
    n = basis.ground_dim
    labels = basis.ground_labels
    diag = np.diag(matrix)
    mask = np.zeros(n * n)
    for i, li in enumerate(labels):
        for j, lj in enumerate(labels):
            k = i * n + j
            if (
                li.manifold == lj.manifold
                and abs(li.twice_m - lj.twice_m) == 2
                and diag[k].imag > 0
            ):
                mask[k] = 1.0
    return mask


@dataclass(frozen=True, eq=False)
class LinearResponse:
    """
    Everything needed to evaluate the probe signals of one configuration:
    steady state, effective generator at its mean fields, spin-exchange
    feedback, drive and source mask.
    """

    config: object
    state: object
    effective: object
    feedback: object
    drive: object
    source_mask: Optional[np.ndarray] = None

    @property
    def basis(self):
        return self.effective.basis

    @property
    def system(self):
        return self.effective.matrix + self.feedback.matrix

    @property
    def larmor(self):
        "omega_L, rad/s"
        return TWO_PI * derived_frequencies(self.config.species, self.config.field.B0).omega_L

    def first_order(self, omega, branch=1):
        return first_order_state(
            self.system, self.drive, self.state.rho, omega, branch, self.source_mask
        )

    def point(self, omega):
        rho1 = self.first_order(omega)
        theta = self.config.field.theta
        form = self.config.numerics.drive_form
        return ResponsePoint(
            omega,
            signal_parallel(rho1, theta, self.basis, form),
            signal_perpendicular(rho1, self.basis),
        )

    def signal(self, omega, geometry=None):
        "Probe signal of `geometry` at drive frequency `omega` (rad/s)."
        geometry = self.config.geometry if geometry is None else geometry
        rho1 = self.first_order(omega)
        if geometry == "parallel":
            return signal_parallel(
                rho1, self.config.field.theta, self.basis, self.config.numerics.drive_form
            )
        return signal_perpendicular(rho1, self.basis)

    def scan(self, omegas, geometry=None):
        return np.array([self.signal(w, geometry) for w in omegas])

    def linewidth(self):
        """
        Largest decay rate among the generator eigenvalues oscillating near
        omega_L; falls back to gamma_SD + gamma_SE when none are found.
        """
        larmor = self.larmor
        eig = np.linalg.eigvals(self.system)
        near = (np.abs(eig.imag) >= 0.5 * larmor) & (np.abs(eig.imag) <= 1.5 * larmor)
        if not np.any(near):
            return self.config.rates.gamma_SD + self.config.rates.gamma_SE
        return float(np.max(-eig.real[near]))


def build_response(config, state=None):
    """
    Steady state, effective generator and drive of a configuration.

    Args:
        config (:class:`SimulationConfig`): run configuration
        state (:class:`SteadyState`): precomputed steady state

    Returns:
        :class:`LinearResponse` : response evaluator
    """
    eff = build_effective(config)
    state = solve_steady_state(config, eff) if state is None else state
    eff = eff.with_meanfields(state.meanfields)
    basis = eff.basis
    feedback = spin_exchange_feedback(basis, config.rates.gamma_SE, state.rho)
    drive = driving_superop(
        basis, config.field.B1, config.field.theta, config.numerics.drive_form
    )
    mask = None
    if config.numerics.corotating_only:
        mask = corotating_mask(basis, eff.matrix + feedback.matrix)
    return LinearResponse(config, state, eff, feedback, drive, mask)


def scan_window(response):
    """
    Scan bracket [omega_L - W, omega_L + W] with W = max(20 omega_NuZ, 50 linewidth),
    the lower edge kept positive.
    """
    config = response.config
    freqs = derived_frequencies(config.species, config.field.B0)
    larmor = TWO_PI * freqs.omega_L
    width = max(NUZ_WINDOW * TWO_PI * freqs.omega_NuZ, LINEWIDTH_WINDOW * response.linewidth())
    return max(larmor - width, 1e-3 * larmor), larmor + width


def select_crossing(omegas, values, larmor, tolerance):
    """
    Pick the sign change used for the precession frequency.

    Crossings whose slope sign differs from the steepest crossing are
    discarded; of the rest the one nearest omega_L wins.

    Args:
        omegas (array): scan frequencies, rad/s
        values (array): signal samples
        larmor (float): omega_L, rad/s
        tolerance (float): distance below which two candidates tie, rad/s

    Returns:
        int : index i of the segment [omegas[i], omegas[i + 1]]

    Raises:
        ExtractionError: no sign change
        AmbiguityError: two candidates equally close to omega_L
    """
    omegas = np.asarray(omegas, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    idx = fast_ops.sign_changes(values)
    if idx.shape[0] == 0:
        raise ExtractionError(
            "no sign change in [%.6g, %.6g] Hz" % (omegas[0] / TWO_PI, omegas[-1] / TWO_PI),
            omegas,
            values,
        )
    slopes = fast_ops.segment_slopes(omegas, values, idx)
    dominant = np.sign(slopes[np.argmax(np.abs(slopes))])
    keep = idx[np.sign(slopes) == dominant]
    locations = np.array([_interpolate(omegas, values, i) for i in keep])
    distance = np.abs(locations - larmor)
    order = np.argsort(distance)
    if len(order) > 1 and abs(distance[order[1]] - distance[order[0]]) < tolerance:
        raise AmbiguityError(
            "crossings at %.6f and %.6f Hz are equidistant from omega_L"
            % (locations[order[0]] / TWO_PI, locations[order[1]] / TWO_PI)
        )
    return int(keep[order[0]])


def _interpolate(omegas, values, i):
    if values[i] == 0.0:
        return omegas[i]
    return omegas[i] - values[i] * (omegas[i + 1] - omegas[i]) / (values[i + 1] - values[i])


def find_precession_frequency(config, geometry=None, response=None):
    """
    Zero crossing of the probe signal nearest the Larmor frequency.

    Args:
        config (:class:`SimulationConfig`): run configuration
        geometry (str): ``"parallel"`` or ``"perpendicular"`` (config default)
        response (:class:`LinearResponse`): reuse a built response

    Returns:
        :class:`PrecessionResult` : omega0 and bracket

    Raises:
        ExtractionError: no sign change in the scan window
        AmbiguityError: equidistant candidate crossings
    """
    geometry = config.geometry if geometry is None else geometry
    response = build_response(config) if response is None else response
    lo, hi = scan_window(response)
    omegas = np.linspace(lo, hi, config.numerics.scan_points)
    values = response.scan(omegas, geometry)
    larmor = response.larmor
    tol = config.numerics.root_tolerance
    i = select_crossing(omegas, values, larmor, tol)
    if values[i] == 0.0:
        root = float(omegas[i])
    else:
        root = bisect(
            lambda w: response.signal(w, geometry), omegas[i], omegas[i + 1], xtol=tol
        )
    residual = response.signal(root, geometry)
    logger.info(
        "theta=%.3f deg %s omega0=%.6f Hz", np.degrees(config.field.theta), geometry, root / TWO_PI
    )
    return PrecessionResult(
        float(root), geometry, (float(omegas[i]), float(omegas[i + 1])), residual, larmor
    )
