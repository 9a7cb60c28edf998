"""
Brute-force cross-checks of the effective model: time-domain integration of
the full master equation with the explicit cos(omega t) drive, and exact
diagonalization of the ground-state Zeeman Hamiltonian.

These are slow. The test suite runs them only under ``-m slow``.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, solve

from . import fast_ops
from .config import parse_config
from .model import (
    MeanFields,
    hamiltonian_hf,
    hamiltonian_zeeman,
    liouvillian_parts,
    probe_operator,
)
from .reduction import ConvergenceError, solve_steady_state
from .response import ExtractionError, build_response, find_precession_frequency
from .spin_algebra import BasisLabel, build_basis, spin_operators
from .superop import commutator_superop, expectation_row, unvec, vec
from .units import MU_B_HZ, TWO_PI

logger = logging.getLogger(__name__)

MIN_PERIODS = 20
SETTLE_DESTRUCTION = 10.0
SETTLE_TRANSVERSE = 15.0
ORACLE_RABI_SCALE = 0.25
ORACLE_B1 = 50e-12


class StiffnessError(RuntimeError):
    "Exception raised when the time integration fails."
    pass


class PrecisionError(ValueError):
    "Exception raised when a trace is too short to demodulate."
    pass


class LabelingError(RuntimeError):
    "Exception raised when Zeeman levels cannot be followed continuously from zero field."
    pass


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """
    Sampled expectation values on a uniform time grid (s). `probe` is
    <S_x cos t - S_z sin t>; `trace_error` and `min_eigenvalue` are the worst
    |Tr rho - 1| and smallest eigenvalue over all samples.
    """

    times: np.ndarray
    s_x: np.ndarray = None
    s_y: np.ndarray = None
    s_z: np.ndarray = None
    f_z: np.ndarray = None
    probe: np.ndarray = None
    trace_error: float = 0.0
    min_eigenvalue: float = 0.0
    final_state: Optional[np.ndarray] = None


class FullModel:
    """
    Full-space generator L(t) = L_static + mean-field spin exchange of the
    current state + cos(omega t) L_drive.
    """

    def __init__(self, config):
        self.config = config
        parts = liouvillian_parts(config)
        self.basis = parts.basis
        ops = spin_operators(self.basis)
        exchange = parts.collisions
        self.static = (
            parts.light_coupling().matrix
            + commutator_superop(parts.hamiltonian).matrix
            + parts.pp.matrix
            + parts.sp.matrix
            + exchange.destruction.matrix
        )
        self.z = exchange.z.matrix
        self.plus = exchange.plus.matrix
        self.minus = exchange.minus.matrix
        omega_1 = TWO_PI * config.species.g_S * MU_B_HZ * config.field.B1
        probe = probe_operator(self.basis, config.field.theta, config.numerics.drive_form)
        self.probe = probe.embed()
        self.drive = commutator_superop(omega_1 * self.probe).matrix
        self.rows = dict(
            s_z=expectation_row(ops.S_z.ground().embed()),
            s_plus=expectation_row(ops.S_plus.ground().embed()),
        )

    @property
    def dim(self):
        return self.basis.dim

    def meanfields(self, y):
        s_z = float(np.clip(np.real(self.rows["s_z"] @ y), -0.5, 0.5))
        return MeanFields(s_z, complex(self.rows["s_plus"] @ y))

    def generator(self, t, y, omega):
        mf = self.meanfields(y)
        matrix = (
            self.static
            + mf.s_z * self.z
            + mf.s_plus * self.plus
            + mf.s_minus * self.minus
        )
        if omega:
            matrix = matrix + np.cos(omega * t) * self.drive
        return matrix


def full_steady_state(config, tolerance=1e-10, max_iterations=200, damping=0.5):
    """
    Undriven steady state of the full generator with self-consistent mean fields.

    Args:
        config (:class:`SimulationConfig`): run configuration
        tolerance (float): convergence threshold on <S_z>
        max_iterations (int): iteration cap
        damping (float): mean-field mixing factor

    Returns:
        array : full-space density matrix

    Raises:
        ConvergenceError: mean fields did not settle
    """
    model = FullModel(config)
    d = model.dim
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    meanfields = solve_steady_state(config).meanfields
    for _ in range(max_iterations):
        a = (
            model.static
            + meanfields.s_z * model.z
            + meanfields.s_plus * model.plus
            + meanfields.s_minus * model.minus
        ).copy()
        a[0, :] = vec(np.eye(d))
        rho = unvec(solve(a, rhs), d)
        rho = 0.5 * (rho + rho.conj().T)
        target = model.meanfields(vec(rho))
        if abs(target.s_z - meanfields.s_z) < tolerance and abs(
            target.s_plus - meanfields.s_plus
        ) < tolerance:
            return rho
        meanfields = MeanFields(
            meanfields.s_z + damping * (target.s_z - meanfields.s_z),
            meanfields.s_plus + damping * (target.s_plus - meanfields.s_plus),
        )
    raise ConvergenceError("full steady state did not converge in %d steps" % max_iterations)


def settle_time(config):
    """
    Transient duration max(10/gamma_SD, 15/Gamma_2), with Gamma_2 the slowest
    decay among the effective-generator modes oscillating near omega_L.
    """
    destruction = SETTLE_DESTRUCTION / config.rates.gamma_SD if config.rates.gamma_SD > 0 else 0.0
    response = build_response(config)
    eig = np.linalg.eigvals(response.system)
    larmor = response.larmor
    near = (np.abs(eig.imag) >= 0.5 * larmor) & (np.abs(eig.imag) <= 1.5 * larmor)
    decay = -eig.real[near]
    decay = decay[decay > 0]
    transverse = SETTLE_TRANSVERSE / decay.min() if decay.size else 0.0
    return max(destruction, transverse)


def _embed(basis, rho_ground):
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    n = basis.ground_dim
    rho[:n, :n] = rho_ground
    return rho


def integrate_full(
    config,
    drive_omega=None,
    duration=None,
    settle=None,
    periods=MIN_PERIODS,
    samples_per_period=32,
    samples=400,
    initial=None,
    method="BDF",
    rtol=1e-9,
    atol=1e-12,
):
    """
    Integrate the full master equation, skip the transient, and sample the
    spin expectation values.

    With a drive the record spans `periods` drive periods (or `duration`),
    sampled `samples_per_period` times per period; without one it spans
    `duration` with `samples` points.

    Args:
        config (:class:`SimulationConfig`): run configuration
        drive_omega (float): RF frequency, rad/s (None for no drive)
        duration (float): record length, s
        settle (float): transient to skip, s (:func:`settle_time` if omitted)
        periods (int): drive periods recorded
        samples_per_period (int): samples per drive period
        samples (int): samples of an undriven record
        initial (array): full-space initial state (effective steady state if omitted)
        method (str): :func:`scipy.integrate.solve_ivp` method
        rtol (float): relative tolerance
        atol (float): absolute tolerance

    Returns:
        :class:`TimeTrace` : sampled trace

    Raises:
        StiffnessError: integrator failure
    """
    model = FullModel(config)
    basis = model.basis
    if initial is None:
        initial = _embed(basis, solve_steady_state(config).rho)
    settle = settle_time(config) if settle is None else settle

    if drive_omega:
        period = TWO_PI / drive_omega
        window = periods * period if duration is None else duration
        count = int(round(window / period * samples_per_period))
    else:
        if duration is None:
            raise ValueError("an undriven integration needs a duration")
        window, count = duration, samples
    times = settle + np.arange(count) * (window / count)

    def rhs(t, y):
        return model.generator(t, y, drive_omega) @ y

    def jac(t, y):
        return model.generator(t, y, drive_omega)

    options = dict(jac=jac) if method in ("BDF", "Radau", "LSODA") else {}
    sol = solve_ivp(
        rhs,
        (0.0, times[-1]),
        vec(initial),
        method=method,
        t_eval=times,
        rtol=rtol,
        atol=atol,
        **options,
    )
    if not sol.success:
        raise StiffnessError(
            "%s integration failed (%s); reduce the Rabi frequency or raise the rates"
            % (method, sol.message)
        )
    logger.info("%s: %d right-hand-side evaluations", method, sol.nfev)

    ops = spin_operators(basis)
    observables = dict(
        s_x=ops.S_x.ground().embed().matrix,
        s_y=ops.S_y.ground().embed().matrix,
        s_z=ops.S_z.ground().embed().matrix,
        f_z=ops.F_z.ground().embed().matrix,
        probe=model.probe.matrix,
    )
    values = {name: np.zeros(len(times)) for name in observables}
    trace_error, min_eig = 0.0, np.inf
    eye = np.eye(basis.dim)
    for k in range(len(times)):
        rho = unvec(sol.y[:, k], basis.dim)
        for name, op in observables.items():
            values[name][k] = np.real(np.trace(op @ rho))
        trace_error = max(trace_error, abs(np.trace(eye @ rho) - 1.0))
        min_eig = min(min_eig, eigh(0.5 * (rho + rho.conj().T), eigvals_only=True)[0])
    return TimeTrace(
        times=times,
        trace_error=float(trace_error),
        min_eigenvalue=float(min_eig),
        final_state=unvec(sol.y[:, -1], basis.dim),
        **values,
    )


def demodulate(trace, drive_omega, observables=("s_x", "s_y", "s_z", "probe")):
    """
    Lock-in projection onto cos(omega t) and sin(omega t) over the largest
    whole number of drive periods in the trace.

    Args:
        trace (:class:`TimeTrace`): uniformly sampled trace
        drive_omega (float): reference frequency, rad/s
        observables (tuple): trace fields to demodulate

    Returns:
        dict : name -> (in_phase, out_of_phase)

    Raises:
        PrecisionError: fewer than 20 whole periods
    """
    times = np.asarray(trace.times, dtype=np.float64)
    dt = times[1] - times[0]
    period = TWO_PI / drive_omega
    whole = int(np.floor((times[-1] - times[0] + dt) / period + 1e-9))
    if whole < MIN_PERIODS:
        raise PrecisionError(
            "trace spans %d whole periods; at least %d needed" % (whole, MIN_PERIODS)
        )
    keep = times < times[0] + whole * period - 0.5 * dt
    names = [name for name in observables if getattr(trace, name) is not None]
    samples = np.array([np.asarray(getattr(trace, name))[keep] for name in names])
    result = fast_ops.lockin(samples, times[keep], drive_omega)
    return {name: (float(result[k, 0]), float(result[k, 1])) for k, name in enumerate(names)}


def oracle_signal(trace, drive_omega, geometry="parallel"):
    """
    Demodulated signal matching the effective model's conventions: the
    in-phase part of the probe for the parallel geometry, the negated
    quadrature of <S_y> for the perpendicular one.
    """
    demod = demodulate(trace, drive_omega, ("probe", "s_y"))
    if geometry == "parallel":
        return demod["probe"][0]
    return -demod["s_y"][1]


def oracle_zero_crossing(config, offsets=(-3.0, 0.0, 3.0), settle=None, geometry=None, **options):
    """
    omega0 from time-domain runs at drive frequencies offset (Hz) from the
    effective-model zero crossing, by linear interpolation of the sign change.

    Args:
        config (:class:`SimulationConfig`): run configuration
        offsets (tuple): drive offsets, Hz
        settle (float): transient to skip, s
        geometry (str): probe geometry
        **options: forwarded to :func:`integrate_full`

    Returns:
        float : omega0, rad/s

    Raises:
        ExtractionError: the demodulated signal does not change sign
    """
    geometry = config.geometry if geometry is None else geometry
    center = find_precession_frequency(config, geometry).omega0
    initial = full_steady_state(config)
    settle = settle_time(config) if settle is None else settle
    omegas = center + TWO_PI * np.asarray(offsets, dtype=np.float64)
    values = []
    for omega in omegas:
        trace = integrate_full(config, omega, settle=settle, initial=initial, **options)
        values.append(oracle_signal(trace, omega, geometry))
    values = np.array(values)
    idx = fast_ops.sign_changes(values)
    if idx.shape[0] == 0:
        raise ExtractionError("oracle signal has no sign change", omegas, values)
    i = int(idx[0])
    if values[i] == 0.0:
        return float(omegas[i])
    return float(
        omegas[i] - values[i] * (omegas[i + 1] - omegas[i]) / (values[i + 1] - values[i])
    )


@dataclass(frozen=True)
class ZeemanSpectrum:
    "Ground-state energies (Hz) labeled by their zero-field |F m> state."
    labels: Tuple[BasisLabel, ...]
    energies: np.ndarray

    def energy(self, manifold, m):
        for label, energy in zip(self.labels, self.energies):
            if label.manifold == manifold and label.twice_m == int(round(2 * m)):
                return float(energy)
        raise KeyError((manifold, m))

    def spacings(self, manifold):
        "E(m+1) - E(m) for m ascending, Hz."
        levels = sorted(
            (label.twice_m, energy)
            for label, energy in zip(self.labels, self.energies)
            if label.manifold == manifold
        )
        return np.diff([energy for _, energy in levels])


def exact_zeeman_spectrum(species, B0, steps=64):
    """
    Diagonalize hyperfine + exact Zeeman in each m block, following every
    level from zero field to `B0` by eigenvector overlap.

    Args:
        species (:class:`AlkaliSpecies`): atom
        B0 (float): field, T
        steps (int): continuation steps

    Returns:
        :class:`ZeemanSpectrum` : energies in basis order

    Raises:
        LabelingError: a level cannot be followed (overlap below 1/sqrt 2)
    """
    basis = build_basis(species)
    n = basis.ground_dim
    hf = hamiltonian_hf(basis, 0.0).matrix[:n, :n]
    energies = np.zeros(n)
    labels = basis.ground_labels
    for twice_m in sorted(set(label.twice_m for label in labels)):
        block = [i for i, label in enumerate(labels) if label.twice_m == twice_m]
        vectors = np.eye(len(block))
        values = np.real(np.diag(hf)[block])
        for field in np.linspace(0.0, B0, steps + 1)[1:]:
            h = hf + hamiltonian_zeeman(basis, field, "exact").matrix[:n, :n]
            new_values, new_vectors = eigh(h[np.ix_(block, block)])
            overlap = np.abs(vectors.conj().T @ new_vectors)
            order = np.argmax(overlap, axis=1)
            if len(set(order)) != len(order) or np.any(
                overlap[np.arange(len(block)), order] < 1 / np.sqrt(2)
            ):
                raise LabelingError(
                    "level crossing at B=%g T in the m=%g block" % (field, twice_m / 2)
                )
            vectors = new_vectors[:, order]
            values = new_values[order]
        energies[block] = values / TWO_PI
    return ZeemanSpectrum(labels, energies)


def curated_configs(base=None):
    """
    The oracle's operating points: the bundled 85Rb setup at 55 uT with its
    true collision rates and exact Zeeman levels, pumped at a fraction of its
    Rabi frequency and driven by a weak RF field. Points are 0 and 30 deg
    sigma+ and 30 deg sigma-.

    Args:
        base (:class:`SimulationConfig`): setup to start from (bundled config if omitted)

    Returns:
        list of :class:`SimulationConfig` : three configurations
    """
    base = parse_config("rb85_55uT") if base is None else base
    base = replace(
        base,
        field=replace(base.field, B1=ORACLE_B1),
        pump=replace(base.pump, rabi=ORACLE_RABI_SCALE * base.pump.rabi),
    ).with_numerics(zeeman_mode="exact")
    return [
        base.with_helicity(helicity).with_theta(np.radians(theta_deg))
        for theta_deg, helicity in ((0.0, 1), (30.0, 1), (30.0, -1))
    ]
