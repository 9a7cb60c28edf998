"""
Adiabatic elimination of the excited sector and optical coherences, and the
self-consistent steady state of the resulting ground-sector generator.
"""

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, solve

from .config import EffectToggles, NumericsConfig
from .model import MeanFields, SpinExchangeGenerators, liouvillian_parts, spin_exchange_generators
from .spin_algebra import HyperfineBasis, LabeledOperator, spin_operators
from .spin_temperature import initial_polarization
from .superop import Superoperator, commutator_superop, unvec, vec

logger = logging.getLogger(__name__)

CLIP_LIMIT = 1e-12


class EliminationError(RuntimeError):
    "Exception raised when the eliminated block of the generator is singular."
    pass


class ConvergenceError(RuntimeError):
    "Exception raised when the mean-field iteration does not converge."

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class Projectors:
    """
    P keeps the ground x ground components of a vectorized full-space
    density matrix, Q = 1 - P.
    """

    P: np.ndarray
    Q: np.ndarray
    p_index: np.ndarray
    q_index: np.ndarray


def projectors(basis):
    """
    Superspace projectors onto the ground block and its complement.

    Args:
        basis (:class:`HyperfineBasis`): basis

    Returns:
        :class:`Projectors` : P, Q and the superspace indices they keep
    """
    d, n = basis.dim, basis.ground_dim
    mask = np.zeros(d * d)
    p_index = np.array([i * d + j for i in range(n) for j in range(n)], dtype=np.int64)
    mask[p_index] = 1.0
    q_index = np.flatnonzero(mask == 0.0)
    return Projectors(np.diag(mask), np.diag(1.0 - mask), p_index, q_index)


@dataclass(frozen=True, eq=False)
class EffectiveLiouvillian:
    """
    Ground-sector generator after elimination:
    coherent (-i[H_g, .]) + collisions + pumping + light_shift.

    `pumping` and `light_shift` are the real and imaginary parts of the
    second-order term. `light_shift` is dropped from :attr:`matrix` when `ls`
    is off.
    """

    basis: HyperfineBasis
    coherent: Superoperator
    pumping: Superoperator
    light_shift: Superoperator
    exchange: SpinExchangeGenerators
    meanfields: MeanFields
    ls: bool = True

    @property
    def collisions(self):
        return self.exchange.combine(self.meanfields)

    @property
    def first_order(self):
        "P L0 P: ground Hamiltonian and collisions."
        return self.coherent + self.collisions

    @property
    def second_order(self):
        total = self.pumping
        if self.ls:
            total = total + self.light_shift
        return total

    @property
    def superop(self):
        return self.first_order + self.second_order

    @property
    def matrix(self):
        return self.superop.matrix

    def with_meanfields(self, meanfields):
        return replace(self, meanfields=meanfields)

    def with_ls(self, ls):
        return replace(self, ls=ls)


def _solve(a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            return solve(a, b)
        except (LinAlgError, LinAlgWarning) as err:
            raise EliminationError(
                "eliminated block is singular (need gamma_Q + gamma_mix > 0): %s" % err
            ) from err


def effective_liouvillian(parts, toggles=EffectToggles()):
    """
    Second-order elimination of the light coupling L1 = -i[H_LA, .] ::

      L_eff = P L0 P + P L0 (Q L0)^-1 Q L1 (Q L0)^-1 Q L1 P - P L1 (Q L0)^-1 Q L1 P

    Args:
        parts (:class:`LiouvillianParts`): pieces of L0
        toggles (:class:`EffectToggles`): `ls` keeps or drops the light shift

    Returns:
        :class:`EffectiveLiouvillian` : ground-sector generator

    Raises:
        EliminationError: singular Q block
    """
    basis = parts.basis
    proj = projectors(basis)
    p, q = proj.p_index, proj.q_index
    free = parts.light_free().matrix
    light = parts.light_coupling().matrix

    first = _solve(free[np.ix_(q, q)], light[np.ix_(q, p)])
    second = _solve(free[np.ix_(q, q)], light[np.ix_(q, q)] @ first)
    reduced = free[np.ix_(p, q)] @ second - light[np.ix_(p, q)] @ first

    rates = parts.rates
    return EffectiveLiouvillian(
        basis=basis,
        coherent=commutator_superop(parts.hamiltonian.ground()),
        pumping=Superoperator(basis, reduced.real, "ground"),
        light_shift=Superoperator(basis, 1j * reduced.imag, "ground"),
        exchange=spin_exchange_generators(basis, rates.gamma_SD, rates.gamma_SE, "ground"),
        meanfields=parts.meanfields,
        ls=toggles.ls,
    )


def build_effective(config, meanfields=None):
    "Effective generator of a configuration, with its own effect toggles."
    return effective_liouvillian(liouvillian_parts(config, meanfields), config.toggles)


@dataclass(frozen=True, eq=False)
class SteadyState:
    basis: HyperfineBasis
    populations: np.ndarray
    meanfields: MeanFields
    iterations: int
    residual: float
    converged: bool
    rho: np.ndarray
    method: str = "diagonal"

    def expectation(self, op):
        "Tr(A rho0) for a ground-sector or full operator."
        if isinstance(op, LabeledOperator):
            op = op.ground().matrix
        return np.trace(np.asarray(op) @ self.rho)

    def manifold_population(self, manifold):
        return float(np.sum(self.populations[self.basis.indices("S", manifold)]))

    @property
    def polarization(self):
        "<F_z>"
        return float(np.real(self.expectation(spin_operators(self.basis).F_z)))


def _clip(populations, context):
    low = populations.min()
    if low < -CLIP_LIMIT:
        raise ConvergenceError(
            "negative population %.3g in %s steady state" % (low, context)
        )
    if low < 0:
        logger.warning("clamping negative population %.3g to zero", low)
        populations = np.clip(populations, 0.0, None)
        populations = populations / populations.sum()
    return populations


def _diagonal_solve(eff, meanfields):
    n = eff.basis.ground_dim
    dd = np.arange(n) * (n + 1)
    a = eff.with_meanfields(meanfields).matrix[np.ix_(dd, dd)].real.copy()
    a[0, :] = 1.0
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return solve(a, rhs)


def _full_solve(eff, meanfields):
    n = eff.basis.ground_dim
    a = eff.with_meanfields(meanfields).matrix.copy()
    a[0, :] = vec(np.eye(n))
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    rho = unvec(solve(a, rhs), n)
    return 0.5 * (rho + rho.conj().T)


def steady_state(
    eff,
    rates,
    numerics: Optional[NumericsConfig] = None,
    initial: Optional[MeanFields] = None,
):
    """
    Self-consistent steady state of the effective generator.

    With frozen mean fields the populations (``diagonal``) or the whole
    ground density matrix (``full``) solve the linear system with one row
    replaced by the trace condition. The mean fields are then recomputed and
    fed back with damping until the populations stop moving.

    Args:
        eff (:class:`EffectiveLiouvillian`): generator
        rates (:class:`RateConfig`): collision rates (iteration is skipped when gamma_SE = 0)
        numerics (:class:`NumericsConfig`): method, damping, tolerance, iteration cap
        initial (:class:`MeanFields`): starting mean fields

    Returns:
        :class:`SteadyState` : converged state

    Raises:
        ConvergenceError: no convergence within `max_iterations`, or a negative population
    """
    numerics = NumericsConfig() if numerics is None else numerics
    meanfields = MeanFields() if initial is None else initial
    basis = eff.basis
    ops = spin_operators(basis)
    s_z_op = ops.ground("S_z")
    s_plus_op = ops.ground("S_plus")
    full = numerics.steady_state == "full"

    def evaluate(mf):
        if full:
            rho = _full_solve(eff, mf)
            return np.real(np.diag(rho)).copy(), rho
        p = _diagonal_solve(eff, mf)
        return p, np.diag(p).astype(complex)

    def feedback(rho):
        s_z = float(np.real(np.trace(s_z_op @ rho)))
        s_plus = complex(np.trace(s_plus_op @ rho)) if full else 0.0
        return s_z, s_plus

    populations, rho = evaluate(meanfields)
    if rates.gamma_SE == 0:
        populations = _clip(populations, numerics.steady_state)
        return SteadyState(
            basis, populations, MeanFields.from_state(basis, rho), 1, 0.0, True, rho,
            numerics.steady_state,
        )

    history = []
    residual = np.inf
    for iteration in range(1, numerics.max_iterations + 1):
        target_z, target_plus = feedback(rho)
        s_z = meanfields.s_z + numerics.damping * (target_z - meanfields.s_z)
        s_plus = meanfields.s_plus + numerics.damping * (target_plus - meanfields.s_plus)
        history.append(s_z)
        if numerics.aitken and len(history) >= 3 and iteration % 3 == 0:
            x0, x1, x2 = history[-3:]
            denom = x2 - 2 * x1 + x0
            if abs(denom) > 1e-15:
                s_z = x2 - (x2 - x1) ** 2 / denom
        s_z = float(np.clip(s_z, -0.5, 0.5))
        meanfields = MeanFields(s_z, s_plus)
        new_populations, rho = evaluate(meanfields)
        residual = float(np.max(np.abs(new_populations - populations)))
        populations = new_populations
        logger.debug("iteration %d <S_z>=%.12f change=%.3g", iteration, s_z, residual)
        if residual < numerics.tolerance and abs(target_z - s_z) < numerics.tolerance:
            populations = _clip(populations, numerics.steady_state)
            return SteadyState(
                basis, populations, MeanFields.from_state(basis, rho), iteration, residual,
                True, rho, numerics.steady_state,
            )

    state = SteadyState(
        basis, populations, meanfields, numerics.max_iterations, residual, False, rho,
        numerics.steady_state,
    )
    raise ConvergenceError(
        "mean-field iteration did not converge in %d steps (change %.3g)"
        % (numerics.max_iterations, residual),
        state,
    )


def solve_steady_state(config, eff=None):
    """
    Steady state of a configuration, seeded with the spin-temperature
    polarization estimate.

    Args:
        config (:class:`SimulationConfig`): run configuration
        eff (:class:`EffectiveLiouvillian`): generator, built if omitted

    Returns:
        :class:`SteadyState` : converged state
    """
    eff = build_effective(config) if eff is None else eff
    initial = MeanFields(initial_polarization(config))
    return steady_state(eff, config.rates, config.numerics, initial)
