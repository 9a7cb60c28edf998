"""
Hamiltonians, RF drive and dissipators of the optically pumped alkali atom,
and their assembly into the light-coupled generator L0 on the full superspace.

All energies are in rad/s. Rates enter unchanged (1/s).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import EffectToggles, RateConfig
from .spin_algebra import (
    BasisError,
    LabeledOperator,
    build_basis,
    dipole_jump_operators,
    spin_operators,
)
from .superop import (
    Superoperator,
    commutator_superop,
    expectation_row,
    lindblad_superop,
    sandwich,
    spost,
    spre,
    vec,
)
from .units import MU_B_HZ, MU_N_HZ, TWO_PI

PERTURBATIVE_LIMIT = 0.05
MEANFIELD_TOL = 1e-12


class MeanFieldError(ValueError):
    "Exception raised for spin-exchange mean fields outside |<S_z>| <= 1/2."
    pass


class ZeemanValidityError(ValueError):
    "Exception raised when the second-order Zeeman expansion is untrustworthy."
    pass


@dataclass(frozen=True)
class MeanFields:
    "Ground-state electron-spin expectation values <S_z> and <S_+>."
    s_z: float = 0.0
    s_plus: complex = 0.0

    def __post_init__(self):
        if abs(self.s_z) > 0.5 + MEANFIELD_TOL:
            raise MeanFieldError("|<S_z>| <= 1/2 violated (<S_z>=%g)" % self.s_z)

    @property
    def s_minus(self):
        return np.conj(self.s_plus)

    @classmethod
    def from_state(cls, basis, rho_ground):
        "Mean fields of a ground-sector density matrix."
        ops = spin_operators(basis)
        s_z = float(np.real(np.trace(ops.ground("S_z") @ rho_ground)))
        s_plus = complex(np.trace(ops.ground("S_plus") @ rho_ground))
        return cls(float(np.clip(s_z, -0.5, 0.5)), s_plus)


def _op(basis, matrix, sector="full", hermitian=True):
    return LabeledOperator(basis, matrix, sector, hermitian)


def hamiltonian_hf(basis, detuning):
    """
    Hyperfine structure in the frame rotating with the pump.

    Diagonal: Delta_S on |a m>_S, 0 on |b m>_S, Delta on |a m>_P and
    Delta - Delta_P on |b m>_P.

    Args:
        basis (:class:`HyperfineBasis`): basis
        detuning (float): pump detuning Delta, rad/s

    Returns:
        :class:`LabeledOperator` : Hamiltonian, rad/s
    """
    species = basis.species
    levels = {
        ("S", "a"): TWO_PI * species.delta_S,
        ("S", "b"): 0.0,
        ("P", "a"): detuning,
        ("P", "b"): detuning - TWO_PI * species.delta_P,
    }
    diag = [levels[(lab.sector, lab.manifold)] for lab in basis.labels]
    return _op(basis, np.diag(diag))


def hamiltonian_zeeman(basis, B_z, mode="perturbative", toggles=EffectToggles()):
    """
    Static-field Zeeman Hamiltonian.

    exact: g_S mu_B B S_z - g_I mu_N B I_z on both sectors (the nuclear
    term is dropped when `toggles.nuz` is off).

    perturbative: diagonal ground-sector levels
    E(a/b, m) = (+-mu_eff - [nuz] g_I mu_N) B m -+ [nlz] omega_rev m^2.

    Args:
        basis (:class:`HyperfineBasis`): basis
        B_z (float): field along z, T (signed)
        mode (str): ``"exact"`` or ``"perturbative"``
        toggles (:class:`EffectToggles`): effect switches

    Returns:
        :class:`LabeledOperator` : Hamiltonian, rad/s

    Raises:
        ZeemanValidityError: perturbative mode with |mu_eff B|/Delta_S > 0.05
    """
    species = basis.species
    if mode == "exact":
        ops = spin_operators(basis)
        electron = TWO_PI * species.g_S * MU_B_HZ * B_z
        nuclear = TWO_PI * species.g_I * MU_N_HZ * B_z if toggles.nuz else 0.0
        return _op(basis, electron * ops.S_z.matrix - nuclear * ops.I_z.matrix)
    if mode != "perturbative":
        raise ValueError("unknown Zeeman mode %r" % (mode,))

    larmor = species.mu_eff * B_z
    if abs(larmor) / species.delta_S > PERTURBATIVE_LIMIT:
        raise ZeemanValidityError(
            "|mu_eff B0|/delta_S = %.3g exceeds %g; use zeeman_mode = exact"
            % (abs(larmor) / species.delta_S, PERTURBATIVE_LIMIT)
        )
    revival = larmor ** 2 / species.delta_S
    nuclear = species.g_I * MU_N_HZ * B_z if toggles.nuz else 0.0
    diag = np.zeros(basis.dim)
    for i, lab in enumerate(basis.ground_labels):
        sign = 1.0 if lab.manifold == "a" else -1.0
        energy = (sign * larmor - nuclear) * lab.m
        if toggles.nlz:
            energy -= sign * revival * lab.m ** 2
        diag[i] = TWO_PI * energy
    return _op(basis, np.diag(diag))


def hamiltonian_light(basis, pump, theta):
    """
    Pump coupling for a beam along (sin t, 0, cos t).

    sigma+: -Omega[(cos t + 1) A_+ + (cos t - 1) A_- + (A_0- - A_0+) sin t] + h.c.,
    which is the theta = 0 coupling rotated by exp(-i t J_y). The pi part
    carries the sign of m_J. sigma- swaps the A_+ and A_- coefficients.

    Args:
        basis (:class:`HyperfineBasis`): basis
        pump (:class:`PumpConfig`): Rabi frequency and helicity
        theta (float): tilt angle, rad

    Returns:
        :class:`LabeledOperator` : Hamiltonian, rad/s
    """
    dip = dipole_jump_operators(basis)
    c_plus, c_minus = np.cos(theta) + 1.0, np.cos(theta) - 1.0
    if pump.helicity < 0:
        c_plus, c_minus = c_minus, c_plus
    v = -pump.rabi * (
        c_plus * dip.A_plus.matrix
        + c_minus * dip.A_minus.matrix
        + np.sin(theta) * (dip.A0_minus.matrix - dip.A0_plus.matrix)
    )
    return _op(basis, v + v.conj().T)


def hamiltonian_aux(basis, field, helicity, mode="perturbative"):
    """
    Auxiliary field Ba along the pump axis, parallel for sigma+ and
    antiparallel for sigma-. Ground sector only in perturbative mode.

    Args:
        basis (:class:`HyperfineBasis`): basis
        field (:class:`FieldConfig`): Ba and theta
        helicity (int): +1 or -1
        mode (str): Zeeman mode

    Returns:
        :class:`LabeledOperator` : Hamiltonian, rad/s
    """
    ops = spin_operators(basis)
    species = basis.species
    s, c = np.sin(field.theta), np.cos(field.theta)
    electron = TWO_PI * species.g_S * MU_B_HZ * field.Ba * helicity
    nuclear = TWO_PI * species.g_I * MU_N_HZ * field.Ba * helicity
    h = electron * (s * ops.S_x.matrix + c * ops.S_z.matrix) - nuclear * (
        s * ops.I_x.matrix + c * ops.I_z.matrix
    )
    if mode == "perturbative":
        n = basis.ground_dim
        h[n:, :] = 0.0
        h[:, n:] = 0.0
    return _op(basis, h)


def probe_operator(basis, theta, form="full"):
    "Ground-sector S_x cos(theta) - S_z sin(theta); the rwa form drops S_z."
    ops = spin_operators(basis)
    o = np.cos(theta) * ops.ground("S_x")
    if form == "full":
        o = o - np.sin(theta) * ops.ground("S_z")
    elif form != "rwa":
        raise ValueError("unknown drive form %r" % (form,))
    return _op(basis, o, "ground")


def driving_superop(basis, B1, theta, form="full"):
    """
    Time-independent RF coupling L1 rho = -i g_S mu_B B1 [S_x cos t - S_z sin t, rho]
    on the ground sector.

    Args:
        basis (:class:`HyperfineBasis`): basis
        B1 (float): RF amplitude, T
        theta (float): tilt angle, rad
        form (str): ``"full"`` or ``"rwa"`` (drops S_z sin theta)

    Returns:
        :class:`Superoperator` : ground-sector generator
    """
    omega_1 = TWO_PI * basis.species.g_S * MU_B_HZ * B1
    return commutator_superop(omega_1 * probe_operator(basis, theta, form))


def dissipator_pp(basis, gamma_mix):
    """
    Excited-state mixing gamma_Mix (2 J.rho J - {rho, J.J}) with J the P-sector
    electronic angular momentum.

    Args:
        basis (:class:`HyperfineBasis`): basis
        gamma_mix (float): rate, 1/s

    Returns:
        :class:`Superoperator` : dissipator
    """
    return lindblad_superop(list(spin_operators(basis).J_P), gamma_mix)


def dissipator_sp(basis, gamma_Q):
    """
    Quenching Gamma_Q sum_j (2 A_j rho A_j^dagger - {rho, A_j^dagger A_j}).

    Args:
        basis (:class:`HyperfineBasis`): basis
        gamma_Q (float): rate, 1/s

    Returns:
        :class:`Superoperator` : dissipator
    """
    return lindblad_superop(list(dipole_jump_operators(basis).channels()), gamma_Q)


@dataclass(frozen=True, eq=False)
class SpinExchangeGenerators:
    """
    Linear pieces of the collision dissipator:
    L_SS = destruction + <S_z> z + <S_+> plus + <S_-> minus.
    """

    destruction: Superoperator
    z: Superoperator
    plus: Superoperator
    minus: Superoperator

    def combine(self, meanfields):
        return Superoperator(
            self.destruction.basis,
            self.destruction.matrix
            + meanfields.s_z * self.z.matrix
            + meanfields.s_plus * self.plus.matrix
            + meanfields.s_minus * self.minus.matrix,
            self.destruction.sector,
        )


def spin_exchange_generators(basis, gamma_SD, gamma_SE, sector="ground"):
    """
    Destruction and mean-field spin-exchange generators built from the
    ground-sector electron spin (zero on P when `sector` is ``"full"``).

    Args:
        basis (:class:`HyperfineBasis`): basis
        gamma_SD (float): spin-destruction rate, 1/s
        gamma_SE (float): spin-exchange rate, 1/s
        sector (str): ``"ground"`` or ``"full"``

    Returns:
        :class:`SpinExchangeGenerators` : generators
    """
    ops = spin_operators(basis)
    ground = [ops.S_x.ground(), ops.S_y.ground(), ops.S_z.ground()]
    s_plus, s_minus = ops.S_plus.ground(), ops.S_minus.ground()
    if sector == "full":
        ground = [op.embed() for op in ground]
        s_plus, s_minus = s_plus.embed(), s_minus.embed()
    s_z = ground[2]
    sp, sm, sz = s_plus.matrix, s_minus.matrix, s_z.matrix

    def superop(matrix):
        return Superoperator(basis, matrix, sector)

    destruction = lindblad_superop(ground, gamma_SD + gamma_SE)
    rate = 2.0 * gamma_SE
    z = rate * (sandwich(sp, sm) - sandwich(sm, sp) + spre(sz) + spost(sz))
    plus = rate * (sandwich(sm, sz) - sandwich(sz, sm) + 0.5 * (spre(sm) + spost(sm)))
    minus = rate * (sandwich(sz, sp) - sandwich(sp, sz) + 0.5 * (spre(sp) + spost(sp)))
    return SpinExchangeGenerators(destruction, superop(z), superop(plus), superop(minus))


def dissipator_ss(basis, gamma_SD, gamma_SE, meanfields, sector="ground"):
    """
    Ground-state collisions with spin exchange linearized about frozen mean fields:
    (g_SD + g_SE)(2 S.rho S - {rho, S.S})
    + 2 g_SE <S_z>(S+ rho S- - S- rho S+ + {rho, S_z})
    + 2 g_SE <S_+>(S- rho S_z - S_z rho S- + {rho, S-}/2) + H.c.

    Args:
        basis (:class:`HyperfineBasis`): basis
        gamma_SD (float): spin-destruction rate, 1/s
        gamma_SE (float): spin-exchange rate, 1/s
        meanfields (:class:`MeanFields`): frozen <S_z>, <S_+>
        sector (str): ``"ground"`` or ``"full"``

    Returns:
        :class:`Superoperator` : dissipator
    """
    return spin_exchange_generators(basis, gamma_SD, gamma_SE, sector).combine(meanfields)


def spin_exchange_feedback(basis, gamma_SE, rho0):
    """
    First-order spin-exchange coupling: the mean fields of the response
    <S_z rho1>, <S_+ rho1>, <S_- rho1> acting on the steady state rho0.

    Args:
        basis (:class:`HyperfineBasis`): basis
        gamma_SE (float): spin-exchange rate, 1/s
        rho0 (array): ground-sector steady state

    Returns:
        :class:`Superoperator` : ground-sector rank-3 generator
    """
    gens = spin_exchange_generators(basis, 0.0, gamma_SE, "ground")
    ops = spin_operators(basis)
    v0 = vec(rho0)
    k = (
        np.outer(gens.z.matrix @ v0, expectation_row(ops.ground("S_z")))
        + np.outer(gens.plus.matrix @ v0, expectation_row(ops.ground("S_plus")))
        + np.outer(gens.minus.matrix @ v0, expectation_row(ops.ground("S_minus")))
    )
    return Superoperator(basis, k, "ground")


@dataclass(frozen=True, eq=False)
class LiouvillianParts:
    """
    Pieces of L0 kept separate for the adiabatic elimination.

    `hamiltonian` is H_HF + H_B + H_aux; `eliminated_hamiltonian` is the part
    that acts inside the eliminated (excited and optical-coherence) block:
    H_HF, plus the Zeeman term in exact mode.
    """

    basis: object
    hamiltonian: LabeledOperator
    eliminated_hamiltonian: LabeledOperator
    light: LabeledOperator
    pp: Superoperator
    sp: Superoperator
    collisions: SpinExchangeGenerators
    rates: RateConfig
    meanfields: MeanFields

    def light_free(self):
        "Generator of the eliminated block: -i[H_elim, .] + L_PP + L_SP."
        return commutator_superop(self.eliminated_hamiltonian) + self.pp + self.sp

    def light_coupling(self):
        return commutator_superop(self.light)

    def total(self):
        "L0 = -i[H_HF + H_B + H_aux + H_LA, .] + L_PP + L_SP + L_SS."
        return (
            commutator_superop(self.hamiltonian + self.light)
            + self.pp
            + self.sp
            + self.collisions.combine(self.meanfields)
        )


def liouvillian_parts(config, meanfields=None, basis=None):
    """
    Build every piece of L0 for a configuration.

    Args:
        config (:class:`SimulationConfig`): run configuration
        meanfields (:class:`MeanFields`): frozen spin-exchange mean fields
        basis (:class:`HyperfineBasis`): basis, built from the species if omitted

    Returns:
        :class:`LiouvillianParts` : parts

    Raises:
        BasisError: basis built for another species
    """
    if basis is None:
        basis = build_basis(config.species)
    elif basis.species != config.species:
        raise BasisError("basis species %s does not match config" % basis.species.name)
    meanfields = MeanFields() if meanfields is None else meanfields
    mode = config.numerics.zeeman_mode
    field = config.field
    h_hf = hamiltonian_hf(basis, config.pump.detuning)
    h_b = hamiltonian_zeeman(basis, field.B0, mode, config.toggles)
    h_aux = hamiltonian_aux(basis, field, config.pump.helicity, mode)
    eliminated = h_hf + h_b if mode == "exact" else h_hf
    rates = config.rates
    return LiouvillianParts(
        basis=basis,
        hamiltonian=h_hf + h_b + h_aux,
        eliminated_hamiltonian=eliminated,
        light=hamiltonian_light(basis, config.pump, field.theta),
        pp=dissipator_pp(basis, rates.gamma_mix),
        sp=dissipator_sp(basis, rates.gamma_Q),
        collisions=spin_exchange_generators(
            basis, rates.gamma_SD, rates.gamma_SE, "full"
        ),
        rates=rates,
        meanfields=meanfields,
    )


def assemble_L0(config, meanfields: Optional[MeanFields] = None):
    """
    Full-space generator L0 of the light-coupled atom without the RF drive.

    Args:
        config (:class:`SimulationConfig`): run configuration
        meanfields (:class:`MeanFields`): frozen mean fields (zero if omitted)

    Returns:
        :class:`Superoperator` : generator on the full superspace
    """
    return liouvillian_parts(config, meanfields).total()
