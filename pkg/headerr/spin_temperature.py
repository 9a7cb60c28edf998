"""
Closed-form spin-temperature estimates: the polarization reached by
depopulation pumping against relaxation, the exp(beta F_z) distribution it
implies, and the incoherent precession frequency of that distribution.
"""

from dataclasses import dataclass

import numpy as np

from .config import EffectToggles
from .model import hamiltonian_zeeman
from .spin_algebra import build_basis, spin_operators
from .units import TWO_PI
from .vapor import optical_linewidth

INITIAL_LIMIT = 0.49


class PolarizationError(ValueError):
    "Exception raised when a spin-temperature polarization has no finite beta."
    pass


@dataclass(frozen=True)
class SpinTemperature:
    s_z: float
    beta: float
    populations: np.ndarray = None

    @property
    def rho(self):
        "Ground-sector density matrix exp(beta F_z)/Tr."
        if self.populations is None:
            return None
        return np.diag(self.populations).astype(complex)


def spin_temperature_polarization(R_op, gamma_rel, theta, species=None):
    r"""
    Electron polarization of a tilted pump against relaxation ::

      <S_z> = 2 R cos(t) / (R [(cos t + 1)^2 + (cos t - 1)^2] + 2 Gamma_rel)

    and the spin temperature e^beta = (1 + 2<S_z>)/(1 - 2<S_z>).

    Args:
        R_op (float): optical pumping rate, 1/s
        gamma_rel (float): relaxation rate, 1/s
        theta (float): tilt angle, rad
        species (:class:`AlkaliSpecies`): if given, also build exp(beta F_z)/Tr

    Returns:
        :class:`SpinTemperature` : polarization, beta and populations in basis order

    Raises:
        PolarizationError: both rates zero, negative rates, or |<S_z>| = 1/2
    """
    if R_op < 0 or gamma_rel < 0 or R_op + gamma_rel == 0:
        raise PolarizationError("need R_op, gamma_rel >= 0, not both zero")
    c = np.cos(theta)
    s_z = 2 * R_op * c / (R_op * ((c + 1) ** 2 + (c - 1) ** 2) + 2 * gamma_rel)
    if abs(s_z) >= 0.5:
        raise PolarizationError("|<S_z>| = 1/2: spin temperature is infinite")
    beta = float(np.log((1 + 2 * s_z) / (1 - 2 * s_z)))
    populations = None
    if species is not None:
        m = build_basis(species).twice_m("S") / 2.0
        weights = np.exp(beta * (m - m.max()))
        populations = weights / weights.sum()
    return SpinTemperature(float(s_z), beta, populations)


def estimate_pumping(config):
    """
    Resonance-weighted pumping rate R = 4 Omega^2 G / (G^2 + Delta^2) with G the
    optical linewidth, and relaxation rate 2 gamma_SD.

    Args:
        config (:class:`SimulationConfig`): run configuration

    Returns:
        tuple : (R_op, gamma_rel) in 1/s
    """
    width = optical_linewidth(config.rates)
    rabi, detuning = config.pump.rabi, config.pump.detuning
    r_op = 4 * rabi ** 2 * width / (width ** 2 + detuning ** 2) if width > 0 else 0.0
    return r_op, 2 * config.rates.gamma_SD


def initial_polarization(config):
    "Helicity-signed spin-temperature <S_z> used to seed the mean-field iteration."
    r_op, gamma_rel = estimate_pumping(config)
    if r_op + gamma_rel == 0:
        return 0.0
    c = np.cos(config.field.theta)
    s_z = 2 * r_op * c / (r_op * ((c + 1) ** 2 + (c - 1) ** 2) + 2 * gamma_rel)
    return float(np.clip(config.pump.helicity * s_z, -INITIAL_LIMIT, INITIAL_LIMIT))


def spin_temperature_frequency(species, B0, beta, toggles=EffectToggles()):
    """
    Precession frequency of a spin-temperature state: the mean of the adjacent
    Zeeman spacings of both manifolds, each weighted by
    |<F m+1|[S_x, rho_beta]|F m>| (by |<F m+1|S_x|F m>| as beta -> 0).

    Args:
        species (:class:`AlkaliSpecies`): atom
        B0 (float): static field, T
        beta (float): spin temperature
        toggles (:class:`EffectToggles`): NLZ / NuZ switches

    Returns:
        float : frequency, Hz
    """
    basis = build_basis(species)
    energies = np.real(np.diag(hamiltonian_zeeman(basis, B0, "perturbative", toggles).matrix))
    s_x = spin_operators(basis).ground("S_x")
    m = basis.twice_m("S") / 2.0
    if beta == 0:
        p = None
    else:
        w = np.exp(beta * (m - m.max()))
        p = w / w.sum()

    total = weight_sum = 0.0
    for manifold in ("a", "b"):
        rows = basis.indices("S", manifold)
        for lo, hi in zip(rows[:-1], rows[1:]):
            element = abs(s_x[hi, lo])
            weight = element if p is None else element * abs(p[lo] - p[hi])
            spacing = abs(energies[hi] - energies[lo]) / TWO_PI
            total += weight * spacing
            weight_sum += weight
    return total / weight_sum
