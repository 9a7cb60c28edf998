"""
Collision rates and pump coupling derived from vapor-cell conditions.

Only rubidium is tabulated. The defaults of the bundled configuration come
from :func:`cell_rates` at 90 C, 700 Torr N2 (filled at 20 C) in a 4 mm cube
and from :func:`rabi_from_power` at 50 uW in a 4 mm beam.
"""

import math
from dataclasses import dataclass

from scipy.constants import atomic_mass, c, h, k, physical_constants

TORR = 133.322368
LOSCHMIDT = physical_constants["Loschmidt constant (273.15 K, 101.325 kPa)"][0]
ELECTRON_RADIUS = physical_constants["classical electron radius"][0]
N2_MASS = 28.0134 * atomic_mass


class VaporError(ValueError):
    "Exception raised for unsupported species or unphysical cell inputs."
    pass


@dataclass(frozen=True)
class CollisionData:
    "Cross sections (m^2), broadening and D1 line data of one element."
    mass: float
    spin_exchange: float
    destruction_buffer: float
    destruction_self: float
    quenching: float
    broadening: float  # FWHM per amagat of N2, Hz
    diffusion: float  # D0 at 273.15 K and 1 amagat, m^2/s
    d1_frequency: float  # Hz
    oscillator_strength: float


RUBIDIUM = {
    "Rb85": CollisionData(
        84.911789738 * atomic_mass, 1.9e-18, 1.0e-26, 1.6e-21, 5.8e-19,
        17.8e9, 0.19e-4, 377.107385690e12, 0.342,
    ),
    "Rb87": CollisionData(
        86.909180527 * atomic_mass, 1.9e-18, 1.0e-26, 1.6e-21, 5.8e-19,
        17.8e9, 0.19e-4, 377.107463380e12, 0.342,
    ),
}


def collision_data(species):
    if species.name not in RUBIDIUM:
        raise VaporError("no cell data for species %r (rubidium only)" % species.name)
    return RUBIDIUM[species.name]


def rubidium_number_density(temperature):
    """
    Saturated Rb vapor density from the solid/liquid vapor-pressure curves.

    Args:
        temperature (float): cell temperature, K

    Returns:
        float : atoms per m^3
    """
    if temperature <= 0:
        raise VaporError("temperature must be positive, got %g K" % temperature)
    t = temperature
    if t < 312.46:
        log_p = -94.04826 - 1961.258 / t - 0.03771687 * t + 42.57526 * math.log10(t)
    else:
        log_p = 15.88253 - 4529.635 / t + 0.00058663 * t - 2.99138 * math.log10(t)
    return 10 ** log_p * TORR / (k * t)


def _mean_speed(temperature, m1, m2):
    mu = m1 * m2 / (m1 + m2)
    return math.sqrt(8 * k * temperature / (math.pi * mu))


def cell_rates(species, temperature, n2_pressure, cell_length, fill_temperature=293.15):
    """
    gamma_SE, gamma_SD, Gamma_Q and gamma_Mix of a buffer-gas cell.

    The optical coherence of the model decays at 2 Gamma_Q + 3/4 gamma_Mix;
    gamma_Mix is chosen so this equals the N2 pressure-broadened half width.

    Args:
        species (:class:`AlkaliSpecies`): atom (rubidium)
        temperature (float): cell temperature, K
        n2_pressure (float): N2 fill pressure, Torr
        cell_length (float): side of a cubic cell, m
        fill_temperature (float): temperature at which the cell was filled, K

    Returns:
        dict : rates in 1/s keyed ``gamma_mix``, ``gamma_Q``, ``gamma_SD``, ``gamma_SE``
    """
    data = collision_data(species)
    if n2_pressure <= 0 or cell_length <= 0 or fill_temperature <= 0:
        raise VaporError("n2_pressure, length and fill_temperature must be positive")
    n_rb = rubidium_number_density(temperature)
    n_n2 = n2_pressure * TORR / (k * fill_temperature)
    amagat = n_n2 / LOSCHMIDT
    v_self = _mean_speed(temperature, data.mass, data.mass)
    v_buffer = _mean_speed(temperature, data.mass, N2_MASS)

    r_se = n_rb * data.spin_exchange * v_self
    diffusion = data.diffusion / amagat * (temperature / 273.15) ** 1.5
    r_wall = 3 * diffusion * (math.pi / cell_length) ** 2
    r_sd = (
        n_n2 * data.destruction_buffer * v_buffer
        + n_rb * data.destruction_self * v_self
        + r_wall
    )
    gamma_q = n_n2 * data.quenching * v_buffer / 4
    half_width = math.pi * data.broadening * amagat
    gamma_mix = (half_width - 2 * gamma_q) * 4 / 3
    if gamma_mix < 0:
        raise VaporError("quenching exceeds the pressure-broadened width")
    return dict(gamma_mix=gamma_mix, gamma_Q=gamma_q, gamma_SD=r_sd / 2, gamma_SE=r_se / 2)


def optical_linewidth(rates):
    "Optical-coherence decay rate 2 Gamma_Q + 3/4 gamma_Mix of the model, 1/s."
    return 2 * rates.gamma_Q + 0.75 * rates.gamma_mix


def pumping_rate_from_power(species, power, beam_diameter, rates):
    """
    Resonant optical pumping rate photon-flux x peak D1 cross section.

    Args:
        species (:class:`AlkaliSpecies`): atom (rubidium)
        power (float): pump power, W
        beam_diameter (float): beam diameter, m
        rates (:class:`RateConfig`): collision rates setting the line width

    Returns:
        float : pumping rate, 1/s
    """
    data = collision_data(species)
    if power < 0 or beam_diameter <= 0:
        raise VaporError("power must be >= 0 and beam_diameter > 0")
    width = optical_linewidth(rates)
    if width <= 0:
        raise VaporError("optical linewidth must be positive to convert power")
    fwhm_hz = width / math.pi
    cross_section = 2 * ELECTRON_RADIUS * c * data.oscillator_strength / fwhm_hz
    flux = power / (h * data.d1_frequency * math.pi * (beam_diameter / 2) ** 2)
    return flux * cross_section


def rabi_from_power(species, power, beam_diameter, rates):
    """
    Rabi frequency reproducing the resonant pumping rate, Omega = sqrt(R Gamma / 4).

    Args:
        species (:class:`AlkaliSpecies`): atom (rubidium)
        power (float): pump power, W
        beam_diameter (float): beam diameter, m
        rates (:class:`RateConfig`): collision rates

    Returns:
        float : Omega, rad/s
    """
    r = pumping_rate_from_power(species, power, beam_diameter, rates)
    return math.sqrt(r * optical_linewidth(rates) / 4)
