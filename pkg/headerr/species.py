"""
Alkali-metal species constants and the Zeeman frequencies derived from them.
"""

from dataclasses import dataclass, replace
from fractions import Fraction

from .units import G_S, MU_B_HZ, MU_N_HZ


class SpeciesError(ValueError):
    "Exception raised for invalid species constants."
    pass


VALID_TWICE_I = (1, 2, 3, 5, 7)


@dataclass(frozen=True)
class AlkaliSpecies:
    r"""
    Nuclear spin and coupling constants of one alkali isotope.

    `g_I` is the magnitude of the nuclear g-factor in nuclear magnetons; the
    nuclear Zeeman term enters as :math:`-g_I \mu_N B I_z`. Splittings are in Hz.
    """

    name: str
    twice_I: int
    g_S: float
    g_I: float
    delta_S: float
    delta_P: float
    element: str = ""

    def __post_init__(self):
        if self.twice_I not in VALID_TWICE_I:
            raise SpeciesError(
                "nuclear spin I=%s not in {1/2, 1, 3/2, 5/2, 7/2}"
                % Fraction(self.twice_I, 2)
            )
        if not (self.delta_S > self.delta_P > 0):
            raise SpeciesError(
                "need delta_S > delta_P > 0, got delta_S=%g Hz, delta_P=%g Hz"
                % (self.delta_S, self.delta_P)
            )
        if self.g_S <= 0 or self.g_I < 0:
            raise SpeciesError("g_S must be positive and g_I non-negative")

    @property
    def nuclear_spin(self):
        return Fraction(self.twice_I, 2)

    @property
    def twice_a(self):
        return self.twice_I + 1

    @property
    def twice_b(self):
        return self.twice_I - 1

    @property
    def manifold_dim(self):
        "Number of states per sector, 2(2I+1)."
        return 2 * (self.twice_I + 1)

    @property
    def mu_eff(self):
        "Effective magneton (g_S mu_B + g_I mu_N)/(2I+1) in Hz/T."
        return (self.g_S * MU_B_HZ + self.g_I * MU_N_HZ) / (self.twice_I + 1)


SPECIES = {
    "Rb85": AlkaliSpecies("Rb85", 5, G_S, 0.539167, 3.035732439e9, 361.58e6, "Rb"),
    "Rb87": AlkaliSpecies("Rb87", 3, G_S, 1.827237, 6.834682611e9, 814.5e6, "Rb"),
    "Cs133": AlkaliSpecies("Cs133", 7, G_S, 0.732357, 9.192631770e9, 1167.68e6, "Cs"),
    "K39": AlkaliSpecies("K39", 3, G_S, 0.260610, 461.7197e6, 57.7e6, "K"),
}


def get_species(name, **overrides):
    """
    Look up a registered species, optionally overriding constants.

    Args:
        name (str): registry key, e.g. ``"Rb85"``
        **overrides: field values replacing the tabulated ones

    Returns:
        :class:`AlkaliSpecies` : species

    Raises:
        SpeciesError: unknown name
    """
    if name not in SPECIES:
        raise SpeciesError(
            "unknown species %r (known: %s)" % (name, ", ".join(sorted(SPECIES)))
        )
    return replace(SPECIES[name], **overrides)


@dataclass(frozen=True)
class DerivedFrequencies:
    "Closed-form Zeeman frequencies, all in Hz (mu_eff in Hz/T)."
    mu_eff: float
    omega_L: float
    omega_rev: float
    omega_NuZ: float


def derived_frequencies(species, B0):
    """
    Larmor, quantum-beat revival and nuclear-Zeeman frequencies at field `B0`.

    Args:
        species (:class:`AlkaliSpecies`): atom
        B0 (float): static field, T (sign ignored)

    Returns:
        :class:`DerivedFrequencies` : frequencies in Hz
    """
    omega_L = species.mu_eff * abs(B0)
    return DerivedFrequencies(
        mu_eff=species.mu_eff,
        omega_L=omega_L,
        omega_rev=omega_L ** 2 / species.delta_S,
        omega_NuZ=species.g_I * MU_N_HZ * abs(B0),
    )
