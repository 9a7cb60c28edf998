"""
Physical constants and unit handling shared by every module.

Internally energies and frequencies are angular (rad/s); at the edges
(config files, tables) frequencies are ordinary Hz and angles are degrees.
"""

import math
import re

from scipy.constants import physical_constants

TWO_PI = 2.0 * math.pi

# Frequency per tesla, Hz/T.
MU_B_HZ = physical_constants["Bohr magneton in Hz/T"][0]
MU_N_HZ = physical_constants["nuclear magneton in MHz/T"][0] * 1e6
G_S = abs(physical_constants["electron g factor"][0])


class UnitError(ValueError):
    "Exception raised for quantities that cannot be parsed."
    pass


SUFFIXES = {
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "µT": 1e-6, "nT": 1e-9, "pT": 1e-12},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6},
    "pressure": {"Torr": 1.0, "mTorr": 1e-3},
    "rate": {"1/s": 1.0, "/s": 1.0, "s^-1": 1.0},
    "angle": {"deg": 1.0, "°": 1.0},
    "temperature": {"K": 1.0},
    "number": {},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def hz_to_rad(f):
    r":math:`f(x) = 2 \pi x`"
    return TWO_PI * f


def rad_to_hz(w):
    r":math:`f(x) = x / 2 \pi`"
    return w / TWO_PI


def parse_quantity(text, kind):
    """
    Parse a number with an optional unit suffix into the base unit of `kind`.

    Bare numbers are taken to be in the base unit (T, Hz, W, m, Torr, 1/s,
    degrees, K). Temperatures also accept a `C` suffix for Celsius.

    Args:
        text (str): value such as ``"55uT"`` or ``"4 GHz"``
        kind (str): one of the keys of :data:`SUFFIXES`

    Returns:
        float : value in the base unit

    Raises:
        UnitError: malformed number or unknown suffix
    """
    if isinstance(text, (int, float)):
        return float(text)
    match = _QUANTITY.match(text)
    if match is None:
        raise UnitError("cannot parse quantity %r" % (text,))
    value, suffix = float(match.group(1)), match.group(2)
    if not suffix:
        return value
    if kind == "temperature" and suffix in ("C", "°C"):
        return value + 273.15
    table = SUFFIXES[kind]
    if suffix not in table:
        raise UnitError(
            "unknown %s unit %r in %r (expected one of %s)"
            % (kind, suffix, text, ", ".join(sorted(table)))
        )
    return value * table[suffix]


def format_sig(x, digits=6):
    "Format a float with `digits` significant digits; empty string for None."
    if x is None:
        return ""
    return "%.*g" % (digits, x)
