from dataclasses import replace

import numpy as np
from hypothesis import settings
from hypothesis.strategies import composite, floats, integers, lists, sampled_from

from headerr import (
    FieldConfig,
    MeanFields,
    PumpConfig,
    RateConfig,
    SimulationConfig,
    get_species,
    parse_config,
)

settings.register_profile("ci", deadline=None)
settings.load_profile("ci")


species_names = sampled_from(["Rb85", "Rb87", "K39", "Cs133"])
twice_spins = sampled_from([1, 2, 3, 5, 7])
small_floats = floats(min_value=-10, max_value=10, allow_nan=False)
angles = floats(min_value=-np.pi / 2, max_value=np.pi / 2, allow_nan=False)
small_ints = integers(min_value=2, max_value=6)

DEFAULT_RATES = RateConfig(gamma_mix=5.86e10, gamma_Q=2.02e9, gamma_SD=101.9, gamma_SE=990.0)


@composite
def matrices(draw, n, numbers=small_floats):
    re = draw(lists(numbers, min_size=n * n, max_size=n * n))
    im = draw(lists(numbers, min_size=n * n, max_size=n * n))
    return np.array(re).reshape(n, n) + 1j * np.array(im).reshape(n, n)


@composite
def density_matrices(draw, n):
    "Positive, trace-one Hermitian matrices."
    a = draw(matrices(n))
    rho = a @ a.conj().T + 1e-3 * np.eye(n)
    return rho / np.trace(rho)


@composite
def meanfields(draw):
    s_z = draw(floats(min_value=-0.5, max_value=0.5, allow_nan=False))
    re = draw(floats(min_value=-0.5, max_value=0.5, allow_nan=False))
    im = draw(floats(min_value=-0.5, max_value=0.5, allow_nan=False))
    return MeanFields(s_z, re + 1j * im)


def default_config():
    return parse_config("rb85_55uT")


def toy_config(B0=55e-6, theta=0.0, helicity=1, rates=DEFAULT_RATES, rabi=2.0e6, **numerics):
    "I = 1/2 surrogate of Rb87: 8 states, cheap enough for many pipeline runs."
    species = get_species("Rb87", twice_I=1)
    config = SimulationConfig(
        species,
        FieldConfig(B0=B0, B1=1e-4 * abs(B0), theta=theta),
        PumpConfig(rabi=rabi, helicity=helicity),
        rates,
    )
    return config.with_numerics(**numerics) if numerics else config


def with_B1(config, B1):
    return replace(config, field=replace(config.field, B1=B1))


def assert_close(a, b, rel=1e-9, abs_tol=1e-12):
    assert np.isclose(a, b, rtol=rel, atol=abs_tol), "Failure x=%r y=%r" % (a, b)


def assert_close_array(a, b, rel=1e-9, abs_tol=1e-12):
    a, b = np.asarray(a), np.asarray(b)
    if not np.allclose(a, b, rtol=rel, atol=abs_tol):
        assert False, "Arrays are not close \n x=%s \n y=%s \n Diff=%s" % (a, b, a - b)
