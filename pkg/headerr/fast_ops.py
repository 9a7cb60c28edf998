"""
Numba kernels for the two hot loops outside linear algebra: lock-in
projection of sampled traces and sign-change scanning of signal sweeps.
"""

import numpy as np
from numba import njit, prange

# TIP: Use `NUMBA_DISABLE_JIT=1 pytest tests/ -m oracle` to run these without JIT.


def _sign(x):
    if x > 0.0:
        return 1
    if x < 0.0:
        return -1
    return 0


_sign = njit(inline="always")(_sign)


def _lockin_kernel(out, samples, times, omega):
    """
    Project each row of `samples` on cos(omega t) and sin(omega t).

    Args:
        out (array): (n_obs, 2) storage for (in_phase, out_of_phase)
        samples (array): (n_obs, n_t) sampled observables
        times (array): (n_t,) sample times, s
        omega (float): reference angular frequency, rad/s

    Returns:
        None : Fills in `out`
    """
    n_t = times.shape[0]
    for k in prange(samples.shape[0]):
        c = 0.0
        s = 0.0
        for i in range(n_t):
            phase = omega * times[i]
            c += samples[k, i] * np.cos(phase)
            s += samples[k, i] * np.sin(phase)
        out[k, 0] = 2.0 * c / n_t
        out[k, 1] = 2.0 * s / n_t


lockin_kernel = njit(parallel=True)(_lockin_kernel)


def lockin(samples, times, omega):
    """
    Lock-in demodulation over the full sample window ::

      in_phase  = (2/N) sum x(t) cos(omega t)
      out_phase = (2/N) sum x(t) sin(omega t)

    The window must span an integer number of periods on a uniform grid.

    Args:
        samples (array): (n_obs, n_t) or (n_t,) real samples
        times (array): sample times, s
        omega (float): reference angular frequency, rad/s

    Returns:
        array : (n_obs, 2) in-phase and out-of-phase amplitudes
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    out = np.zeros((samples.shape[0], 2))
    lockin_kernel(out, samples, np.asarray(times, dtype=np.float64), float(omega))
    return out


@njit
def sign_changes(values):
    """
    Indices i where values[i] and values[i + 1] differ in sign, or where
    values[i] is exactly zero.

    Args:
        values (array): sampled signal

    Returns:
        array : int64 indices, ascending
    """
    n = values.shape[0]
    hits = np.zeros(n, np.int64)
    count = 0
    for i in range(n - 1):
        a = _sign(values[i])
        b = _sign(values[i + 1])
        if a == 0 or a * b < 0:
            hits[count] = i
            count += 1
    return hits[:count]


@njit
def segment_slopes(x, y, idx):
    "Finite-difference slope of y(x) on the segments starting at `idx`."
    out = np.zeros(idx.shape[0])
    for k in range(idx.shape[0]):
        i = idx[k]
        out[k] = (y[i + 1] - y[i]) / (x[i + 1] - x[i])
    return out
