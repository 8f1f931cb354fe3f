"""Iterative radix-2 Cooley-Tukey FFT over the last axis."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import HarError


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=32)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


def fft(x) -> np.ndarray:
    """Discrete Fourier transform ``X[k] = sum_t x[t] exp(-2j pi k t / n)``.

    Batched: leading axes are independent signals. The length of the last
    axis must be a power of two.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise HarError(f"radix-2 FFT needs a power-of-two length, got {n}; use a power-of-two window")
    lead = x.shape[:-1]
    out = x[..., _bit_reverse(n)].reshape(-1, n)
    m = 2
    while m <= n:
        half = m // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / m)
        blocks = out.reshape(-1, n // m, m)
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(-1, n)
        m *= 2
    return out.reshape(*lead, n)
