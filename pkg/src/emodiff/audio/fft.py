"""
Iterative radix-2 fast Fourier transform.

Transforms run along the last axis, so a whole grid of frames is processed
with one call. The forward transform is unnormalized; the inverse divides by n.
"""
import math
from functools import lru_cache

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = int(math.log2(n))
    order = np.zeros(n, dtype=np.int64)
    for i in range(n):
        rev, value = 0, i
        for _ in range(bits):
            rev = (rev << 1) | (value & 1)
            value >>= 1
        order[i] = rev
    order.flags.writeable = False
    return order


@lru_cache(maxsize=64)
def _twiddles(size: int) -> np.ndarray:
    factors = np.exp(-2j * np.pi * np.arange(size // 2) / size)
    factors.flags.writeable = False
    return factors


def fft(x) -> np.ndarray:
    """Forward DFT along the last axis; the length must be a power of two."""
    data = np.asarray(x, dtype=np.complex128)
    n = data.shape[-1] if data.ndim else 0
    if not is_power_of_two(n):
        raise ValueError(f"fft length must be a power of two, got {n}")
    lead = data.shape[:-1]
    out = data[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(size)
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(lead + (n,))
        size *= 2
    return out


def ifft(spectrum) -> np.ndarray:
    """Inverse DFT along the last axis, normalized by 1/n."""
    data = np.asarray(spectrum, dtype=np.complex128)
    n = data.shape[-1] if data.ndim else 0
    return np.conj(fft(np.conj(data))) / n


def rfft(x) -> np.ndarray:
    """Non-negative frequency half (``n // 2 + 1`` bins) of a real signal's DFT."""
    data = np.asarray(x, dtype=np.float64)
    return fft(data)[..., : data.shape[-1] // 2 + 1]


def irfft(half_spectrum, n: int) -> np.ndarray:
    """Real signal of length ``n`` from its non-negative frequency half."""
    half = np.asarray(half_spectrum, dtype=np.complex128)
    if half.shape[-1] != n // 2 + 1:
        raise ValueError(f"expected {n // 2 + 1} bins for n={n}, got {half.shape[-1]}")
    mirrored = np.conj(half[..., 1 : n - n // 2][..., ::-1])
    return ifft(np.concatenate([half, mirrored], axis=-1)).real
