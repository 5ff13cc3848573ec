"""Discrete Fourier transforms in the two sign conventions used by the lattice models.

``forward(x, sign)`` computes ``X[k] = sum_n x[n] exp(sign * 2j*pi*k*n/N)`` along the
last axis and ``inverse(X, sign)`` undoes it.  ``direct=True`` selects the O(N^2)
matrix product, kept as the reference the FFT path is tested against.
"""

from __future__ import annotations

import numpy as np


def dft_matrix(N: int, sign: int) -> np.ndarray:
    n = np.arange(N)
    return np.exp(sign * 2j * np.pi * np.outer(n, n) / N)


def forward(x: np.ndarray, sign: int, *, direct: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    N = x.shape[-1]
    if direct:
        return x @ dft_matrix(N, sign).T
    if sign < 0:
        return np.fft.fft(x, axis=-1)
    return np.fft.ifft(x, axis=-1) * N


def inverse(X: np.ndarray, sign: int, *, direct: bool = False) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    N = X.shape[-1]
    if direct:
        return X @ dft_matrix(N, -sign).T / N
    if sign < 0:
        return np.fft.ifft(X, axis=-1)
    return np.fft.fft(X, axis=-1) / N
