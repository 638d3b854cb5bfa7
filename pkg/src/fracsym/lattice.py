"""Lattice sums and translation-invariant convolution on uniform grids."""
from __future__ import annotations

from functools import lru_cache

import mpmath
import numpy as np
from scipy import fft


@lru_cache(maxsize=64)
def epstein_zeta(dim: int, s: float, cutoff: int = 6) -> float:
    """Analytically continued ``sum_{k in Z^N, k != 0} |k|^(-s)``.

    Closed forms are used in one and two dimensions; otherwise the Chowla-Selberg
    style theta splitting with incomplete gamma functions, truncated at
    ``|k_a| <= cutoff`` (terms decay like ``exp(-pi |k|^2)``).
    """
    with mpmath.workdps(30):
        if dim == 1:
            return float(2 * mpmath.zeta(s))
        if dim == 2:
            # sum over Z^2 of |k|^(-2a) = 4 zeta(a) beta(a)
            a = mpmath.mpf(s) / 2
            return float(4 * mpmath.zeta(a) * mpmath.dirichlet(a, [0, 1, 0, -1]))
        return float(_epstein_theta(dim, s, cutoff))


def _epstein_theta(dim: int, s: float, cutoff: int):
    sig = mpmath.mpf(s) / 2
    half = mpmath.mpf(dim) / 2
    if sig == 0:
        return mpmath.mpf(-1)
    rng = np.arange(-cutoff, cutoff + 1)
    mesh = np.meshgrid(*([rng] * dim), indexing="ij")
    n2 = np.sum(np.stack(mesh, -1) ** 2, axis=-1).ravel()
    n2, counts = np.unique(n2[n2 > 0], return_counts=True)
    acc = mpmath.mpf(0)
    for m, c in zip(n2, counts):
        x = mpmath.pi * int(m)
        acc += int(c) * (
            x ** (-sig) * mpmath.gammainc(sig, x) + x ** (sig - half) * mpmath.gammainc(half - sig, x)
        )
    total = 1 / (sig - half) - 1 / sig + acc
    return total * mpmath.pi**sig / mpmath.gamma(sig)


class StencilConvolver:
    """``out_i = sum_j W[j - i] u_j`` on a fixed grid shape via cached real FFTs.

    ``stencil`` has shape ``2*s - 1`` per axis for grid shape ``s``, with offset
    zero at the centre, and must be symmetric under ``k -> -k``.
    """

    def __init__(self, stencil: np.ndarray, grid_shape: tuple[int, ...]):
        self.grid_shape = tuple(grid_shape)
        expect = tuple(2 * s - 1 for s in self.grid_shape)
        if stencil.shape != expect:
            raise ValueError(f"stencil shape {stencil.shape} does not match grid {grid_shape}")
        self.fshape = tuple(fft.next_fast_len(3 * s - 2, real=True) for s in self.grid_shape)
        self._wf = fft.rfftn(stencil, self.fshape)
        self._sl = tuple(slice(s - 1, 2 * s - 1) for s in self.grid_shape)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        uf = fft.rfftn(u, self.fshape)
        full = fft.irfftn(uf * self._wf, self.fshape)
        return full[self._sl]
