"""Discrete nonlocal operator in monotone second-difference form.

For a symmetric kernel the principal value integral equals
``C * int (u(x) - u(x+z)) K(z) dz`` with an absolutely convergent symmetric
pairing, so on the lattice ``h Z^N`` the operator reads

    (Lu)_i = sum_{j != i} W_{j-i} (u_i - u_j) + (t_i + d_i) (u_i - c)

where

* ``W_k = C h^N K(h|k|)`` plus a nearest-neighbour term that removes the
  leading lattice-sum error of the singular part (an analytically continued
  lattice zeta value), so all weights are nonnegative and radial;
* ``t_i`` is the kernel mass beyond the grid hull, paired with the constant
  exterior value ``c``;
* ``d_i`` (balls only) is a diagonal boundary-layer correction fixed by
  requiring exactness on ``(R^2 - |x-c|^2)_+^a``; see :func:`profile_correction`.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import special
from scipy.sparse.linalg import LinearOperator

from .geometry import Ball, DomainMask, GridFunction, UniformGrid, full_mask
from .kernels import KernelBase, RieszKernel, box_exterior_tail, torsion_constant
from .lattice import StencilConvolver, epstein_zeta

DENSE_LIMIT = 4000
DUMP_MAGIC = b"FSOPDUMP"
DUMP_VERSION = 1


def stencil_weights(grid_shape: Sequence[int], h: float, kernel: KernelBase) -> tuple[np.ndarray, float, float]:
    """Weights ``W_k`` for all offsets between two nodes of a grid of ``grid_shape``.

    Returns ``(W, zeta, coefficient)`` where ``coefficient`` is the extra
    nearest-neighbour weight in units of ``C h^(-2a)``.
    """
    N = kernel.dim
    a = kernel.inner_alpha
    ranges = [np.arange(-(s - 1), s) for s in grid_shape]
    k2 = np.zeros(tuple(2 * s - 1 for s in grid_shape), dtype=np.int64)
    for ax, rg in enumerate(ranges):
        shp = [1] * N
        shp[ax] = -1
        k2 = k2 + rg.reshape(shp) ** 2
    uniq, inv = np.unique(k2, return_inverse=True)
    inv = inv.reshape(k2.shape)
    rad = h * np.sqrt(uniq[1:].astype(float))
    vals = kernel.radial(rad)
    if kernel.jumps:
        vals = _smooth_jumps(kernel, rad, vals, h)
    zeta = epstein_zeta(N, N + 2 * a - 2)
    coef = -zeta / (2 * N)
    scale = kernel.scale
    lut = np.concatenate([[0.0], scale * h**N * vals])
    # nearest neighbours at |k| = 1 sit at uniq index 1
    lut[1] += scale * coef * h ** (-2 * a)
    return lut[inv], zeta, coef


def _smooth_jumps(kernel: KernelBase, rad: np.ndarray, vals: np.ndarray, h: float) -> np.ndarray:
    """Shell-average ``K`` over ``[r - h/2, r + h/2]`` where that window holds a jump,
    then take the running minimum so weights stay non-increasing in radius."""
    N = kernel.dim
    vals = vals.copy()
    lo, hi = np.maximum(rad - h / 2, 0.0), rad + h / 2
    for rj in kernel.jumps:
        sel = (lo < rj) & (hi > rj)
        if np.any(sel):
            mass = kernel.radial_tail(lo[sel]) - kernel.radial_tail(hi[sel])
            vals[sel] = mass * N / (hi[sel] ** N - lo[sel] ** N)
    return np.minimum.accumulate(vals)


@dataclass
class DiscreteNonlocalOperator:
    grid: UniformGrid
    mask: DomainMask
    kernel: KernelBase
    stencil: np.ndarray
    rowsum: np.ndarray
    tail: np.ndarray
    boundary: np.ndarray
    zeta: float
    near_field_coefficient: float
    profile_corrected: bool = False
    _conv: StencilConvolver = field(repr=False, default=None)

    def __post_init__(self):
        if self._conv is None:
            self._conv = StencilConvolver(self.stencil, self.grid.shape)

    @property
    def diagonal_extra(self) -> np.ndarray:
        return self.tail + self.boundary

    @property
    def n_interior(self) -> int:
        return self.mask.count

    def convolve(self, values: np.ndarray) -> np.ndarray:
        return self._conv(values)

    def apply_values(self, values: np.ndarray, exterior: float = 0.0) -> np.ndarray:
        """``Lu`` on the full grid array (zero off the mask)."""
        values = np.asarray(values, dtype=float).reshape(self.grid.shape)
        out = (self.rowsum + self.diagonal_extra) * values - self._conv(values)
        if exterior != 0.0:
            out -= self.diagonal_extra * exterior
        return np.where(self.mask.inside, out, 0.0)

    # unknowns are the mask nodes; other grid nodes hold the exterior value
    def embed(self, x: np.ndarray, exterior: float = 0.0) -> np.ndarray:
        full = np.full(self.grid.shape, float(exterior))
        full[self.mask.inside] = x
        return full

    def linear_operator(self) -> LinearOperator:
        n = self.n_interior
        inside = self.mask.inside

        def mv(x):
            return self.apply_values(self.embed(np.ravel(x)))[inside]

        return LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=float)

    def diagonal(self) -> np.ndarray:
        return (self.rowsum + self.diagonal_extra)[self.mask.inside]


def profile_correction(grid: UniformGrid, mask: DomainMask, alpha: float, tail_riesz: np.ndarray,
                       stencil_riesz: np.ndarray, conv: StencilConvolver | None = None) -> np.ndarray:
    """Diagonal boundary correction for ball masks.

    With ``psi = (R^2 - |x-c|^2)_+^a`` the continuum identity
    ``(-Delta)^a psi = kappa`` holds with an explicit constant.  The lattice
    sum misses the square-root-type layer of ``psi`` at the sphere, so
    ``d_i = (kappa - (L_h psi)_i) / psi_i`` is added to the diagonal.  Writing
    ``u = psi * v`` shows this restores consistency for every ``u`` that
    vanishes like ``psi``; constants and the sign structure are untouched.
    """
    ball = mask.kind
    psi = np.clip(ball.radius**2 - grid.radius(ball.center) ** 2, 0.0, None) ** alpha
    psi = np.where(mask.inside, psi, 0.0)
    if conv is None:
        conv = StencilConvolver(stencil_riesz, grid.shape)
    rowsum = conv(np.ones(grid.shape))
    Lpsi = (rowsum + tail_riesz) * psi - conv(psi)
    kappa = torsion_constant(grid.dim, alpha)
    d = np.zeros(grid.shape)
    ins = mask.inside & (psi > 0)
    d[ins] = (kappa - Lpsi[ins]) / psi[ins]
    return d


def assemble(grid: UniformGrid, mask: DomainMask, kernel: KernelBase, boundary_correction: bool = True) -> DiscreteNonlocalOperator:
    """Build the discrete operator on the mask nodes of ``grid``."""
    if mask.grid != grid:
        raise ValueError("mask is defined on a different grid")
    if kernel.dim != grid.dim:
        raise ValueError("kernel and grid dimensions differ")
    if mask.count == 0:
        raise ValueError("mask is empty")
    a = kernel.inner_alpha
    if not 0 < a < 1:
        raise ValueError("singular-cell integral diverges unless 0 < alpha < 1")
    W, zeta, coef = stencil_weights(grid.shape, grid.h, kernel)
    conv = StencilConvolver(W, grid.shape)
    rowsum = conv(np.ones(grid.shape))
    lo, hi = grid.hull()
    pts = grid.points()[mask.inside]
    tail = np.zeros(grid.shape)
    scale = kernel.scale
    tail[mask.inside] = scale * box_exterior_tail(kernel, pts, lo, hi)
    boundary = np.zeros(grid.shape)
    corrected = False
    if boundary_correction and isinstance(mask.kind, Ball):
        riesz = RieszKernel(a, grid.dim)
        if isinstance(kernel, RieszKernel):
            Wr, tr, cr = W, tail, conv
        else:
            Wr = stencil_weights(grid.shape, grid.h, riesz)[0]
            tr = np.zeros(grid.shape)
            tr[mask.inside] = riesz.scale * box_exterior_tail(riesz, pts, lo, hi)
            cr = None
        boundary = profile_correction(grid, mask, a, tr, Wr, cr)
        # keep the exterior coupling of every row positive (comparison principle)
        outside = rowsum - conv(mask.inside.astype(float))
        floor = -0.5 * (outside + tail)
        boundary = np.where(mask.inside, np.maximum(boundary, floor), 0.0)
        corrected = True
    return DiscreteNonlocalOperator(
        grid, mask, kernel, W, rowsum, tail, boundary, zeta, coef, corrected, conv
    )


def _exterior_constant(u: GridFunction) -> float:
    c = u.exterior.constant
    if c is None:
        raise ValueError("operator supports zero or constant exterior rules only")
    return c


def apply(op: DiscreteNonlocalOperator, u: GridFunction) -> GridFunction:
    """``Lu`` at mask nodes (zero elsewhere); exterior value from ``u``'s rule."""
    if u.grid != op.grid:
        raise ValueError("grid function lives on a different grid")
    c = _exterior_constant(u)
    return GridFunction(op.grid, op.apply_values(u.values, c))


def dense_matrix(op: DiscreteNonlocalOperator, columns: str = "mask") -> np.ndarray:
    """Explicit matrix of ``L``: rows are mask nodes.

    ``columns="mask"`` gives the square matrix acting on mask values with
    every other node at zero; ``columns="grid"`` acts on all grid values (the
    exterior-constant term ``-(t+d) c`` is then added separately).
    """
    grid = op.grid
    inside = op.mask.inside
    ncols = op.n_interior if columns == "mask" else grid.size
    if max(op.n_interior, ncols) > DENSE_LIMIT and op.n_interior * ncols > DENSE_LIMIT**2:
        raise MemoryError(f"dense assembly limited to {DENSE_LIMIT} nodes")
    idx = np.argwhere(inside)
    cidx = idx if columns == "mask" else np.argwhere(np.ones(grid.shape, bool))
    shift = np.asarray(grid.shape) - 1
    diff = cidx[None, :, :] - idx[:, None, :] + shift
    A = -op.stencil[tuple(np.moveaxis(diff, -1, 0))]
    diag = (op.rowsum + op.diagonal_extra)[inside]
    if columns == "mask":
        A[np.arange(len(idx)), np.arange(len(idx))] = diag
    else:
        flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
        A[np.arange(len(idx)), flat] = diag
    return A


def dense_apply(op: DiscreteNonlocalOperator, u: GridFunction) -> np.ndarray:
    """Reference ``Lu`` at mask nodes via the dense matrix (oracle for apply)."""
    A = dense_matrix(op, columns="grid")
    c = _exterior_constant(u)
    return A @ u.values.ravel() - op.diagonal_extra[op.mask.inside] * c


# ---------------------------------------------------------------------------
# convergence probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestProfile:
    """Smooth test function with accurately known operator values."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    eval_radius: float


TestProfile.__test__ = False  # not a pytest collection target


def gaussian_profile(dim: int, alpha: float, support_radius: float = 6.0, eval_radius: float = 2.0) -> TestProfile:
    """``exp(-|x|^2)``; its fractional Laplacian is a confluent hypergeometric function."""
    c = 4.0**alpha * special.gamma(dim / 2 + alpha) / special.gamma(dim / 2)

    def fn(x):
        return np.exp(-np.sum(np.asarray(x) ** 2, axis=-1))

    def exact(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1)
        return c * special.hyp1f1(dim / 2 + alpha, dim / 2, -r2)

    return TestProfile("gaussian", fn, exact, support_radius, eval_radius)


@dataclass
class ConvergenceReport:
    h: list[float]
    errors: list[float]
    order: float
    pairwise: list[float]


def convergence_probe(kernel: KernelBase, profile: TestProfile, h_list: Sequence[float]) -> ConvergenceReport:
    """Max error of ``L`` on ``profile`` over ``|x| <= eval_radius`` per ``h``,
    with the least-squares slope of log(error) against log(h)."""
    hs = [float(h) for h in h_list]
    if len(hs) < 3:
        raise ValueError("convergence probe needs at least three grid levels")
    errors = []
    for h in hs:
        grid = UniformGrid.covering(kernel.dim, h, profile.support_radius, pad=0)
        op = assemble(grid, full_mask(grid), kernel)
        pts = grid.points()
        Lu = op.apply_values(profile.fn(pts))
        sel = np.sqrt(np.sum(pts**2, axis=-1)) <= profile.eval_radius
        errors.append(float(np.max(np.abs(Lu[sel] - profile.exact(pts[sel])))))
    lh, le = np.log(hs), np.log(errors)
    order = float(np.polyfit(lh, le, 1)[0])
    pairwise = [float("nan")] + [
        float((le[i] - le[i - 1]) / (lh[i] - lh[i - 1])) for i in range(1, len(hs))
    ]
    return ConvergenceReport(hs, errors, order, pairwise)


# ---------------------------------------------------------------------------
# binary dump
# ---------------------------------------------------------------------------


def dump_operator(op: DiscreteNonlocalOperator, path: str | Path) -> None:
    """Versioned binary dump: magic, version, JSON header, then row-major float64
    stencil weights followed by the extra diagonal at mask nodes."""
    header = {
        "dims": list(op.grid.shape),
        "dim": op.grid.dim,
        "h": op.grid.h,
        "kernel": op.kernel.descriptor(),
        "stencil_shape": list(op.stencil.shape),
        "n_interior": op.n_interior,
        "zeta": op.zeta,
        "profile_corrected": op.profile_corrected,
    }
    write_binary(path, header, [op.stencil, op.diagonal_extra[op.mask.inside]])


def write_binary(path: str | Path, header: dict, arrays: Sequence[np.ndarray]) -> None:
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<II", DUMP_VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))


def read_binary(path: str | Path) -> tuple[dict, np.ndarray]:
    """Return the header and the concatenated float64 payload."""
    with open(path, "rb") as fh:
        if fh.read(len(DUMP_MAGIC)) != DUMP_MAGIC:
            raise ValueError(f"{path}: not a grid dump")
        version, n = struct.unpack("<II", fh.read(8))
        if version != DUMP_VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        header = json.loads(fh.read(n))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    return header, payload
