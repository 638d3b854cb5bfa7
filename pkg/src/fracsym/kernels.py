"""Admissible interaction kernels and their exterior tail integrals.

Three radial, symmetric, nonnegative kernel families are supported:

* :class:`RieszKernel` -- ``|z|^(-N-2a)``;
* :class:`PiecewiseMuKernel` -- ``|z|^(-N-2a1)`` inside the unit ball and
  ``mu |z|^(-N-2a2)`` outside;
* :class:`GeneralDecreasingKernel` -- ``|z|^(-N-2a)`` inside ``B_r`` and a
  tabulated radial profile ``theta`` outside.

Kernel values are *unnormalised*; the operator multiplies by
:func:`normalization` of the near-field order so that the Riesz case is the
standard fractional Laplacian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .geometry import Ball, Box, DomainMask


def normalization(dim: int, alpha: float) -> float:
    """Constant ``C_{N,a}`` making ``C * PV int (u(x)-u(y))|x-y|^(-N-2a) dy`` the
    fractional Laplacian with Fourier symbol ``|xi|^(2a)``."""
    return float(
        4.0**alpha * special.gamma(dim / 2 + alpha)
        / (np.pi ** (dim / 2) * abs(special.gamma(-alpha)))
    )


def torsion_constant(dim: int, alpha: float) -> float:
    """Value of the normalised ``(-Delta)^a`` applied to ``(1-|x|^2)_+^a`` inside the ball."""
    return float(
        4.0**alpha * special.gamma(1 + alpha) * special.gamma(dim / 2 + alpha)
        / special.gamma(dim / 2)
    )


def _check_order(name: str, a: float) -> None:
    if not 0.0 < a < 1.0:
        raise ValueError(f"{name} must satisfy α∈(0,1), got {a!r}")


def _check_dim(dim: int) -> None:
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim!r}")


class KernelBase:
    """Shared behaviour; subclasses provide ``radial`` and ``radial_tail``."""

    dim: int

    @property
    def inner_alpha(self) -> float:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        return normalization(self.dim, self.inner_alpha)

    @property
    def jumps(self) -> tuple[float, ...]:
        """Radii where the radial profile is discontinuous."""
        return ()

    @property
    def kinks(self) -> tuple[float, ...]:
        """Radii where the profile formula changes (quadrature breakpoints)."""
        return ()

    @property
    def has_far_field(self) -> bool:
        return True

    def radial(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial_tail(self, rho: np.ndarray) -> np.ndarray:
        """``M(rho) = int_rho^inf s^(N-1) K(s) ds``."""
        raise NotImplementedError

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return eval_kernel(self, z)


@dataclass(frozen=True)
class RieszKernel(KernelBase):
    alpha: float
    dim: int

    def __post_init__(self):
        _check_order("alpha", self.alpha)
        _check_dim(self.dim)

    @property
    def inner_alpha(self) -> float:
        return self.alpha

    def radial(self, r):
        return np.asarray(r, dtype=float) ** (-self.dim - 2 * self.alpha)

    def radial_tail(self, rho):
        return np.asarray(rho, dtype=float) ** (-2 * self.alpha) / (2 * self.alpha)

    def descriptor(self) -> str:
        return f"riesz(alpha={self.alpha!r},N={self.dim})"


@dataclass(frozen=True)
class PiecewiseMuKernel(KernelBase):
    mu: float
    alpha1: float
    alpha2: float
    dim: int

    def __post_init__(self):
        _check_order("alpha1", self.alpha1)
        _check_order("alpha2", self.alpha2)
        _check_dim(self.dim)
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0,1], got {self.mu!r}")

    @property
    def inner_alpha(self) -> float:
        return self.alpha1

    @property
    def jumps(self):
        return () if self.mu == 1.0 else (1.0,)

    @property
    def kinks(self):
        if self.mu == 1.0 and self.alpha1 == self.alpha2:
            return ()
        return (1.0,)

    @property
    def has_far_field(self) -> bool:
        return self.mu > 0.0

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        N = self.dim
        inner = r ** (-N - 2 * self.alpha1)
        outer = self.mu * r ** (-N - 2 * self.alpha2)
        return np.where(r < 1.0, inner, outer)

    def radial_tail(self, rho):
        rho = np.asarray(rho, dtype=float)
        a1, a2, mu = self.alpha1, self.alpha2, self.mu
        if not self.kinks:
            return rho ** (-2 * a1) / (2 * a1)
        far = mu * rho ** (-2 * a2) / (2 * a2)
        near = (rho ** (-2 * a1) - 1.0) / (2 * a1) + mu / (2 * a2)
        return np.where(rho < 1.0, near, far)

    def descriptor(self) -> str:
        return (
            f"piecewise_mu(mu={self.mu!r},alpha1={self.alpha1!r},"
            f"alpha2={self.alpha2!r},N={self.dim})"
        )


@dataclass(frozen=True)
class ThetaTable:
    """Radial profile sampled at strictly increasing radii, interpolated log-log.

    Segments with a zero endpoint fall back to linear interpolation.  Beyond the
    last radius the last log-log slope is continued.
    """

    radii: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.size < 2 or r.shape != v.shape:
            raise ValueError("theta table needs at least two (radius, value) rows")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("theta table radii must be positive and strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("theta table values must be finite")
        object.__setattr__(self, "radii", tuple(float(x) for x in r))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def from_function(cls, fn, radii: Sequence[float]) -> "ThetaTable":
        r = np.asarray(radii, dtype=float)
        return cls(tuple(r), tuple(np.asarray(fn(r), dtype=float)))

    @classmethod
    def load(cls, path: str | Path) -> "ThetaTable":
        data = np.loadtxt(path, ndmin=2, comments="#", delimiter=None)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (radius, value)")
        return cls(tuple(data[:, 0]), tuple(data[:, 1]))

    @cached_property
    def _arrays(self):
        r = np.asarray(self.radii)
        v = np.asarray(self.values)
        loglog = (v[:-1] > 0) & (v[1:] > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(loglog, np.log(v[1:] / v[:-1]) / np.log(r[1:] / r[:-1]), 0.0)
        return r, v, loglog, slope

    @property
    def last_slope(self) -> float | None:
        r, v, loglog, slope = self._arrays
        if v[-1] == 0.0:
            return None
        return float(slope[-1]) if loglog[-1] else None

    def __call__(self, s):
        r, v, loglog, slope = self._arrays
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(r, s, side="right") - 1, 0, r.size - 2)
        t = (s - r[i]) / (r[i + 1] - r[i])
        lin = v[i] + t * (v[i + 1] - v[i])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            pw = v[i] * (s / r[i]) ** slope[i]
        out = np.where(loglog[i], pw, lin)
        beyond = s > r[-1]
        if np.any(beyond):
            ls = self.last_slope
            tail = v[-1] * (s[beyond] / r[-1]) ** ls if ls is not None else 0.0 * s[beyond]
            out = np.where(beyond, 0.0, out)
            out[beyond] = tail
        return np.maximum(out, 0.0) if np.all(v >= 0) else out

    def _segment_integral(self, i, a, b, dim):
        """int_a^b s^(N-1) theta(s) ds on segment i (vectorised over a, b)."""
        r, v, loglog, slope = self._arrays
        ri, vi = r[i], v[i]
        if loglog[i]:
            e = dim + slope[i]
            if abs(e) < 1e-14:
                return vi * ri ** (-slope[i]) * np.log(b / a)
            return vi * ri ** (-slope[i]) * (b**e - a**e) / e
        # linear in s: theta = vi + c (s - ri)
        c = (v[i + 1] - vi) / (r[i + 1] - ri)
        base = vi - c * ri
        return base * (b**dim - a**dim) / dim + c * (b ** (dim + 1) - a ** (dim + 1)) / (dim + 1)

    def tail_beyond_last(self, dim: int) -> float:
        r, v, _, _ = self._arrays
        if v[-1] == 0.0:
            return 0.0
        ls = self.last_slope
        if ls is None or dim + ls >= 0:
            return np.inf
        return float(-v[-1] * r[-1] ** dim / (dim + ls))

    def cumulative_tail(self, dim: int) -> np.ndarray:
        """``int_{r_i}^inf s^(N-1) theta ds`` at every table radius."""
        r = np.asarray(self.radii)
        out = np.empty(r.size)
        acc = self.tail_beyond_last(dim)
        out[-1] = acc
        for i in range(r.size - 2, -1, -1):
            acc = acc + float(self._segment_integral(i, r[i], r[i + 1], dim))
            out[i] = acc
        return out

    def radial_tail(self, rho, dim: int) -> np.ndarray:
        r = np.asarray(self.radii)
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        cum = self.cumulative_tail(dim)
        out = np.empty(rho.shape)
        beyond = rho >= r[-1]
        if np.any(beyond):
            ls = self.last_slope
            if self.values[-1] == 0.0:
                out[beyond] = 0.0
            elif ls is None or dim + ls >= 0:
                out[beyond] = np.inf
            else:
                out[beyond] = -self.values[-1] * r[-1] ** (-ls) * rho[beyond] ** (dim + ls) / (dim + ls)
        inner = ~beyond
        if np.any(inner):
            x = rho[inner]
            i = np.clip(np.searchsorted(r, x, side="right") - 1, 0, r.size - 2)
            vals = np.empty(x.shape)
            for seg in np.unique(i):
                sel = i == seg
                vals[sel] = cum[seg + 1] + self._segment_integral(seg, x[sel], r[seg + 1], dim)
            out[inner] = vals
        return out


@dataclass(frozen=True)
class GeneralDecreasingKernel(KernelBase):
    alpha: float
    r: float
    theta: ThetaTable
    dim: int

    def __post_init__(self):
        _check_order("alpha", self.alpha)
        _check_dim(self.dim)
        if not self.r > 0:
            raise ValueError("junction radius r must be positive")
        if self.theta.radii[0] > self.r * (1 + 1e-12):
            raise ValueError("theta table must start at or before the junction radius r")

    @property
    def inner_alpha(self) -> float:
        return self.alpha

    @property
    def jumps(self):
        inner = self.r ** (-self.dim - 2 * self.alpha)
        outer = float(self.theta(np.array([self.r]))[0])
        return () if np.isclose(inner, outer, rtol=1e-12, atol=0) else (self.r,)

    @property
    def kinks(self):
        return (self.r,)

    @property
    def has_far_field(self) -> bool:
        return any(v > 0 for v in self.theta.values)

    def radial(self, s):
        s = np.asarray(s, dtype=float)
        inner = s ** (-self.dim - 2 * self.alpha)
        return np.where(s < self.r, inner, self.theta(s))

    def radial_tail(self, rho):
        rho = np.asarray(rho, dtype=float)
        a, r, N = self.alpha, self.r, self.dim
        m_r = float(self.theta.radial_tail(np.array([r]), N)[0])
        near = (rho ** (-2 * a) - r ** (-2 * a)) / (2 * a) + m_r
        far = self.theta.radial_tail(np.maximum(rho, r).ravel(), N).reshape(np.shape(rho))
        return np.where(rho < r, near, far)

    def descriptor(self) -> str:
        return (
            f"general(alpha={self.alpha!r},r={self.r!r},"
            f"theta_rows={len(self.theta.radii)},N={self.dim})"
        )


KernelSpec = RieszKernel | PiecewiseMuKernel | GeneralDecreasingKernel


def eval_kernel(k: KernelBase, z) -> np.ndarray:
    """``K(z)`` for points ``z`` of shape ``(..., N)``; ``z = 0`` is rejected."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] != k.dim:
        z = z.reshape(-1, k.dim) if z.size % k.dim == 0 and k.dim > 1 else z[..., None]
    r = np.sqrt(np.sum(z**2, axis=-1))
    if np.any(r == 0.0):
        raise ValueError("kernel is singular at z = 0")
    return k.radial(r)


# ---------------------------------------------------------------------------
# exterior tail integrals
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _gauss_pieces(a: np.ndarray, b: np.ndarray, breaks: np.ndarray, panels: int):
    """Composite Gauss-Legendre nodes/weights on ``[a, b]`` split at ``breaks``.

    ``a``, ``b`` have shape ``(M,)``, ``breaks`` shape ``(M, nb)``.  Returns
    ``t, w`` of shape ``(M, Q)``.
    """
    edges = np.concatenate([a[:, None], np.clip(breaks, a[:, None], b[:, None]), b[:, None]], axis=1)
    edges = np.sort(edges, axis=1)
    lo = edges[:, :-1]
    width = (edges[:, 1:] - lo) / panels
    k = np.arange(panels)
    p_lo = lo[:, :, None] + width[:, :, None] * k  # (M, pieces, panels)
    half = 0.5 * width[:, :, None, None]
    t = p_lo[..., None] + half * (_GL_X + 1.0)
    w = np.broadcast_to(half * _GL_W, t.shape)
    M = a.shape[0]
    return t.reshape(M, -1), w.reshape(M, -1)


def _face_breaks_t(kernel: KernelBase, d: np.ndarray) -> np.ndarray:
    """Breakpoints (in the sinh variable) where ``d cosh t`` crosses a kink radius."""
    cols = []
    for rj in kernel.kinks:
        with np.errstate(invalid="ignore"):
            tj = np.where(rj > d, np.arccosh(np.maximum(rj / d, 1.0)), 0.0)
        cols += [-tj, tj]
    if not cols:
        return np.zeros((d.shape[0], 0))
    return np.stack(cols, axis=1)


def box_exterior_tail(kernel: KernelBase, points: np.ndarray, lo, hi, panels: int | None = None) -> np.ndarray:
    """``int_{R^N \\ box} K(x - y) dy`` for every ``x`` strictly inside the box.

    The exterior is swept by rays from ``x``; grouping the rays by the face they
    exit through gives ``sum_faces int_face M(|p-x|) d / |p-x|^N dA`` where ``d``
    is the distance from ``x`` to the face plane.  Face integrals use a sinh
    substitution that removes the peak at the foot point.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, kernel.dim)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    N = kernel.dim
    if np.any(pts <= lo) or np.any(pts >= hi):
        raise ValueError("tail integral requires points strictly inside the box")
    if panels is None:
        panels = {1: 1, 2: 12, 3: 6}[N]
    total = np.zeros(pts.shape[0])
    for a in range(N):
        for side in (lo[a], hi[a]):
            d = np.abs(side - pts[:, a])
            if N == 1:
                total += kernel.radial_tail(d)
                continue
            others = [o for o in range(N) if o != a]
            if N == 2:
                o = others[0]
                ta = np.arcsinh((lo[o] - pts[:, o]) / d)
                tb = np.arcsinh((hi[o] - pts[:, o]) / d)
                t, w = _gauss_pieces(ta, tb, _face_breaks_t(kernel, d), panels)
                ch = np.cosh(t)
                total += np.sum(w * kernel.radial_tail(d[:, None] * ch) / ch, axis=1)
            else:
                o1, o2 = others
                t1a = np.arcsinh((lo[o1] - pts[:, o1]) / d)
                t1b = np.arcsinh((hi[o1] - pts[:, o1]) / d)
                t1, w1 = _gauss_pieces(t1a, t1b, _face_breaks_t(kernel, d), panels)
                M, Q = t1.shape
                dp = (d[:, None] * np.cosh(t1)).ravel()  # distance to the line in the face
                rep = np.repeat(np.arange(M), Q)
                t2a = np.arcsinh((lo[o2] - pts[rep, o2]) / dp)
                t2b = np.arcsinh((hi[o2] - pts[rep, o2]) / dp)
                t2, w2 = _gauss_pieces(t2a, t2b, _face_breaks_t(kernel, dp), panels)
                ch2 = np.cosh(t2)
                inner = np.sum(w2 * kernel.radial_tail(dp[:, None] * ch2) / ch2**2, axis=1)
                total += np.sum(w1 * inner.reshape(M, Q) / np.cosh(t1), axis=1)
    return total


def ball_exterior_tail(kernel: KernelBase, x, center, radius: float) -> float:
    """``int_{|y-c|>=R} K(x-y) dy`` by angular quadrature of the radial tail."""
    p = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    N = kernel.dim
    pn = float(np.linalg.norm(p))
    R = float(radius)
    if pn >= R:
        raise ValueError("tail integral requires x strictly inside the ball")
    if N == 1:
        return float(kernel.radial_tail(R - pn) + kernel.radial_tail(R + pn))

    def rho(theta):
        c = np.cos(theta)
        return -pn * c + np.sqrt(R * R - pn * pn * (1 - c * c))

    brk = []
    if pn > 0:
        for rj in kernel.kinks:
            c = (R * R - pn * pn - rj * rj) / (2 * rj * pn)
            if -1 < c < 1:
                brk.append(float(np.arccos(c)))
    if pn > 0:
        # resolve the peak towards the nearest boundary point
        brk.append(min(np.pi / 2, np.sqrt(max(R - pn, 1e-300) / R)))
    brk = sorted(set(brk))
    if N == 2:
        f = lambda th: 2.0 * float(kernel.radial_tail(rho(th)))
    else:
        f = lambda th: 2.0 * np.pi * np.sin(th) * float(kernel.radial_tail(rho(th)))
    val, _ = integrate.quad(f, 0.0, np.pi, points=brk or None, epsabs=0.0, epsrel=1e-11, limit=400)
    return float(val)


def tail_mass(kernel: KernelBase, x, mask: DomainMask) -> float:
    """``int`` of ``K(x - y)`` over the exterior of ``mask`` (unnormalised).

    Balls use angular quadrature of the closed-form radial tail; boxes use
    face quadrature; custom masks add a composite cell quadrature of the
    non-mask part of the grid hull to the hull's exterior tail.
    """
    x = np.asarray(x, dtype=float).reshape(kernel.dim)
    kind = mask.kind
    if isinstance(kind, Ball):
        return ball_exterior_tail(kernel, x, kind.center, kind.radius)
    if isinstance(kind, Box):
        return float(box_exterior_tail(kernel, x[None, :], kind.lo, kind.hi)[0])
    grid = mask.grid
    h = grid.h
    k = np.rint(x / h).astype(int) + np.asarray(grid.half_extent)
    if np.any(k < 0) or np.any(k >= np.asarray(grid.shape)) or not mask.inside[tuple(k)]:
        raise ValueError("tail integral requires x at an interior node of the mask")
    lo, hi = grid.hull()
    total = float(box_exterior_tail(kernel, x[None, :], lo, hi)[0])
    centers = grid.points()[~mask.inside]
    sub = 4
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    grids = np.meshgrid(*([offs] * kernel.dim), indexing="ij")
    offs = np.stack(grids, axis=-1).reshape(-1, kernel.dim) * h
    ys = centers[:, None, :] + offs[None, :, :]
    total += float(np.sum(eval_kernel(kernel, x - ys))) * (h / sub) ** kernel.dim
    return total


# ---------------------------------------------------------------------------
# condition (C) for the general decreasing class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionCResult:
    passed: bool
    witness: tuple[float, float] | None = None
    reason: str = ""
    tail: float = field(default=np.nan)


def validate_condition_C(kernel: GeneralDecreasingKernel, samples: int = 4000) -> ConditionCResult:
    """Check nonnegativity, exterior integrability and monotone decrease of ``K``."""
    if not isinstance(kernel, GeneralDecreasingKernel):
        raise TypeError("condition (C) applies to GeneralDecreasingKernel only")
    th = kernel.theta
    vals = np.asarray(th.values)
    rad = np.asarray(th.radii)
    if np.any(vals < 0):
        i = int(np.flatnonzero(vals < 0)[0])
        return ConditionCResult(False, (float(rad[i]), float(rad[i])), "theta is negative")
    tail = float(kernel.radial_tail(np.array([kernel.r]))[0])
    if not np.isfinite(tail):
        return ConditionCResult(False, (float(rad[-1]), np.inf), "theta is not integrable", tail)
    r = kernel.r
    lo = min(r, rad[0]) * 1e-3
    hi = max(rad[-1], r) * 4.0
    s = np.unique(np.concatenate([
        np.geomspace(lo, hi, samples), rad, [r * (1 - 1e-9), r],
    ]))
    K = kernel.radial(s)
    bad = np.flatnonzero(K[1:] > K[:-1] * (1 + 1e-12))
    if bad.size:
        i = int(bad[0])
        return ConditionCResult(False, (float(s[i]), float(s[i + 1])), "kernel increases", tail)
    return ConditionCResult(True, None, "", tail)


def kernel_from_params(kind: str, dim: int, **p) -> KernelBase:
    kind = kind.lower()
    if kind in ("riesz", "fractional"):
        return RieszKernel(float(p["alpha"]), dim)
    if kind in ("piecewise_mu", "mu"):
        return PiecewiseMuKernel(float(p["mu"]), float(p["alpha1"]), float(p["alpha2"]), dim)
    if kind in ("general", "general_decreasing"):
        theta = p["theta"]
        if not isinstance(theta, ThetaTable):
            theta = ThetaTable.load(theta)
        return GeneralDecreasingKernel(float(p["alpha"]), float(p["r"]), theta, dim)
    raise ValueError(f"unknown kernel type {kind!r}")
