"""Uniform grids, domain masks, reflections and grid functions.

All node coordinates are integer multiples of the spacing ``h`` and every grid
is symmetric about the origin, so the plane ``x_axis = 0`` passes through
nodes.  Reflections ``x -> (2*lam - x_axis, x')`` are restricted to ``lam`` on
the half-grid lattice, which makes them exact index maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

_ALIGN_TOL = 1e-9


class GridAlignmentError(ValueError):
    """Raised when a reflection parameter is not a multiple of h/2."""


class DomainError(ValueError):
    """Raised when a mask does not meet the geometric precondition of an operation."""


@dataclass(frozen=True)
class UniformGrid:
    """Symmetric uniform lattice ``{h*k : |k_a| <= half_extent[a]}``."""

    dim: int
    h: float
    half_extent: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.dim <= 3:
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.h > 0:
            raise ValueError("spacing h must be positive")
        ext = tuple(int(n) for n in self.half_extent)
        if len(ext) != self.dim or min(ext) < 0:
            raise ValueError("half_extent needs one non-negative entry per axis")
        object.__setattr__(self, "half_extent", ext)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def covering(cls, dim: int, h: float, radius: float, pad: int = 2) -> "UniformGrid":
        """Smallest symmetric grid containing ``[-radius, radius]^dim`` plus ``pad`` nodes."""
        n = int(np.ceil(radius / h - _ALIGN_TOL)) + pad
        return cls(dim, h, (n,) * dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(2 * n + 1 for n in self.half_extent)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.half_extent[axis]
        return np.arange(-n, n + 1) * self.h

    def coords(self) -> list[np.ndarray]:
        """Broadcastable per-axis coordinate arrays (``np.ix_`` style)."""
        return list(np.ix_(*[self.axis_coords(a) for a in range(self.dim)]))

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij")
        return np.stack(mesh, axis=-1)

    def radius(self, center: Sequence[float] | None = None) -> np.ndarray:
        pts = self.points()
        if center is not None:
            pts = pts - np.asarray(center, dtype=float)
        return np.sqrt(np.sum(pts**2, axis=-1))

    def hull(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper corners of the union of all node cells."""
        hi = (np.asarray(self.half_extent) + 0.5) * self.h
        return -hi, hi

    def enlarged(self, half_extent: Sequence[int]) -> "UniformGrid":
        return UniformGrid(self.dim, self.h, tuple(half_extent))

    def embed(self, values: np.ndarray, larger: "UniformGrid", fill: float = 0.0) -> np.ndarray:
        """Copy ``values`` (on this grid) into the centred sub-block of ``larger``."""
        if larger.h != self.h or larger.dim != self.dim:
            raise ValueError("grids are not compatible")
        out = np.full(larger.shape, fill, dtype=float)
        sl = tuple(
            slice(N - n, N + n + 1) for n, N in zip(self.half_extent, larger.half_extent)
        )
        out[sl] = values
        return out

    def restrict(self, values: np.ndarray, larger: "UniformGrid") -> np.ndarray:
        sl = tuple(
            slice(N - n, N + n + 1) for n, N in zip(self.half_extent, larger.half_extent)
        )
        return values[sl]


def lambda_index(grid: UniformGrid, lam: float) -> int:
    """Return ``m`` with ``lam = m*h/2``; raise if ``lam`` is off the half-grid lattice."""
    m = 2.0 * lam / grid.h
    mi = int(round(m))
    if abs(m - mi) > _ALIGN_TOL * max(1.0, abs(m)):
        raise GridAlignmentError(f"lambda={lam!r} is not a multiple of h/2={grid.h / 2!r}")
    return mi


def _check_axis(axis: int, dim: int) -> None:
    if not 0 <= axis < dim:
        raise ValueError(f"axis {axis} out of range for dimension {dim}")


def reflect_point(x: Sequence[float], lam: float, axis: int = 0) -> np.ndarray:
    """Reflect ``x`` through the plane ``x_axis = lam``."""
    x = np.array(x, dtype=float)
    _check_axis(axis, x.shape[-1])
    x[..., axis] = 2.0 * lam - x[..., axis]
    return x


# ---------------------------------------------------------------------------
# exterior rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroExterior:
    def value(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(points)[:-1])

    @property
    def constant(self) -> float | None:
        return 0.0


@dataclass(frozen=True)
class ConstantExterior:
    c: float

    def value(self, points: np.ndarray) -> np.ndarray:
        return np.full(np.shape(points)[:-1], float(self.c))

    @property
    def constant(self) -> float | None:
        return float(self.c)


@dataclass(frozen=True)
class RadialTableExterior:
    """Exterior values from a radial profile about ``center`` (linear interpolation)."""

    radii: tuple[float, ...]
    values: tuple[float, ...]
    center: tuple[float, ...] | None = None

    def value(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.center is not None:
            pts = pts - np.asarray(self.center)
        r = np.sqrt(np.sum(pts**2, axis=-1))
        return np.interp(r, self.radii, self.values)

    @property
    def constant(self) -> float | None:
        return None


@dataclass(frozen=True)
class ReflectedExterior:
    """Exterior rule of ``u_lam``: the base rule evaluated at reflected points."""

    base: object
    lam: float
    axis: int

    def value(self, points: np.ndarray) -> np.ndarray:
        return self.base.value(reflect_point(points, self.lam, self.axis))

    @property
    def constant(self) -> float | None:
        return self.base.constant


@dataclass
class GridFunction:
    """Node values on a :class:`UniformGrid` plus a rule for points beyond it."""

    grid: UniformGrid
    values: np.ndarray
    exterior: object = field(default_factory=ZeroExterior)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        self.values = vals

    @classmethod
    def from_callable(cls, grid: UniformGrid, fn: Callable[[np.ndarray], np.ndarray], exterior=None):
        vals = fn(grid.points())
        return cls(grid, vals, exterior if exterior is not None else ZeroExterior())

    def at_indices(self, idx: np.ndarray) -> np.ndarray:
        """Values at integer lattice indices (shape ``(..., dim)``, centred at 0)."""
        idx = np.asarray(idx, dtype=int)
        ext = np.asarray(self.grid.half_extent)
        inside = np.all(np.abs(idx) <= ext, axis=-1)
        out = np.empty(idx.shape[:-1])
        if np.any(inside):
            shifted = idx[inside] + ext
            out[inside] = self.values[tuple(shifted.T)]
        if np.any(~inside):
            out[~inside] = self.exterior.value(idx[~inside] * self.grid.h)
        return out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at lattice points; points off the grid follow the exterior rule."""
        pts = np.asarray(points, dtype=float)
        k = np.rint(pts / self.grid.h)
        if np.any(np.abs(k * self.grid.h - pts) > 1e-9 * self.grid.h):
            raise ValueError("evaluation is only defined on lattice points")
        return self.at_indices(k.astype(int))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.exterior)


def reflect_function(u: GridFunction, lam: float, axis: int = 0) -> GridFunction:
    """``u_lam(x) = u(x_lam)`` by exact index reflection (no interpolation)."""
    grid = u.grid
    _check_axis(axis, grid.dim)
    m = lambda_index(grid, lam)
    n = grid.half_extent[axis]
    # node k on `axis` maps to index m - k; pick those landing on the grid
    k = np.arange(-n, n + 1)
    src = m - k
    ok = np.abs(src) <= n
    out = np.empty_like(u.values)
    moved = np.moveaxis(u.values, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    dst[ok] = moved[src[ok] + n]
    if not np.all(ok):
        pts = np.moveaxis(grid.points(), axis, 0)[~ok]
        pts = reflect_point(pts, lam, axis)
        dst[~ok] = u.exterior.value(pts)
    ext = u.exterior
    if ext.constant is None:
        ext = ReflectedExterior(ext, lam, axis)
    return GridFunction(grid, out, ext)


# ---------------------------------------------------------------------------
# masks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]


@dataclass(frozen=True)
class Custom:
    name: str = "custom"


@dataclass
class DomainMask:
    grid: UniformGrid
    inside: np.ndarray
    kind: object
    symmetric_axes: tuple[int, ...] = ()

    def __post_init__(self):
        self.inside = np.asarray(self.inside, dtype=bool).reshape(self.grid.shape)
        for a in self.symmetric_axes:
            if not np.array_equal(self.inside, np.flip(self.inside, axis=a)):
                raise DomainError(f"mask is not symmetric in axis {a}")

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    def measure(self) -> float:
        return region_measure(self.inside, self.grid)

    def diameter(self) -> float:
        """Continuum diameter for balls/boxes, node-hull diameter otherwise."""
        if isinstance(self.kind, Ball):
            return 2.0 * self.kind.radius
        if isinstance(self.kind, Box):
            return float(np.linalg.norm(np.subtract(self.kind.hi, self.kind.lo)))
        return node_diameter(self.grid.points()[self.inside])

    def is_convex_along(self, axis: int) -> bool:
        return convex_along_axis(self.inside, axis)

    def on_grid(self, grid: UniformGrid) -> "DomainMask":
        """Same mask re-expressed on a larger concentric grid."""
        inside = self.grid.embed(self.inside.astype(float), grid) > 0.5
        return DomainMask(grid, inside, self.kind, self.symmetric_axes)


def node_diameter(pts: np.ndarray) -> float:
    pts = np.asarray(pts, dtype=float).reshape(-1, np.shape(pts)[-1])
    if len(pts) < 2:
        return 0.0
    if pts.shape[1] > 1 and len(pts) > 3:
        from scipy.spatial import ConvexHull, QhullError

        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff**2, axis=-1))))


def ball_mask(grid: UniformGrid, radius: float, center: Sequence[float] | None = None) -> DomainMask:
    """Open ball ``|x - c| < radius``; nodes on the sphere are exterior."""
    c = tuple(float(v) for v in (center if center is not None else (0.0,) * grid.dim))
    inside = grid.radius(c) < radius * (1 - 1e-12)
    sym = tuple(a for a in range(grid.dim) if c[a] == 0.0)
    return DomainMask(grid, inside, Ball(c, float(radius)), sym)


def box_mask(grid: UniformGrid, lo: Sequence[float], hi: Sequence[float]) -> DomainMask:
    """Open box ``lo < x < hi`` componentwise."""
    lo_a, hi_a = np.asarray(lo, float), np.asarray(hi, float)
    if lo_a.shape != (grid.dim,) or hi_a.shape != (grid.dim,):
        raise DomainError("box corners need one entry per axis")
    if np.any(lo_a >= hi_a):
        raise DomainError("box needs lo < hi on every axis")
    pts = grid.points()
    eps = 1e-12 * grid.h
    inside = np.all((pts > lo_a + eps) & (pts < hi_a - eps), axis=-1)
    sym = tuple(a for a in range(grid.dim) if np.isclose(lo_a[a], -hi_a[a]))
    return DomainMask(grid, inside, Box(tuple(lo_a), tuple(hi_a)), sym)


def full_mask(grid: UniformGrid) -> DomainMask:
    lo, hi = grid.hull()
    sym = tuple(range(grid.dim))
    return DomainMask(grid, np.ones(grid.shape, bool), Box(tuple(lo), tuple(hi)), sym)


def stadium_mask(grid: UniformGrid, half_length: float, radius: float, axis: int = 1) -> DomainMask:
    """Rectangle ``|x_axis| < half_length`` capped by half-discs of ``radius`` (dim 2)."""
    if grid.dim != 2:
        raise ValueError("stadium masks are two-dimensional")
    pts = grid.points()
    t = np.abs(pts[..., axis])
    s = pts[..., 1 - axis]
    core = (t < half_length) & (np.abs(s) < radius)
    caps = (t - half_length) ** 2 + s**2 < radius**2
    return DomainMask(grid, core | caps, Custom("stadium"), (0, 1))


def custom_mask(grid: UniformGrid, inside: np.ndarray, symmetric_axes: Sequence[int] = ()) -> DomainMask:
    return DomainMask(grid, inside, Custom(), tuple(symmetric_axes))


def convex_along_axis(inside: np.ndarray, axis: int) -> bool:
    """Every grid line parallel to ``axis`` meets the mask in one contiguous run."""
    lines = np.moveaxis(np.asarray(inside, bool), axis, -1).reshape(-1, inside.shape[axis])
    for line in lines:
        idx = np.flatnonzero(line)
        if idx.size and idx[-1] - idx[0] + 1 != idx.size:
            return False
    return True


def sigma_lambda(mask: DomainMask, lam: float, axis: int = 0) -> np.ndarray:
    """Boolean node set ``{x in mask : x_axis > lam}``."""
    _check_axis(axis, mask.grid.dim)
    m = lambda_index(mask.grid, lam)
    k = np.arange(-mask.grid.half_extent[axis], mask.grid.half_extent[axis] + 1)
    beyond = 2 * k > m
    shape = [1] * mask.grid.dim
    shape[axis] = -1
    return mask.inside & beyond.reshape(shape)


def reflect_set(nodes: np.ndarray, grid: UniformGrid, lam: float, axis: int = 0) -> np.ndarray:
    """Reflection of a node set; images falling off the grid are dropped."""
    f = reflect_function(GridFunction(grid, np.asarray(nodes, float)), lam, axis)
    return f.values > 0.5


def region_measure(nodes: np.ndarray, grid: UniformGrid) -> float:
    return float(np.count_nonzero(nodes)) * grid.h**grid.dim
