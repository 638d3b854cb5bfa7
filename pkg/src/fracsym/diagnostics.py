"""Checks of symmetry, monotonicity, moving-plane sign properties, ABP-type
bounds and decay rates on grid functions.

Moving-plane quantities are evaluated on an enlarged grid that contains the
mask and all of its reflections, using the bare lattice part of the operator.
That part alone acts on functions which vanish at the evaluation node (the
tail and boundary diagonals multiply ``w(x)``), which is the situation of
every sign claim checked here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (
    Ball,
    DomainError,
    DomainMask,
    GridFunction,
    UniformGrid,
    ZeroExterior,
    lambda_index,
    reflect_function,
    reflect_set,
    region_measure,
    sigma_lambda,
)
from .kernels import KernelBase
from .lattice import StencilConvolver
from .operator import DiscreteNonlocalOperator, assemble, stencil_weights

C_TOL = 0.1


def eps_h(h: float, alpha: float, scale: float = 1.0, c_tol: float = C_TOL) -> float:
    """Discrete tolerance ``c_tol * h^min(1, 2-2a) * scale`` for sign claims."""
    return c_tol * h ** min(1.0, 2.0 - 2.0 * alpha) * scale


def _roundoff_floor(values: np.ndarray) -> float:
    return 64.0 * np.finfo(float).eps * max(float(np.max(np.abs(values))) if values.size else 0.0, 1e-300)


# ---------------------------------------------------------------------------
# enlarged frame for reflections
# ---------------------------------------------------------------------------


@dataclass
class ReflectionFrame:
    """Grid large enough to hold a mask and its reflections for all planned planes."""

    grid: UniformGrid
    inside: np.ndarray
    u: GridFunction
    kernel: KernelBase
    axis: int
    _conv: StencilConvolver = field(repr=False, default=None)

    @classmethod
    def build(cls, u: GridFunction, mask: DomainMask, kernel: KernelBase, lams: Sequence[float], axis: int = 0):
        if u.grid != mask.grid:
            raise ValueError("grid function and mask live on different grids")
        if u.exterior.constant != 0.0:
            raise ValueError("moving-plane diagnostics require a zero exterior rule")
        grid = u.grid
        mmax = max((abs(lambda_index(grid, lam)) for lam in lams), default=0)
        ext = list(grid.half_extent)
        ext[axis] += mmax
        big = grid.enlarged(ext)
        inside = grid.embed(mask.inside.astype(float), big) > 0.5
        ub = GridFunction(big, grid.embed(u.values, big), ZeroExterior())
        return cls(big, inside, ub, kernel, axis)

    @property
    def conv(self) -> StencilConvolver:
        if self._conv is None:
            W = stencil_weights(self.grid.shape, self.grid.h, self.kernel)[0]
            self._conv = StencilConvolver(W, self.grid.shape)
        return self._conv

    def mask(self) -> DomainMask:
        return DomainMask(self.grid, self.inside, Ball((0.0,) * self.grid.dim, np.inf))

    def w(self, lam: float) -> np.ndarray:
        return reflect_function(self.u, lam, self.axis).values - self.u.values


def moving_plane_fields(u: GridFunction, mask: DomainMask, lam: float, axis: int = 0):
    """``(w, w_plus, w_minus, sigma_minus)`` on the reflection frame for one plane.

    ``w_plus`` equals ``w`` on the negativity set of the cap and vanishes
    elsewhere; ``w_minus = w - w_plus``.
    """
    from .kernels import RieszKernel

    frame = ReflectionFrame.build(u, mask, RieszKernel(0.5, u.grid.dim), [lam], axis)
    w = frame.w(lam)
    sig = sigma_lambda(frame.mask(), lam, axis)
    sm = sig & (w < -_roundoff_floor(frame.u.values))
    w_plus = np.where(sm, w, 0.0)
    w_minus = np.where(sm, 0.0, w)
    return frame.grid, w, w_plus, w_minus, sm


# ---------------------------------------------------------------------------
# moving planes and the sign claim
# ---------------------------------------------------------------------------


@dataclass
class ClaimReport:
    lam: float
    axis: int
    vacuous: bool
    residual: float
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    nodes: np.ndarray
    decomposition_gap: float
    eps: float
    passed: bool

    @property
    def min_pieces(self) -> tuple[float, float, float]:
        if self.vacuous:
            return (0.0, 0.0, 0.0)
        return (float(self.I1.min()), float(self.I2.min()), float(self.I3.min()))


@dataclass
class MovingPlaneReport:
    lam: float
    axis: int
    sigma_count: int
    sigma_minus_count: int
    sigma_minus_measure: float
    min_w: float
    claim_residual: float
    claim_passed: bool
    witnesses: list[tuple[tuple[float, ...], float]]
    eps: float
    far_field_limited: bool = False


@dataclass
class ScanResult:
    reports: list[MovingPlaneReport]
    lambda0_hat: float | None
    eps: float


def _check_nonnegative(u: GridFunction, mask: DomainMask) -> None:
    vals = u.values[mask.inside]
    if vals.size and vals.min() < -_roundoff_floor(u.values):
        raise ValueError(f"u is negative on the mask (min {vals.min():.3e})")


def _claim_on_frame(frame: ReflectionFrame, lam: float, eps: float) -> ClaimReport:
    axis = frame.axis
    grid = frame.grid
    w = frame.w(lam)
    mask = frame.mask()
    sig = sigma_lambda(mask, lam, axis)
    sm = sig & (w < -_roundoff_floor(frame.u.values))
    if not np.any(sm):
        empty = np.zeros(0)
        return ClaimReport(lam, axis, True, 0.0, empty, empty, empty, np.zeros((0, grid.dim)), 0.0, eps, True)
    B = frame.inside
    Bl = reflect_set(B, grid, lam, axis)
    P1 = B ^ Bl
    keep = sig & ~sm
    P2 = (keep | reflect_set(keep, grid, lam, axis)) & ~P1
    P3 = reflect_set(sm, grid, lam, axis) & ~P1 & ~P2
    conv = frame.conv
    I = [conv(np.where(P, w, 0.0))[sm] for P in (P1, P2, P3)]
    w_minus = np.where(sm, 0.0, w)
    Lw_minus = -conv(w_minus)[sm]
    gap = float(np.max(np.abs(Lw_minus + I[0] + I[1] + I[2])))
    residual = float(Lw_minus.max())
    passed = residual <= eps and all(float(x.min()) >= -eps for x in I)
    nodes = grid.points()[sm]
    return ClaimReport(lam, axis, False, residual, I[0], I[1], I[2], nodes, gap, eps, passed)


def verify_claim_sign(u: GridFunction, mask: DomainMask, kernel: KernelBase, lam: float,
                      axis: int = 0, eps: float | None = None) -> ClaimReport:
    """Evaluate ``L w_minus`` on the negativity set of the cap and its split into
    the lens, the non-negative cap part with its mirror image, and the mirror
    image of the negativity set."""
    _check_nonnegative(u, mask)
    lambda_index(u.grid, lam)
    if eps is None:
        eps = eps_h(u.grid.h, kernel.inner_alpha, float(np.max(np.abs(u.values))))
    frame = ReflectionFrame.build(u, mask, kernel, [lam], axis)
    return _claim_on_frame(frame, lam, eps)


def moving_plane_scan(u: GridFunction, mask: DomainMask, kernel: KernelBase, lams: Sequence[float],
                      axis: int = 0, eps: float | None = None, witness_radius: float | None = None) -> ScanResult:
    """One report per plane position plus the smallest position from which all
    further planes (in the list) keep ``w >= -eps`` on the cap."""
    _check_nonnegative(u, mask)
    for lam in lams:
        lambda_index(u.grid, lam)
    if eps is None:
        eps = eps_h(u.grid.h, kernel.inner_alpha, float(np.max(np.abs(u.values))))
    frame = ReflectionFrame.build(u, mask, kernel, lams, axis)
    fmask = frame.mask()
    limited = not kernel.has_far_field
    if witness_radius is None and limited:
        witness_radius = 0.5
    reports = []
    zero_tol = _roundoff_floor(frame.u.values)
    for lam in lams:
        w = frame.w(lam)
        sig = sigma_lambda(fmask, lam, axis)
        claim = _claim_on_frame(frame, lam, eps)
        sm_count = 0 if claim.vacuous else len(claim.nodes)
        min_w = float(w[sig].min()) if np.any(sig) else 0.0
        contact = sig & (np.abs(w) <= zero_tol)
        witnesses = []
        if np.any(contact) and np.any(np.abs(w) > zero_tol):
            Lw = -frame.conv(w)
            pos = frame.grid.points()
            for idx in np.argwhere(contact)[:64]:
                x0 = pos[tuple(idx)]
                if witness_radius is not None:
                    near = np.abs(w) > zero_tol
                    d = np.sqrt(np.min(np.sum((pos[near] - x0) ** 2, axis=-1)))
                    if d > witness_radius:
                        continue
                witnesses.append((tuple(float(c) for c in x0), float(Lw[tuple(idx)])))
        reports.append(MovingPlaneReport(
            lam, axis, int(sig.sum()), sm_count, region_measure(np.ones(sm_count), frame.grid),
            min_w, claim.residual, claim.passed, witnesses, eps, limited,
        ))
    lam0 = None
    for rep in sorted(reports, key=lambda r: -r.lam):
        if rep.min_w >= -eps:
            lam0 = rep.lam
        else:
            break
    return ScanResult(reports, lam0, eps)


def contact_pair(mask: DomainMask, lam: float, x0_index: Sequence[int], rng: np.random.Generator,
                 axis: int = 0, support_radius: float | None = None):
    """Build ``u = s + v`` with ``s`` symmetric about the plane and ``v <= 0``
    supported beyond the plane, vanishing only at the node ``x0``.

    Then ``w = u_lam - u >= 0`` beyond the plane with a single zero at ``x0``
    inside the support.  Returns ``(u, x0)`` with ``u`` on the reflection frame.
    """
    from .kernels import RieszKernel

    grid = mask.grid
    m = lambda_index(grid, lam)
    frame = ReflectionFrame.build(GridFunction(grid, np.zeros(grid.shape)), mask,
                                  RieszKernel(0.5, grid.dim), [lam], axis)
    big = frame.grid
    pts = big.points()
    ext = np.asarray(big.half_extent)
    x0_idx = np.asarray(x0_index, int)
    if 2 * x0_idx[axis] <= m:
        raise ValueError("contact node must lie beyond the plane")
    x0 = x0_idx * grid.h
    # symmetric part: random radial bumps mirrored in the plane
    s = np.zeros(big.shape)
    for _ in range(3):
        c = rng.uniform(-0.5, 0.5, grid.dim)
        amp = rng.uniform(0.2, 1.0)
        rad = rng.uniform(0.3, 0.8)
        bump = np.clip(rad**2 - np.sum((pts - c) ** 2, axis=-1), 0.0, None)
        s += amp * bump
    s = s + reflect_function(GridFunction(big, s), lam, axis).values
    beyond = (2 * np.arange(-ext[axis], ext[axis] + 1) > m).reshape(
        [-1 if a == axis else 1 for a in range(grid.dim)])
    cap = frame.inside & beyond
    dist2 = np.sum((pts - x0) ** 2, axis=-1)
    phi = (0.1 + rng.uniform(0.0, 1.0, big.shape)) * dist2
    if support_radius is not None:
        cap = cap & (dist2 <= support_radius**2)
    v = -np.where(cap, phi, 0.0)
    v[tuple(x0_idx + ext)] = 0.0
    return GridFunction(big, s + v), x0


def comparison_witness(u: GridFunction, kernel: KernelBase, lam: float, x0: Sequence[float], axis: int = 0) -> float:
    """``(L w_lam)(x0)`` with ``w_lam = u_lam - u`` (requires ``w_lam(x0) = 0``)."""
    grid = u.grid
    w = reflect_function(u, lam, axis).values - u.values
    k = np.rint(np.asarray(x0) / grid.h).astype(int) + np.asarray(grid.half_extent)
    if abs(w[tuple(k)]) > _roundoff_floor(u.values):
        raise ValueError("x0 is not a contact node")
    W = stencil_weights(grid.shape, grid.h, kernel)[0]
    shift = np.asarray(grid.shape) - 1
    # single row of the lattice operator
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    diff = idx - k + shift
    weights = W[tuple(diff.T)]
    return float(-np.dot(weights, w.ravel()))


# ---------------------------------------------------------------------------
# ABP-type bounds and the small-domain principle
# ---------------------------------------------------------------------------


class AbpRejected(ValueError):
    """The pair does not satisfy the supersolution inequality within tolerance."""


@dataclass
class AbpReport:
    inf_w: float
    neg_inf_w: float
    d: float
    hinf: float
    hLN: float
    measure: float
    bound1: float
    bound2: float
    ratio1: float
    ratio2: float
    max_violation: float
    domain_id: str = ""


def domain_diameter(mask: DomainMask) -> float:
    return mask.diameter()


def abp_check(w: GridFunction, h_rhs: GridFunction | np.ndarray, mask: DomainMask, kernel: KernelBase,
              op: DiscreteNonlocalOperator | None = None, tol: float | None = None,
              domain_id: str = "") -> AbpReport:
    """Measure the constants implied by the ABP bound for a supersolution pair.

    The pair must satisfy ``-L w <= h`` on the mask and ``w >= 0`` outside.
    """
    grid = mask.grid
    N = grid.dim
    a = kernel.inner_alpha
    hv = h_rhs.values if isinstance(h_rhs, GridFunction) else np.asarray(h_rhs, float).reshape(grid.shape)
    c = w.exterior.constant
    if c is None or c < 0:
        raise AbpRejected("w must be non-negative outside the mask (constant exterior >= 0)")
    floor = _roundoff_floor(w.values)
    if np.any(w.values[~mask.inside] < -floor):
        raise AbpRejected("w is negative at grid nodes outside the mask")
    if op is None:
        op = assemble(grid, mask, kernel)
    Lw = op.apply_values(w.values, c)[mask.inside]
    hin = hv[mask.inside]
    if tol is None:
        tol = eps_h(grid.h, a, max(float(np.max(np.abs(hin))), 1e-300))
    violation = float(np.max(-Lw - hin)) if hin.size else 0.0
    if violation > tol:
        raise AbpRejected(f"supersolution inequality violated by {violation:.3e} (tol {tol:.3e})")
    hp = np.maximum(hin, 0.0)
    hinf = float(hp.max()) if hp.size else 0.0
    hLN = float((np.sum(hp**N) * grid.h**N) ** (1.0 / N))
    meas = mask.measure()
    d = mask.diameter()
    inf_w = float(w.values[mask.inside].min())
    neg = max(0.0, -inf_w)
    b1 = d**a * hinf ** (1 - a) * hLN**a
    b2 = d**a * hinf * meas ** (a / N)
    r1 = neg / b1 if neg > 0 else 0.0
    r2 = neg / b2 if neg > 0 else 0.0
    return AbpReport(inf_w, neg, d, hinf, hLN, meas, b1, b2, r1, r2, violation, domain_id)


def torsion_pair(mask: DomainMask, kernel: KernelBase, opts=None):
    """``(w, h)`` with ``w = -tau``, ``L tau = 1``: equality case of the bound."""
    from .solver import ProblemSpec, SolveOptions, SourceTerm, solve_scalar

    op = assemble(mask.grid, mask, kernel)
    tau, _ = solve_scalar(ProblemSpec(mask, kernel, g=SourceTerm.constant(1.0)), opts or SolveOptions(), op)
    w = GridFunction(mask.grid, -tau.values)
    h = np.where(mask.inside, 1.0, 0.0)
    return w, h, op


@dataclass
class SmallDomainReport:
    c_emp: float
    d0: float
    phi_bound: float
    delta_hat: float
    measures: list[float]
    kappas: list[float]
    largest_admissible: float | None
    abp: list[AbpReport]


def small_domain_probe(mask_family: Sequence[DomainMask], phi_bound: float, kernel: KernelBase,
                       opts=None) -> SmallDomainReport:
    """Empirical threshold for the small-domain maximum principle.

    The constant ``C_emp`` is the largest measured ratio of the
    measure-form ABP bound over the family (torsion pairs).  With ``d0`` the
    largest diameter in the family, ``kappa(m) = C_emp d0^a phi m^(a/N)`` and
    ``delta_hat`` solves ``kappa = 1``.
    """
    if not mask_family:
        raise ValueError("mask family is empty")
    N = kernel.dim
    a = kernel.inner_alpha
    reports = []
    for i, mask in enumerate(mask_family):
        w, h, op = torsion_pair(mask, kernel, opts)
        reports.append(abp_check(w, h, mask, kernel, op=op, domain_id=str(i)))
    c_emp = max(r.ratio2 for r in reports)
    d0 = max(r.d for r in reports)
    measures = [r.measure for r in reports]
    pre = c_emp * d0**a * phi_bound
    kappas = [pre * m ** (a / N) for m in measures]
    delta = pre ** (-N / a) if pre > 0 else np.inf
    adm = [m for m, k in zip(measures, kappas) if k < 1]
    return SmallDomainReport(c_emp, d0, phi_bound, float(delta), measures, kappas,
                             max(adm) if adm else None, reports)


# ---------------------------------------------------------------------------
# symmetry and monotonicity
# ---------------------------------------------------------------------------


@dataclass
class SymmetryReport:
    mode: str
    max_asymmetry: float
    per_bin_spread: np.ndarray
    bin_radii: np.ndarray
    tolerance: float
    passed: bool


@dataclass
class MonotonicityReport:
    strictly_decreasing: bool
    worst_violation: float
    witness: tuple[float, ...] | None
    tolerance: float
    passed: bool


def _radius_groups(mask: DomainMask):
    grid = mask.grid
    c = np.asarray(mask.kind.center)
    ext = np.asarray(grid.half_extent)
    idx = np.argwhere(mask.inside) - ext
    # exact lattice radius when the centre is a node, else rounded float radius
    cidx = c / grid.h
    if np.allclose(cidx, np.rint(cidx)):
        key = np.sum((idx - np.rint(cidx).astype(int)) ** 2, axis=1)
    else:
        key = np.round(np.sum((idx - cidx) ** 2, axis=1), 9)
    keys, inv = np.unique(key, return_inverse=True)
    return keys, inv, np.sqrt(keys.astype(float)) * grid.h


def radial_profile(u: GridFunction, mask: DomainMask) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``u`` over each exact lattice-radius shell of a ball mask."""
    if not isinstance(mask.kind, Ball):
        raise DomainError("radial profile needs a ball mask")
    keys, inv, r = _radius_groups(mask)
    vals = u.values[mask.inside]
    means = np.bincount(inv, weights=vals) / np.bincount(inv)
    return r, means


def check_radial_symmetry(u: GridFunction, mask: DomainMask, tol: float | None = None) -> SymmetryReport:
    """Deviation of ``u`` from its mean over nodes at equal distance from the centre.

    Nodes are grouped by exact lattice radius (a radial function is constant
    on each group); the report lists the spread of deviations per radius bin of
    width ``h`` and the largest deviation relative to ``max |u|``.
    """
    if not isinstance(mask.kind, Ball):
        raise DomainError("radial symmetry check needs a ball mask; use the axial variant")
    grid = mask.grid
    if tol is None:
        tol = 2e-2 + grid.h
    keys, inv, r = _radius_groups(mask)
    vals = u.values[mask.inside]
    means = np.bincount(inv, weights=vals) / np.bincount(inv)
    dev = vals - means[inv]
    unorm = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    bins = np.floor(r[inv] / grid.h).astype(int)
    nb = int(bins.max()) + 1 if bins.size else 0
    hi = np.full(nb, -np.inf)
    lo = np.full(nb, np.inf)
    np.maximum.at(hi, bins, dev)
    np.minimum.at(lo, bins, dev)
    present = np.isfinite(hi)
    spread = np.where(present, hi - lo, 0.0)
    asym = float(np.max(np.abs(dev)) / unorm) if unorm > 0 else 0.0
    return SymmetryReport("radial", asym, spread, (np.arange(nb) + 0.5) * grid.h, tol, asym <= tol)


def check_radial_monotonicity(u: GridFunction, mask: DomainMask, eps: float | None = None,
                              alpha: float = 0.5) -> MonotonicityReport:
    """Shell means must not increase outward by more than ``eps``."""
    r, means = radial_profile(u, mask)
    unorm = float(np.max(np.abs(u.values)))
    if eps is None:
        eps = eps_h(mask.grid.h, alpha, unorm)
    inc = np.diff(means)
    worst = float(inc.max()) if inc.size else 0.0
    witness = None
    if inc.size and worst > 0:
        witness = (float(r[int(np.argmax(inc)) + 1]),)
    return MonotonicityReport(bool(np.all(inc < 0)), max(worst, 0.0), witness, eps, worst <= eps)


def check_axial_symmetry_monotonicity(u: GridFunction, mask: DomainMask, axis: int = 0,
                                      tol: float | None = None, eps: float | None = None,
                                      alpha: float = 0.5) -> tuple[SymmetryReport, MonotonicityReport]:
    """Compare ``u(x_axis, x')`` with ``u(-x_axis, x')`` and test decrease along
    grid lines parallel to ``axis`` for ``x_axis > 0``."""
    if not mask.is_convex_along(axis):
        raise DomainError(f"mask is not convex along axis {axis}")
    if not np.array_equal(mask.inside, np.flip(mask.inside, axis=axis)):
        raise DomainError(f"mask is not symmetric in axis {axis}")
    grid = mask.grid
    if tol is None:
        tol = 2e-2 + grid.h
    vals = np.where(mask.inside, u.values, 0.0)
    unorm = float(np.max(np.abs(vals)))
    asym_field = np.abs(vals - np.flip(vals, axis=axis))
    asym = float(asym_field.max() / unorm) if unorm > 0 else 0.0
    line_idx = np.arange(-grid.half_extent[axis], grid.half_extent[axis] + 1)
    lines = np.moveaxis(vals, axis, -1)
    ins = np.moveaxis(mask.inside, axis, -1)
    n = grid.half_extent[axis]
    pos = lines[..., n:]
    pin = ins[..., n:]
    both = pin[..., 1:] & pin[..., :-1]
    inc = np.where(both, pos[..., 1:] - pos[..., :-1], -np.inf)
    spread = np.max(asym_field, axis=axis)
    sym = SymmetryReport("axial", asym, np.ravel(spread), np.zeros(0), tol, asym <= tol)
    if eps is None:
        eps = eps_h(grid.h, alpha, unorm)
    worst = float(inc.max()) if np.any(both) else -np.inf
    witness = None
    if worst > 0:
        loc = np.unravel_index(int(np.argmax(inc)), inc.shape)
        k = loc[-1] + 1  # the node where the increase lands
        others = [(i - e) * grid.h for i, e in zip(loc[:-1], [grid.half_extent[a] for a in range(grid.dim) if a != axis])]
        coords = list(others)
        coords.insert(axis, float(line_idx[n + k] * grid.h))
        witness = tuple(float(c) for c in coords)
    strict = bool(np.all(inc[both] < 0)) if np.any(both) else True
    mono = MonotonicityReport(strict, max(worst, 0.0), witness, eps, worst <= eps)
    return sym, mono


# ---------------------------------------------------------------------------
# decay exponents
# ---------------------------------------------------------------------------


@dataclass
class DecayReport:
    m_hat: float
    window: tuple[float, float]
    n_points: int
    curvature: float
    power_law: bool
    gamma: float | None = None
    condition_bound: float | None = None
    condition_holds: bool | None = None
    target: float | None = None
    target_ratio: float | None = None


def decay_condition(m: float, alpha: float, gamma: float, dim: int) -> bool:
    """``m > max(2a/gamma, N/(gamma+2))``."""
    return bool(m > max(2 * alpha / gamma, dim / (gamma + 2)))


def decay_target(dim: int, alpha: float, q: float) -> float:
    """Decay rate ``(N + 2a)/q`` expected for ``u^p - u^q`` nonlinearities."""
    return (dim + 2 * alpha) / q


def decay_fit(profile, window: tuple[float, float], alpha: float | None = None, gamma: float | None = None,
              dim: int | None = None, q: float | None = None, curvature_tol: float = 0.05) -> DecayReport:
    """Least-squares slope of ``log u`` against ``log r`` over ``window``.

    ``profile`` is ``(r, u)`` or a grid function on a centred ball (its shell
    means are used).  A quadratic term in log-log coordinates measures the
    drift of the local slope across the window; a drift above
    ``curvature_tol`` times the slope flags the data as not a power law.
    """
    if isinstance(profile, GridFunction):
        g = profile.grid
        r, u = radial_profile(profile, DomainMask(g, np.ones(g.shape, bool), Ball((0.0,) * g.dim, np.inf)))
    else:
        r, u = (np.asarray(a, float) for a in profile)
    lo, hi = window
    sel = (r >= lo) & (r <= hi)
    if np.count_nonzero(sel) < 5:
        raise ValueError(f"window [{lo}, {hi}] holds fewer than 5 points")
    rs, us = r[sel], u[sel]
    if np.any(us <= 0):
        raise ValueError("profile must be positive on the fit window")
    x, y = np.log(rs), np.log(us)
    slope = np.polyfit(x, y, 1)[0]
    c2 = np.polyfit(x, y, 2)[0]
    drift = abs(2 * c2 * (x.max() - x.min()))
    curvature = float(drift / max(abs(slope), 1e-300))
    rep = DecayReport(float(-slope), (float(lo), float(hi)), int(sel.sum()), curvature, curvature <= curvature_tol)
    if gamma is not None and alpha is not None and dim is not None:
        rep.gamma = gamma
        rep.condition_bound = max(2 * alpha / gamma, dim / (gamma + 2))
        rep.condition_holds = decay_condition(rep.m_hat, alpha, gamma, dim)
    if q is not None and alpha is not None and dim is not None:
        rep.target = decay_target(dim, alpha, q)
        rep.target_ratio = rep.m_hat * q / (dim + 2 * alpha)
    return rep


# ---------------------------------------------------------------------------
# random test data
# ---------------------------------------------------------------------------


def random_bump(mask: DomainMask, rng: np.random.Generator, terms: int = 3, power: float = 1.0) -> GridFunction:
    """Nonnegative sum of off-centre caps ``(r^2 - |x - c|^2)_+^power`` inside the mask."""
    grid = mask.grid
    pts = grid.points()
    R = mask.kind.radius if isinstance(mask.kind, Ball) else 1.0
    vals = np.zeros(grid.shape)
    for _ in range(terms):
        c = rng.uniform(-0.7, 0.7, grid.dim) * R
        rad = rng.uniform(0.2, 0.8) * R
        amp = rng.uniform(0.1, 1.0)
        vals += amp * np.clip(rad**2 - np.sum((pts - c) ** 2, axis=-1), 0.0, None) ** power
    return GridFunction(grid, np.where(mask.inside, vals, 0.0))
