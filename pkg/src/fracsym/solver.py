"""Semilinear Dirichlet problems, two-component systems and whole-space surrogates.

Unknowns are the values at mask nodes; every other node, and everything
beyond the grid, is held at zero.  Scalar problems use damped Newton with a
generalized slope for nonlinearities that are not Lipschitz at zero, with a
Picard fallback ``u <- L^{-1}(f(u) + g)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, cg, gmres

from .geometry import Ball, DomainMask, GridFunction, UniformGrid, ball_mask
from .kernels import KernelBase, RieszKernel
from .operator import DENSE_LIMIT, DiscreteNonlocalOperator, apply, assemble, dense_matrix

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    """Iteration limit reached; ``best`` holds the lowest-residual iterate."""

    def __init__(self, message: str, report=None, best=None):
        super().__init__(message)
        self.report = report
        self.best = best


class NonlinearityDomain(ValueError):
    """An iterate left the domain where the nonlinearity is defined."""


class NoPositiveBranch(RuntimeError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class HypothesisViolation(ValueError):
    pass


# ---------------------------------------------------------------------------
# nonlinearities and sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthCertificate:
    """Local bound ``(f(v) - f(u)) / (v - u) <= C (u + v)^gamma`` for ``0 < u < v < s0``."""

    gamma: float
    s0: float
    C: float


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    a: float = 0.0
    b: float = 0.0
    p: float = 1.0
    q: float = 0.5
    table_u: tuple[float, ...] = ()
    table_f: tuple[float, ...] = ()
    lipschitz: float | None = None
    growth: GrowthCertificate | None = None
    monotone: bool = False
    # power: f = c u^p; powerdiff: f = u^p - c u^q (c is the continuation parameter)
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "power", "powerdiff", "table"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "powerdiff" and not (0 < self.q < 1 < self.p):
            raise ValueError("u^p - u^q requires 0 < q < 1 < p")
        if self.kind == "power" and self.p <= 0:
            raise ValueError("power nonlinearity requires p > 0")
        if self.kind == "table":
            tu = np.asarray(self.table_u)
            if tu.size < 2 or np.any(np.diff(tu) <= 0) or len(self.table_f) != tu.size:
                raise ValueError("table nonlinearity needs increasing abscissae and matching values")
            if self.lipschitz is None:
                raise ValueError("table nonlinearity needs a declared Lipschitz constant")
            slopes = np.abs(np.diff(self.table_f) / np.diff(tu))
            if np.any(slopes > self.lipschitz * (1 + 1e-12)):
                raise ValueError("table violates its declared Lipschitz constant")

    # constructors
    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls("linear", 0.0, 0.0, monotone=True)

    @classmethod
    def linear(cls, a: float, b: float = 0.0, **kw) -> "Nonlinearity":
        return cls("linear", float(a), float(b), monotone=kw.pop("monotone", a >= 0), **kw)

    @classmethod
    def power(cls, p: float, coef: float = 1.0, **kw) -> "Nonlinearity":
        return cls("power", p=float(p), c=float(coef), monotone=kw.pop("monotone", coef >= 0), **kw)

    @classmethod
    def power_diff(cls, p: float, q: float, **kw) -> "Nonlinearity":
        return cls("powerdiff", p=float(p), q=float(q), **kw)

    @classmethod
    def table(cls, u: Sequence[float], f: Sequence[float], lipschitz: float, **kw) -> "Nonlinearity":
        return cls("table", table_u=tuple(map(float, u)), table_f=tuple(map(float, f)),
                   lipschitz=float(lipschitz), **kw)

    @property
    def needs_nonnegative(self) -> bool:
        if self.kind == "powerdiff":
            return True
        return self.kind == "power" and float(self.p) != int(self.p)

    @property
    def is_zero(self) -> bool:
        return self.kind == "linear" and self.a == 0.0 and self.b == 0.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.needs_nonnegative and np.any(u < 0):
            raise NonlinearityDomain(f"{self.kind} nonlinearity evaluated at negative u")
        if self.kind == "linear":
            return self.a * u + self.b
        if self.kind == "power":
            return self.c * u**self.p
        if self.kind == "powerdiff":
            return u**self.p - self.c * u**self.q
        return np.interp(u, self.table_u, self.table_f)

    def slope(self, u, floor: float = 1e-8):
        """Derivative, or a generalized slope where ``f`` is not differentiable.

        For fractional powers the slope is taken at ``max(u, floor)`` so it never
        blows up at the origin.
        """
        u = np.asarray(u, dtype=float)
        if self.kind == "linear":
            return np.full(u.shape, self.a)
        if self.kind == "power":
            base = np.maximum(u, floor) if self.needs_nonnegative else u
            return self.c * self.p * base ** (self.p - 1)
        if self.kind == "powerdiff":
            base = np.maximum(u, floor)
            return self.p * base ** (self.p - 1) - self.c * self.q * base ** (self.q - 1)
        tu, tf = np.asarray(self.table_u), np.asarray(self.table_f)
        i = np.clip(np.searchsorted(tu, u, side="right") - 1, 0, tu.size - 2)
        s = (tf[i + 1] - tf[i]) / (tu[i + 1] - tu[i])
        return np.where((u < tu[0]) | (u > tu[-1]), 0.0, s)

    def check_growth(self, samples: int = 2000, seed: int = 0) -> bool:
        """Sampled check of the growth certificate over random ``0 < u < v < s0``."""
        if self.growth is None:
            return True
        g = self.growth
        rng = np.random.default_rng(seed)
        uv = np.sort(rng.uniform(0, g.s0, size=(samples, 2)), axis=1)
        u, v = uv[:, 0], uv[:, 1]
        ok = v > u
        u, v = u[ok], v[ok]
        quot = (self(v) - self(u)) / (v - u)
        return bool(np.all(quot <= g.C * (u + v) ** g.gamma * (1 + 1e-9) + 1e-12))

    def check_monotone(self, u_max: float, samples: int = 2001) -> bool:
        s = np.linspace(0.0, u_max, samples)
        return bool(np.all(np.diff(self(s)) >= -1e-14 * (1 + np.abs(self(s[1:])))))


@dataclass(frozen=True)
class SourceTerm:
    """Right-hand side ``g``: zero, radial or axial decreasing profile, or grid data."""

    kind: str = "zero"
    radii: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    axis: int = 0
    center: tuple[float, ...] | None = None
    data: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "radial", "axial", "custom"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind in ("radial", "axial"):
            r = np.asarray(self.radii, float)
            v = np.asarray(self.values, float)
            if r.size == 0 or r.shape != v.shape or np.any(np.diff(r) <= 0):
                raise ValueError("profile needs strictly increasing radii and matching values")
            if np.any(np.diff(v) > 0):
                raise ValueError("source profile must be non-increasing")
        if self.kind == "custom" and self.data is None:
            raise ValueError("custom source needs grid data")

    @classmethod
    def zero(cls) -> "SourceTerm":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "SourceTerm":
        return cls("radial", (0.0, 1.0), (float(c), float(c)))

    @classmethod
    def radial(cls, radii, values, center=None) -> "SourceTerm":
        return cls("radial", tuple(map(float, radii)), tuple(map(float, values)),
                   center=None if center is None else tuple(center))

    @classmethod
    def radial_function(cls, fn: Callable, r_max: float, samples: int = 4097) -> "SourceTerm":
        r = np.linspace(0.0, r_max, samples)
        return cls.radial(r, fn(r))

    @classmethod
    def axial(cls, axis: int, radii, values) -> "SourceTerm":
        return cls("axial", tuple(map(float, radii)), tuple(map(float, values)), axis=axis)

    @classmethod
    def custom(cls, data: np.ndarray) -> "SourceTerm":
        return cls("custom", data=np.asarray(data, float))

    def values_on(self, grid: UniformGrid) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.shape)
        if self.kind == "custom":
            return np.asarray(self.data, float).reshape(grid.shape)
        if self.kind == "radial":
            r = grid.radius(self.center)
        else:
            r = np.abs(grid.points()[..., self.axis])
        return np.interp(r, self.radii, self.values)


# ---------------------------------------------------------------------------
# problem containers
# ---------------------------------------------------------------------------


@dataclass
class ProblemSpec:
    mask: DomainMask
    kernel: KernelBase
    f: Nonlinearity = field(default_factory=Nonlinearity.zero)
    g: SourceTerm = field(default_factory=SourceTerm.zero)


@dataclass
class SystemSpec:
    mask: DomainMask
    alpha1: float
    alpha2: float
    f1: Nonlinearity
    f2: Nonlinearity
    g1: SourceTerm
    g2: SourceTerm
    require_monotone: bool = True


@dataclass
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0
    fallback: str = "picard"
    initial: object = "zero"
    positivity_floor: float = 1e-8
    system_mode: str = "jacobi"
    linear_rtol: float = 1e-6
    linear_maxiter: int = 5000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.fallback not in ("picard", "none"):
            raise ValueError("fallback must be 'picard' or 'none'")
        if self.system_mode not in ("jacobi", "gauss_seidel", "newton"):
            raise ValueError("system_mode must be jacobi, gauss_seidel or newton")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    method: str
    history: list[float]
    sign: str
    notes: list[str] = field(default_factory=list)
    effective_tol: float = 0.0


def classify_sign(values: np.ndarray, tiny: float = 0.0) -> str:
    v = np.asarray(values)
    if v.size == 0 or np.all(v == 0):
        return "zero"
    if np.all(v > tiny):
        return "positive"
    if np.all(v >= -tiny):
        return "nonnegative"
    return "sign-changing"


# ---------------------------------------------------------------------------
# linear algebra helpers
# ---------------------------------------------------------------------------


class _LinearSolver:
    """Solves ``(L - diag(s)) x = b`` on mask unknowns, dense or matrix-free."""

    def __init__(self, op: DiscreteNonlocalOperator, opts: SolveOptions):
        self.op = op
        self.opts = opts
        self.n = op.n_interior
        self.dense = dense_matrix(op) if self.n <= DENSE_LIMIT else None
        self._chol = None
        self.diag = op.diagonal()
        self.Lop = op.linear_operator()

    def matvec(self, x):
        if self.dense is not None:
            return self.dense @ x
        return self.Lop.matvec(x)

    def solve(self, b: np.ndarray, shift: np.ndarray | None = None, x0=None, atol: float = 0.0,
              rtol: float | None = None) -> np.ndarray:
        if self.dense is not None:
            if shift is None or not np.any(shift):
                if self._chol is None:
                    self._chol = linalg.cho_factor(self.dense)
                return linalg.cho_solve(self._chol, b)
            return linalg.solve(self.dense - np.diag(shift), b, assume_a="sym")
        if float(np.linalg.norm(b)) <= atol:
            return np.zeros(self.n) if x0 is None else np.asarray(x0, float)
        s = np.zeros(self.n) if shift is None else shift
        A = LinearOperator((self.n, self.n), matvec=lambda x: self.Lop.matvec(x) - s * x, dtype=float)
        d = self.diag - s
        spd = np.all(s <= 0)
        M = None
        if np.all(d > 0):
            M = LinearOperator((self.n, self.n), matvec=lambda x: x / d, dtype=float)
        o = self.opts
        rtol = o.linear_rtol if rtol is None else rtol
        if spd:
            x, info = cg(A, b, x0=x0, rtol=rtol, atol=atol, maxiter=o.linear_maxiter, M=M)
            if info == 0:
                return x
        x, info = gmres(A, b, x0=x0, rtol=rtol, atol=atol, restart=200,
                        maxiter=o.linear_maxiter, M=M)
        if info != 0:
            raise linalg.LinAlgError(f"iterative linear solve failed (info={info})")
        return x


def _initial_guess(op, opts, rhs_scale, lin: _LinearSolver, n: int) -> np.ndarray:
    init = opts.initial
    if isinstance(init, GridFunction):
        return init.values[op.mask.inside].copy()
    if isinstance(init, np.ndarray):
        arr = np.asarray(init, float)
        return arr[op.mask.inside].copy() if arr.shape == op.grid.shape else arr.ravel().copy()
    if init == "zero":
        return np.zeros(n)
    if init == "torsion":
        tau = lin.solve(np.ones(n))
        return tau * (rhs_scale if rhs_scale > 0 else 1.0)
    raise ValueError(f"unknown initial guess {init!r}")


def _eval_f(f: Nonlinearity, x: np.ndarray) -> np.ndarray:
    if f.needs_nonnegative:
        slack = 1e-10 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
        if np.any(x < -slack):
            raise NonlinearityDomain(f"iterate dipped to {x.min():.3e} under a nonlinearity defined for u >= 0")
        x = np.maximum(x, 0.0)
    return f(x)


# ---------------------------------------------------------------------------
# scalar problems
# ---------------------------------------------------------------------------


def solve_scalar(spec: ProblemSpec, opts: SolveOptions | None = None,
                 op: DiscreteNonlocalOperator | None = None) -> tuple[GridFunction, SolveReport]:
    """Solve ``L u = f(u) + g`` in the mask with ``u = 0`` outside."""
    opts = opts or SolveOptions()
    mask = spec.mask
    if op is None:
        op = assemble(mask.grid, mask, spec.kernel)
    lin = _LinearSolver(op, opts)
    g = spec.g.values_on(mask.grid)[mask.inside]
    f = spec.f
    x = _initial_guess(op, opts, float(np.max(np.abs(g))) if g.size else 0.0, lin, lin.n)
    x = _newton_scalar(lin, f, g, x, opts)
    return _finish(op, spec, x, opts, lin)


def _residual(lin: _LinearSolver, f: Nonlinearity, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    return lin.matvec(x) - _eval_f(f, x) - g


def _effective_tol(diag: np.ndarray, f: Nonlinearity, g: np.ndarray, x: np.ndarray, tol: float) -> float:
    """``tol``, raised to the floating-point floor of the residual evaluation when
    the terms being cancelled are large."""
    if x.size == 0:
        return tol
    terms = np.max(np.abs(diag * x)) + np.max(np.abs(_eval_f(f, x))) + np.max(np.abs(g))
    return max(tol, 256 * np.finfo(float).eps * float(terms))


class _Progress:
    def __init__(self):
        self.history: list[float] = []
        self.method = "newton"
        self.notes: list[str] = []
        self.best = None
        self.best_res = np.inf

    def record(self, x, r):
        self.history.append(r)
        if r < self.best_res:
            self.best_res, self.best = r, x.copy()


def _newton_scalar(lin: _LinearSolver, f: Nonlinearity, g: np.ndarray, x: np.ndarray, opts: SolveOptions):
    prog = _Progress()
    lin.progress = prog
    F = _residual(lin, f, g, x)
    res = float(np.max(np.abs(F))) if F.size else 0.0
    prog.record(x, res)
    mode = "newton"
    for it in range(opts.max_iter):
        if res <= _effective_tol(lin.diag, f, g, x, opts.tol):
            break
        if mode == "newton":
            try:
                step = lin.solve(-F, shift=f.slope(x, opts.positivity_floor), atol=0.05 * opts.tol)
                t = opts.damping
                accepted = False
                for _ in range(20):
                    xn = x + t * step
                    try:
                        Fn = _residual(lin, f, g, xn)
                    except NonlinearityDomain:
                        t *= 0.5
                        continue
                    rn = float(np.max(np.abs(Fn)))
                    if rn < res * (1 - 1e-4 * t) or rn <= opts.tol:
                        accepted = True
                        break
                    t *= 0.5
                if not accepted:
                    raise linalg.LinAlgError("line search failed")
            except (linalg.LinAlgError, np.linalg.LinAlgError) as exc:
                if opts.fallback != "picard":
                    raise NonConvergence(f"Newton step failed: {exc}", best=prog.best) from exc
                prog.notes.append(f"newton failed at iteration {it}: {exc}; switching to picard")
                mode = "picard"
                prog.method = "newton+picard"
                continue
        else:
            target = lin.solve(_eval_f(f, x) + g, atol=0.05 * opts.tol)
            xn = (1 - opts.damping) * x + opts.damping * target
            if not np.all(np.isfinite(xn)):
                break
            with np.errstate(over="ignore", invalid="ignore"):
                Fn = _residual(lin, f, g, xn)
            rn = float(np.max(np.abs(Fn)))
            if not np.isfinite(rn):
                break
        x, F, res = xn, Fn, rn
        prog.record(x, res)
    prog.final = x
    return x


def _finish(op, spec: ProblemSpec, x: np.ndarray, opts: SolveOptions, lin: _LinearSolver):
    prog: _Progress = lin.progress
    u = GridFunction(op.grid, op.embed(x))
    # independent re-check through the public apply
    Lu = apply(op, u).values[op.mask.inside]
    gvals = spec.g.values_on(op.grid)[op.mask.inside]
    res = float(np.max(np.abs(Lu - _eval_f(spec.f, x) - gvals))) if x.size else 0.0
    scale = max(float(np.max(np.abs(x))) if x.size else 0.0, 1.0)
    tol = _effective_tol(lin.diag, spec.f, gvals, x, opts.tol)
    report = SolveReport(
        converged=res <= tol,
        iterations=len(prog.history) - 1,
        residual=res,
        method=prog.method,
        history=prog.history,
        sign=classify_sign(x, 1e-12 * scale),
        notes=prog.notes,
        effective_tol=tol,
    )
    if tol > opts.tol:
        report.notes.append(f"tolerance raised to roundoff floor {tol:.2e}")
    if not report.converged:
        best = GridFunction(op.grid, op.embed(prog.best)) if prog.best is not None else u
        raise NonConvergence(
            f"residual {res:.3e} above tol {opts.tol:.1e} after {report.iterations} iterations",
            report, best,
        )
    g_nonneg = np.all(gvals >= 0)
    if g_nonneg and np.any(gvals > 0) and _nonneg_rhs(spec.f, x) and np.any(x < -1e-12 * scale):
        report.notes.append("scheme bug: negative values for a nonnegative right-hand side")
        log.warning("negative solution values for nonnegative data (min %.3e)", x.min())
    return u, report


def _nonneg_rhs(f: Nonlinearity, x: np.ndarray) -> bool:
    s = np.linspace(0.0, max(float(np.max(np.abs(x))), 1e-12), 257)
    try:
        return bool(np.all(f(s) >= 0))
    except NonlinearityDomain:
        return False


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


@dataclass
class SystemReport:
    converged: bool
    iterations: int
    residual_u: float
    residual_v: float
    mode: str
    history: list[float]


def solve_system(spec: SystemSpec, opts: SolveOptions | None = None, ops=None):
    """Solve ``L1 u = f1(v) + g1``, ``L2 v = f2(u) + g2`` with zero exterior data.

    ``jacobi`` (default) updates both blocks from the previous iterate, so
    swapping the two components swaps the iterates exactly; ``gauss_seidel``
    uses the fresh ``u`` for the ``v`` block; ``newton`` solves the coupled
    linearization with GMRES.
    """
    opts = opts or SolveOptions()
    mask = spec.mask
    grid = mask.grid
    if spec.require_monotone:
        for name, fn in (("f1", spec.f1), ("f2", spec.f2)):
            if not fn.monotone or not fn.check_monotone(10.0):
                raise HypothesisViolation(f"{name} must be non-decreasing (monotone flag unset or failed)")
    if ops is None:
        ops = (
            assemble(grid, mask, RieszKernel(spec.alpha1, grid.dim)),
            assemble(grid, mask, RieszKernel(spec.alpha2, grid.dim)),
        )
    l1, l2 = _LinearSolver(ops[0], opts), _LinearSolver(ops[1], opts)
    ins = mask.inside
    g1 = spec.g1.values_on(grid)[ins]
    g2 = spec.g2.values_on(grid)[ins]
    u = np.zeros(l1.n)
    v = np.zeros(l2.n)

    def residuals(u, v):
        ru = l1.matvec(u) - _eval_f(spec.f1, v) - g1
        rv = l2.matvec(v) - _eval_f(spec.f2, u) - g2
        return ru, rv

    history = []
    ru, rv = residuals(u, v)
    res = max(np.max(np.abs(ru)), np.max(np.abs(rv)))
    history.append(float(res))
    it = 0
    while res > opts.tol and it < opts.max_iter:
        it += 1
        if opts.system_mode == "newton":
            du, dv = _block_newton_step(l1, l2, spec, u, v, ru, rv, opts)
            u, v = u + opts.damping * du, v + opts.damping * dv
        else:
            # each block is linear in its own unknown: solve it exactly
            tu = l1.solve(_eval_f(spec.f1, v) + g1, x0=u, atol=0.05 * opts.tol, rtol=0.0)
            src = tu if opts.system_mode == "gauss_seidel" else u
            tv = l2.solve(_eval_f(spec.f2, src) + g2, x0=v, atol=0.05 * opts.tol, rtol=0.0)
            u = (1 - opts.damping) * u + opts.damping * tu
            v = (1 - opts.damping) * v + opts.damping * tv
        ru, rv = residuals(u, v)
        res = max(np.max(np.abs(ru)), np.max(np.abs(rv)))
        history.append(float(res))
    U = GridFunction(grid, ops[0].embed(u))
    V = GridFunction(grid, ops[1].embed(v))
    Lu = apply(ops[0], U).values[ins]
    Lv = apply(ops[1], V).values[ins]
    report = SystemReport(
        converged=False, iterations=it,
        residual_u=float(np.max(np.abs(Lu - _eval_f(spec.f1, v) - g1))),
        residual_v=float(np.max(np.abs(Lv - _eval_f(spec.f2, u) - g2))),
        mode=opts.system_mode, history=history,
    )
    report.converged = max(report.residual_u, report.residual_v) <= opts.tol
    if not report.converged:
        raise NonConvergence(
            f"system residual {max(report.residual_u, report.residual_v):.3e} after {it} iterations",
            report, (U, V),
        )
    return U, V, report


def _block_newton_step(l1, l2, spec, u, v, ru, rv, opts):
    n = l1.n
    s1 = spec.f1.slope(v, opts.positivity_floor)
    s2 = spec.f2.slope(u, opts.positivity_floor)

    def mv(z):
        a, b = z[:n], z[n:]
        return np.concatenate([l1.matvec(a) - s1 * b, l2.matvec(b) - s2 * a])

    A = LinearOperator((2 * n, 2 * n), matvec=mv, dtype=float)
    d = np.concatenate([l1.diag, l2.diag])
    M = LinearOperator((2 * n, 2 * n), matvec=lambda z: z / d, dtype=float)
    z, info = gmres(A, -np.concatenate([ru, rv]), rtol=opts.linear_rtol, atol=0.05 * opts.tol,
                    restart=200, maxiter=opts.linear_maxiter, M=M)
    if info != 0:
        raise NonConvergence(f"block Newton linear solve failed (info={info})")
    return z[:n], z[n:]


# ---------------------------------------------------------------------------
# whole-space surrogate
# ---------------------------------------------------------------------------


@dataclass
class WholeSpaceLevel:
    radius: float
    grid: UniformGrid
    solution: GridFunction | None
    report: SolveReport | None
    max_value: float
    status: str


@dataclass
class WholeSpaceReport:
    levels: list[WholeSpaceLevel]
    core_radius: float
    core_differences: list[float]
    accepted: bool
    agreement_tol: float
    decay: object = None
    notes: list[str] = field(default_factory=list)


def bump_seed(grid: UniformGrid, amplitude: float = 1.0, width: float = 1.0) -> np.ndarray:
    r = grid.radius()
    return amplitude * np.clip(1 - (r / width) ** 2, 0.0, None) ** 2


def solve_whole_space(kernel: KernelBase, f: Nonlinearity, h: float, R_list: Sequence[float],
                      opts: SolveOptions | None = None, seed: np.ndarray | Callable | None = None,
                      agreement_tol: float = 1e-2, continuation_steps: int = 10,
                      collapse_tol: float = 1e-6, decay_window=(0.5, 0.85)) -> WholeSpaceReport:
    """Nested-ball surrogate for ``L u = f(u)`` on all of space with ``u -> 0``.

    Each ball ``B_R`` is solved with zero exterior data.  For ``u^p - u^q``
    the pure power problem is solved first and the ``-u^q`` term is then
    switched on in ``continuation_steps`` homotopy steps.  The report carries
    the sup-norm differences of successive solutions on the common core.
    Raises :class:`NoPositiveBranch` (with the report attached) if a
    continuation run collapses to zero.
    """
    from .diagnostics import decay_fit, radial_profile

    opts = opts or SolveOptions()
    R_list = sorted(float(r) for r in R_list)
    if not R_list:
        raise ValueError("R_list is empty")
    levels: list[WholeSpaceLevel] = []
    report = WholeSpaceReport(levels, 0.5 * R_list[0], [], False, agreement_tol)
    prev = None
    for R in R_list:
        grid = UniformGrid.covering(kernel.dim, h, R)
        mask = ball_mask(grid, R)
        op = assemble(grid, mask, kernel)
        if prev is not None:
            x0 = prev.grid.embed(prev.values, grid) if prev.grid.half_extent <= grid.half_extent else None
        elif callable(seed):
            x0 = seed(grid)
        elif seed is not None:
            x0 = np.asarray(seed, float)
        else:
            x0 = bump_seed(grid)
        try:
            u, rep = _continuation_solve(op, mask, kernel, f, opts, x0, continuation_steps, collapse_tol)
        except NonConvergence as exc:
            levels.append(WholeSpaceLevel(R, grid, None, exc.report, float("nan"), "nonconvergence"))
            report.notes.append(f"R={R}: {exc}")
            exc.report = report
            raise
        umax = float(np.max(np.abs(u.values)))
        status = "ok"
        if f.kind in ("power", "powerdiff") and umax < collapse_tol:
            status = "collapsed"
        levels.append(WholeSpaceLevel(R, grid, u, rep, umax, status))
        if status == "collapsed":
            report.notes.append(f"R={R}: continuation collapsed to zero (max {umax:.2e})")
            raise NoPositiveBranch(f"no positive branch found at R={R}", report)
        prev = u
    # core agreement
    core = report.core_radius
    for a, b in zip(levels[:-1], levels[1:]):
        big = b.grid
        ua = a.grid.embed(a.solution.values, big)
        sel = big.radius() < core
        report.core_differences.append(float(np.max(np.abs(ua[sel] - b.solution.values[sel]))))
    report.accepted = bool(report.core_differences) and all(
        d <= agreement_tol * max(lv.max_value, 1e-300) for d, lv in zip(report.core_differences, levels[1:])
    )
    last = levels[-1]
    if last.max_value > 0:
        r, prof = radial_profile(last.solution, ball_mask(last.grid, last.radius))
        try:
            q = f.q if f.kind == "powerdiff" else None
            report.decay = decay_fit((r, prof), (decay_window[0] * last.radius, decay_window[1] * last.radius),
                                     alpha=kernel.inner_alpha, dim=kernel.dim, q=q)
        except ValueError as exc:
            report.notes.append(f"decay fit unavailable: {exc}")
    return report


def _continuation_solve(op, mask, kernel, f: Nonlinearity, opts, x0, steps, collapse_tol):
    spec = ProblemSpec(mask, kernel, f, SourceTerm.zero())
    if f.kind != "powerdiff":
        o = replace(opts, initial=np.asarray(x0))
        return solve_scalar(spec, o, op)
    u, rep = solve_scalar(ProblemSpec(mask, kernel, Nonlinearity.power(f.p), SourceTerm.zero()),
                          replace(opts, initial=np.asarray(x0)), op)
    if float(np.max(np.abs(u.values))) < collapse_tol:
        return u, rep
    for k in range(1, steps + 1):
        fk = replace(f, c=f.c * k / steps)
        u, rep = solve_scalar(ProblemSpec(mask, kernel, fk, SourceTerm.zero()),
                              replace(opts, initial=u), op)
    return u, rep

