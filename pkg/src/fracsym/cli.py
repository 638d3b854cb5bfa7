"""Command-line entry point: scenario file in, CSV tables and a summary out.

Exit codes: 0 when every requested check passes, 2 on a failed check, 3 when
the solver does not converge, 4 on configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load
from .diagnostics import (
    AbpRejected, check_axial_symmetry_monotonicity, check_radial_monotonicity, check_radial_symmetry,
    eps_h, moving_plane_scan, radial_profile, random_bump, small_domain_probe, torsion_pair, abp_check,
    verify_claim_sign,
)
from .geometry import Ball, DomainError, DomainMask, GridAlignmentError, UniformGrid, ball_mask, box_mask, stadium_mask
from .io import grid_rows, write_csv, write_summary
from .kernels import GeneralDecreasingKernel, RieszKernel, ThetaTable, eval_kernel, kernel_from_params, validate_condition_C
from .operator import assemble, convergence_probe, dump_operator, gaussian_profile, write_binary
from .solver import (
    HypothesisViolation, NoPositiveBranch, NonConvergence, NonlinearityDomain, Nonlinearity, ProblemSpec,
    SolveOptions, SourceTerm, SystemSpec, bump_seed, solve_scalar, solve_system, solve_whole_space,
)

log = logging.getLogger("fracsym")

EXIT_OK, EXIT_CHECK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3, 4

# checks a subcommand accepts in ``[diagnostics] checks``
ALLOWED_CHECKS = {
    "solve": {"symmetry", "monotonicity", "scan"},
    "system": {"symmetry", "monotonicity", "swap"},
    "wholespace": {"positive", "agreement"},
    "scan": set(),
    "abp": {"ratio_spread", "slope"},
    "probe-smalldomain": {"finite"},
    "kernel-table": {"condition_c"},
    "converge": set(),
}


@dataclass
class Run:
    """Collects check outcomes and free-form report lines for one invocation."""

    command: str
    cfg: ScenarioConfig
    out: Path
    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    info: list[str] = field(default_factory=list)

    @property
    def preamble(self) -> list[str]:
        return [f"fracsym {__version__} {self.command}"] + self.cfg.echo()

    def check(self, name: str, ok: bool, detail: str) -> None:
        self.checks.append((name, bool(ok), detail))

    def csv(self, name: str, columns, rows) -> Path:
        return write_csv(self.out / name, columns, rows, self.preamble)

    def summary(self, status: str = "") -> None:
        info = ([status] if status else []) + self.info
        write_summary(self.out / "summary.txt", f"fracsym {self.command}", self.checks, info, self.cfg.echo())

    @property
    def exit_code(self) -> int:
        return EXIT_OK if all(ok for _, ok, _ in self.checks) else EXIT_CHECK


# ---------------------------------------------------------------------------
# building objects from the scenario
# ---------------------------------------------------------------------------


def _wrap(section: str, key: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _vector(cfg: ScenarioConfig, section: str, key: str, dim: int, default: float = 0.0) -> tuple[float, ...]:
    v = cfg.get(section, key)
    if not v:
        return (default,) * dim
    if len(v) != dim:
        raise ConfigError(f"[{section}] {key}: expected {dim} components, got {len(v)}")
    return tuple(v)


def requested_checks(cfg: ScenarioConfig, command: str) -> list[str]:
    checks = list(cfg.get("diagnostics", "checks"))
    for c in checks:
        if c not in ALLOWED_CHECKS[command]:
            allowed = ", ".join(sorted(ALLOWED_CHECKS[command])) or "none"
            raise ConfigError(f"[diagnostics] checks: {c!r} is not available for {command} (allowed: {allowed})")
    return checks


def build_kernel(cfg: ScenarioConfig, dim: int | None = None):
    dim = dim if dim is not None else cfg.get("grid", "dim")
    kind = cfg.get("kernel", "type")
    params = {k: cfg.get("kernel", k) for k in ("alpha", "mu", "alpha1", "alpha2", "r")}
    if kind in ("general", "general_decreasing"):
        path = cfg.get("kernel", "theta")
        if not path:
            raise ConfigError("[kernel] theta: a two-column table file is required for the general kernel")
        params["theta"] = _wrap("kernel", "theta", ThetaTable.load, path)
    return _wrap("kernel", kind, kernel_from_params, kind, dim, **params)


def domain_reach(cfg: ScenarioConfig, dim: int) -> float:
    shape = cfg.get("domain", "shape")
    if shape == "ball":
        c = _vector(cfg, "domain", "center", dim)
        return max(abs(x) for x in c) + cfg.get("domain", "radius")
    if shape == "box":
        lo = _vector(cfg, "domain", "lo", dim, -1.0)
        hi = _vector(cfg, "domain", "hi", dim, 1.0)
        return max(max(abs(x) for x in lo), max(abs(x) for x in hi))
    if shape == "stadium":
        return cfg.get("domain", "half_length") + cfg.get("domain", "radius")
    raise ConfigError(f"[domain] shape: unknown shape {shape!r} (ball, box or stadium)")


def build_grid(cfg: ScenarioConfig, reach: float | None = None) -> UniformGrid:
    dim = cfg.get("grid", "dim")
    if dim not in (1, 2, 3):
        raise ConfigError(f"[grid] dim: must be 1, 2 or 3, got {dim}")
    h = cfg.get("grid", "h")
    if not h > 0:
        raise ConfigError(f"[grid] h: must be positive, got {h}")
    pad = cfg.get("grid", "pad")
    if pad < 0:
        raise ConfigError(f"[grid] pad: must be non-negative, got {pad}")
    return UniformGrid.covering(dim, h, domain_reach(cfg, dim) if reach is None else reach, pad)


def build_mask(cfg: ScenarioConfig, grid: UniformGrid) -> DomainMask:
    shape = cfg.get("domain", "shape")
    dim = grid.dim
    radius = cfg.get("domain", "radius")
    if shape in ("ball", "stadium") and not radius > 0:
        raise ConfigError(f"[domain] radius: must be positive, got {radius}")
    if shape == "ball":
        mask = _wrap("domain", "center", ball_mask, grid, radius, _vector(cfg, "domain", "center", dim))
    elif shape == "box":
        mask = _wrap("domain", "lo", box_mask, grid, _vector(cfg, "domain", "lo", dim, -1.0),
                     _vector(cfg, "domain", "hi", dim, 1.0))
    elif shape == "stadium":
        if dim != 2:
            raise ConfigError("[domain] shape: stadium needs dim = 2")
        mask = _wrap("domain", "half_length", stadium_mask, grid, cfg.get("domain", "half_length"), radius)
    else:
        raise ConfigError(f"[domain] shape: unknown shape {shape!r} (ball, box or stadium)")
    if mask.count == 0:
        raise ConfigError("[domain] the mask contains no grid nodes")
    return mask


def build_nonlinearity(cfg: ScenarioConfig, section: str, prefix: str) -> Nonlinearity:
    kind = cfg.get(section, prefix)

    def get(k):
        return cfg.get(section, f"{prefix}_{k}")

    if kind == "zero":
        return Nonlinearity.zero()
    if kind == "linear":
        return _wrap(section, prefix, Nonlinearity.linear, get("a"), get("b"))
    if kind == "power":
        return _wrap(section, f"{prefix}_p", Nonlinearity.power, get("p"), get("coef"))
    if kind == "powerdiff":
        return _wrap(section, f"{prefix}_p", Nonlinearity.power_diff, get("p"), get("q"), c=get("coef"))
    raise ConfigError(f"[{section}] {prefix}: unknown nonlinearity {kind!r} (zero, linear, power, powerdiff)")


def build_source(cfg: ScenarioConfig, section: str, prefix: str, dim: int) -> SourceTerm:
    kind = cfg.get(section, prefix)

    def get(k):
        return cfg.get(section, f"{prefix}_{k}")

    if kind == "zero":
        return SourceTerm.zero()
    if kind == "constant":
        return SourceTerm.constant(get("value"))
    if kind in ("radial", "axial"):
        radii, values = get("radii"), get("values")
        if not radii or len(radii) != len(values):
            raise ConfigError(f"[{section}] {prefix}_radii: needs a non-empty list matching {prefix}_values")
        if kind == "axial":
            axis = get("axis")
            if not 0 <= axis < dim:
                raise ConfigError(f"[{section}] {prefix}_axis: must be in [0, {dim})")
            return _wrap(section, f"{prefix}_values", SourceTerm.axial, axis, radii, values)
        center = _vector(cfg, section, f"{prefix}_center", dim) if get("center") else None
        return _wrap(section, f"{prefix}_values", SourceTerm.radial, radii, values, center)
    raise ConfigError(f"[{section}] {prefix}: unknown source {kind!r} (zero, constant, radial, axial)")


def build_options(cfg: ScenarioConfig) -> SolveOptions:
    s = {k: cfg.get("solver", k) for k in ("tol", "max_iter", "damping", "fallback", "initial", "positivity_floor")}
    if not s["tol"] > 0:
        raise ConfigError("[solver] tol: must be positive")
    if s["max_iter"] < 1:
        raise ConfigError("[solver] max_iter: must be at least 1")
    if not 0 < s["damping"] <= 1:
        raise ConfigError("[solver] damping: must lie in (0, 1]")
    if s["fallback"] not in ("picard", "none"):
        raise ConfigError("[solver] fallback: must be picard or none")
    if s["initial"] not in ("zero", "torsion"):
        raise ConfigError("[solver] initial: must be zero or torsion")
    mode = cfg.get("system", "mode")
    if mode not in ("jacobi", "gauss_seidel", "newton"):
        raise ConfigError("[system] mode: must be jacobi, gauss_seidel or newton")
    return SolveOptions(system_mode=mode, **s)


def _lambdas(cfg: ScenarioConfig) -> tuple[float, ...]:
    lams = cfg.get("diagnostics", "lambdas")
    if not lams:
        raise ConfigError("[diagnostics] lambdas: at least one plane position is required")
    return lams


def _axis(cfg: ScenarioConfig, dim: int) -> int:
    axis = cfg.get("diagnostics", "axis")
    if not 0 <= axis < dim:
        raise ConfigError(f"[diagnostics] axis: must be in [0, {dim})")
    return axis


# ---------------------------------------------------------------------------
# shared diagnostic steps
# ---------------------------------------------------------------------------


def _shape_checks(run: Run, name: str, u, mask: DomainMask, alpha: float, wanted: list[str]) -> None:
    cfg = run.cfg
    c_tol = cfg.get("diagnostics", "c_tol")
    eps = eps_h(mask.grid.h, alpha, float(np.max(np.abs(u.values))), c_tol)
    tol = cfg.get("diagnostics", "symmetry_tol")
    if isinstance(mask.kind, Ball):
        if "symmetry" in wanted:
            s = check_radial_symmetry(u, mask, tol)
            run.check(f"{name} radial symmetry", s.passed, f"asymmetry {s.max_asymmetry:.3e} (tol {tol:.1e})")
        if "monotonicity" in wanted:
            m = check_radial_monotonicity(u, mask, eps, alpha)
            run.check(f"{name} radial monotonicity", m.passed,
                      f"worst outward increase {m.worst_violation:.3e} (eps {eps:.3e}), witness {m.witness}")
    elif "symmetry" in wanted or "monotonicity" in wanted:
        axis = _axis(cfg, mask.grid.dim)
        s, m = check_axial_symmetry_monotonicity(u, mask, axis, tol, eps, alpha)
        if "symmetry" in wanted:
            run.check(f"{name} symmetry in axis {axis}", s.passed, f"asymmetry {s.max_asymmetry:.3e} (tol {tol:.1e})")
        if "monotonicity" in wanted:
            run.check(f"{name} monotonicity along axis {axis}", m.passed,
                      f"worst increase {m.worst_violation:.3e} (eps {eps:.3e}), witness {m.witness}")


def _scan(run: Run, u, mask: DomainMask, kernel) -> None:
    cfg = run.cfg
    lams = _lambdas(cfg)
    axis = _axis(cfg, mask.grid.dim)
    eps = eps_h(mask.grid.h, kernel.inner_alpha, float(np.max(np.abs(u.values))), cfg.get("diagnostics", "c_tol"))
    res = _wrap("diagnostics", "lambdas", moving_plane_scan, u, mask, kernel, lams, axis, eps)
    run.csv("scan.csv", ["lambda", "sigma_minus_measure", "min_w", "claim_residual"],
            [(r.lam, r.sigma_minus_measure, r.min_w, r.claim_residual) for r in res.reports])
    bad = [r.lam for r in res.reports if r.sigma_minus_count > 0 or r.min_w < -eps]
    run.check("moving-plane scan", not bad,
              f"{len(res.reports)} planes, negative set nonempty at {bad or 'none'} (eps {eps:.3e})")
    run.info.append(f"lambda0_hat = {res.lambda0_hat}")
    if res.reports and res.reports[0].far_field_limited:
        run.info.append("kernel has no far field: witnesses limited to 1/2 of the positivity set")


def _dump_solution(run: Run, op, fields: dict) -> None:
    if not run.cfg.get("output", "binary"):
        return
    dump_operator(op, run.out / "operator.bin")
    header = {"dims": list(op.grid.shape), "h": op.grid.h, "fields": list(fields)}
    write_binary(run.out / "solution.bin", header, [f.values for f in fields.values()])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _scalar_problem(cfg: ScenarioConfig):
    grid = build_grid(cfg)
    mask = build_mask(cfg, grid)
    kernel = build_kernel(cfg, grid.dim)
    spec = ProblemSpec(mask, kernel, build_nonlinearity(cfg, "problem", "f"),
                       build_source(cfg, "problem", "g", grid.dim))
    return spec, build_options(cfg)


def _solve(run: Run, spec: ProblemSpec, opts: SolveOptions):
    op = assemble(spec.mask.grid, spec.mask, spec.kernel)
    u, rep = solve_scalar(spec, opts, op)
    run.info.append(f"converged in {rep.iterations} iterations ({rep.method}), residual {rep.residual:.3e}, "
                    f"sign {rep.sign}")
    run.info += rep.notes
    return u, op


def cmd_solve(run: Run) -> None:
    wanted = requested_checks(run.cfg, "solve")
    spec, opts = _scalar_problem(run.cfg)
    u, op = _solve(run, spec, opts)
    mask = spec.mask
    pts = mask.grid.points()[mask.inside]
    run.csv("solution.csv", [f"x{i + 1}" for i in range(mask.grid.dim)] + ["u"],
            grid_rows(pts, u.values[mask.inside]))
    if isinstance(mask.kind, Ball):
        r, prof = radial_profile(u, mask)
        run.csv("profile.csv", ["r", "u"], zip(r, prof))
    _shape_checks(run, "u", u, mask, spec.kernel.inner_alpha, wanted)
    if "scan" in wanted:
        _scan(run, u, mask, spec.kernel)
    _dump_solution(run, op, {"u": u})


def cmd_system(run: Run) -> None:
    cfg = run.cfg
    wanted = requested_checks(cfg, "system")
    grid = build_grid(cfg)
    mask = build_mask(cfg, grid)
    a1, a2 = cfg.get("system", "alpha1"), cfg.get("system", "alpha2")
    for key, a in (("alpha1", a1), ("alpha2", a2)):
        if not 0 < a < 1:
            raise ConfigError(f"[system] {key}: must satisfy α∈(0,1), got {a}")
    f1, f2 = build_nonlinearity(cfg, "system", "f1"), build_nonlinearity(cfg, "system", "f2")
    g1, g2 = build_source(cfg, "system", "g1", grid.dim), build_source(cfg, "system", "g2", grid.dim)
    opts = build_options(cfg)
    spec = SystemSpec(mask, a1, a2, f1, f2, g1, g2)
    u, v, rep = solve_system(spec, opts)
    run.info.append(f"converged in {rep.iterations} {rep.mode} iterations, residuals {rep.residual_u:.3e}, "
                    f"{rep.residual_v:.3e}")
    pts = grid.points()[mask.inside]
    run.csv("solution.csv", [f"x{i + 1}" for i in range(grid.dim)] + ["u", "v"],
            grid_rows(pts, u.values[mask.inside], v.values[mask.inside]))
    _shape_checks(run, "u", u, mask, a1, wanted)
    _shape_checks(run, "v", v, mask, a2, wanted)
    if "swap" in wanted:
        v2, u2, _ = solve_system(SystemSpec(mask, a2, a1, f2, f1, g2, g1), opts)
        same = np.array_equal(u.values, u2.values) and np.array_equal(v.values, v2.values)
        run.check("relabeling swaps (u, v) bitwise", same,
                  "identical" if same else f"max difference {max(np.abs(u.values - u2.values).max(), np.abs(v.values - v2.values).max()):.3e}")
    if cfg.get("output", "binary"):
        header = {"dims": list(grid.shape), "h": grid.h, "fields": ["u", "v"]}
        write_binary(run.out / "solution.bin", header, [u.values, v.values])


def cmd_wholespace(run: Run) -> None:
    cfg = run.cfg
    wanted = requested_checks(cfg, "wholespace")
    dim, h = cfg.get("grid", "dim"), cfg.get("grid", "h")
    kernel = build_kernel(cfg, dim)
    f = build_nonlinearity(cfg, "wholespace", "f")
    radii = cfg.get("wholespace", "radii")
    if not radii or min(radii) <= 0:
        raise ConfigError("[wholespace] radii: needs positive radii")
    window = cfg.get("wholespace", "window")
    if len(window) != 2 or not 0 < window[0] < window[1] <= 1:
        raise ConfigError("[wholespace] window: two fractions 0 < a < b <= 1 of the largest radius")
    amp, width = cfg.get("wholespace", "seed_amplitude"), cfg.get("wholespace", "seed_width")
    report = None
    branch = True
    try:
        report = solve_whole_space(
            kernel, f, h, radii, build_options(cfg), seed=lambda g: bump_seed(g, amp, width),
            agreement_tol=cfg.get("wholespace", "agreement_tol"),
            continuation_steps=cfg.get("wholespace", "continuation_steps"), decay_window=tuple(window),
        )
    except NoPositiveBranch as exc:
        branch = False
        report = exc.report
        run.info.append(f"no positive branch: {exc}")
    except NonConvergence as exc:
        if hasattr(exc.report, "levels"):
            run.csv("levels.csv", ["radius", "max_u", "status"],
                    [(lv.radius, lv.max_value, lv.status) for lv in exc.report.levels])
        raise
    run.csv("levels.csv", ["radius", "max_u", "status"],
            [(lv.radius, lv.max_value, lv.status) for lv in report.levels])
    run.csv("core.csv", ["radius_small", "radius_large", "core_difference"],
            [(a.radius, b.radius, d) for a, b, d in zip(report.levels[:-1], report.levels[1:], report.core_differences)])
    last = report.levels[-1] if report.levels else None
    if branch and last is not None and last.solution is not None:
        r, prof = radial_profile(last.solution, ball_mask(last.grid, last.radius))
        run.csv("profile.csv", ["r", "u"], zip(r, prof))
    run.info += report.notes
    if report.decay is not None:
        d = report.decay
        run.info.append(f"fitted decay exponent {d.m_hat:.4f} over r in [{d.window[0]:.3g}, {d.window[1]:.3g}] "
                        f"(informative only), power law {'plausible' if d.power_law else 'doubtful'}, "
                        f"target {d.target}")
    if "positive" in wanted:
        run.check("positive branch found", branch, "yes" if branch else "continuation collapsed to zero")
    if "agreement" in wanted:
        run.check("nested balls agree on the core", branch and report.accepted,
                  f"core differences {report.core_differences}")


def cmd_scan(run: Run) -> None:
    cfg = run.cfg
    requested_checks(cfg, "scan")
    target = cfg.get("diagnostics", "scan_target")
    if target == "solution":
        spec, opts = _scalar_problem(cfg)
        u, _ = _solve(run, spec, opts)
        _scan(run, u, spec.mask, spec.kernel)
        return
    if target != "bumps":
        raise ConfigError(f"[diagnostics] scan_target: must be solution or bumps, got {target!r}")
    grid = build_grid(cfg)
    mask = build_mask(cfg, grid)
    kernel = build_kernel(cfg, grid.dim)
    lams = _lambdas(cfg)
    axis = _axis(cfg, grid.dim)
    rng = np.random.default_rng(cfg.get("diagnostics", "seed"))
    c_tol = cfg.get("diagnostics", "c_tol")
    rows, failed = [], 0
    for b in range(cfg.get("diagnostics", "bumps")):
        u = random_bump(mask, rng)
        eps = eps_h(grid.h, kernel.inner_alpha, float(np.max(u.values)), c_tol)
        for lam in lams:
            c = _wrap("diagnostics", "lambdas", verify_claim_sign, u, mask, kernel, lam, axis, eps)
            p1, p2, p3 = c.min_pieces
            rows.append((b, lam, len(c.nodes), c.residual, p1, p2, p3, c.decomposition_gap, c.passed))
            failed += not c.passed
    run.csv("claims.csv", ["bump", "lambda", "nodes", "residual", "min_I1", "min_I2", "min_I3", "gap", "passed"], rows)
    run.check("sign claim on random bumps", failed == 0, f"{len(rows)} cases, {failed} failed")


def cmd_abp(run: Run) -> None:
    cfg = run.cfg
    wanted = requested_checks(cfg, "abp")
    dim = cfg.get("grid", "dim")
    kernel = build_kernel(cfg, dim)
    opts = build_options(cfg)
    radii = cfg.get("diagnostics", "abp_radii")
    if not radii or min(radii) <= 0:
        raise ConfigError("[diagnostics] abp_radii: needs positive radii")
    reports = []
    for rho in radii:
        grid = build_grid(cfg, rho)
        mask = ball_mask(grid, rho)
        w, hv, op = torsion_pair(mask, kernel, opts)
        reports.append(abp_check(w, hv, mask, kernel, op=op, domain_id=f"ball_{rho:g}"))
    run.csv("abp.csv", ["domain_id", "inf_w", "d", "hinf", "hLN", "ratio1", "ratio2"],
            [(r.domain_id, r.inf_w, r.d, r.hinf, r.hLN, r.ratio1, r.ratio2) for r in reports])
    r2 = np.array([r.ratio2 for r in reports])
    spread = float(r2.max() / r2.min()) if np.all(r2 > 0) else np.inf
    run.info.append(f"ratio2 spread (max/min) {spread:.4f}")
    slope = np.nan
    if len(reports) >= 2:
        meas = np.array([r.measure for r in reports])
        neg = np.array([r.neg_inf_w for r in reports])
        slope = float(np.polyfit(np.log(meas), np.log(neg), 1)[0])
        run.info.append(f"slope of log(-inf w) against log|domain| {slope:.4f}")
    target = kernel.inner_alpha / dim
    if "ratio_spread" in wanted:
        lim = cfg.get("diagnostics", "ratio_spread")
        run.check("ratio2 within a common factor", spread <= lim, f"spread {spread:.4f} (limit {lim:g})")
    if "slope" in wanted:
        tol = cfg.get("diagnostics", "slope_tol")
        ok = np.isfinite(slope) and abs(slope - target) <= tol * target
        run.check("measure exponent", ok, f"slope {slope:.4f}, target {target:.4f} within {tol:.0%}")


def cmd_probe(run: Run) -> None:
    cfg = run.cfg
    wanted = requested_checks(cfg, "probe-smalldomain")
    dim = cfg.get("grid", "dim")
    kernel = build_kernel(cfg, dim)
    radii = cfg.get("diagnostics", "probe_radii")
    if not radii or min(radii) <= 0:
        raise ConfigError("[diagnostics] probe_radii: needs positive radii")
    masks = [ball_mask(build_grid(cfg, rho), rho) for rho in radii]
    rep = small_domain_probe(masks, cfg.get("diagnostics", "phi_bound"), kernel, build_options(cfg))
    run.csv("smalldomain.csv", ["domain_id", "measure", "d", "neg_inf_w", "ratio2", "kappa"],
            [(a.domain_id, m, a.d, a.neg_inf_w, a.ratio2, k) for a, m, k in zip(rep.abp, rep.measures, rep.kappas)])
    run.info += [f"C_emp = {rep.c_emp:.6g}", f"d0 = {rep.d0:.6g}", f"delta_hat = {rep.delta_hat:.6g}",
                 f"largest admissible measure in family: {rep.largest_admissible}"]
    if "finite" in wanted:
        ok = bool(np.isfinite(rep.delta_hat) and rep.delta_hat > 0)
        run.check("delta_hat finite and positive", ok, f"{rep.delta_hat:.6g}")


def cmd_kernel_table(run: Run) -> None:
    cfg = run.cfg
    wanted = requested_checks(cfg, "kernel-table")
    kernel = build_kernel(cfg)
    r0, r1, n = cfg.get("diagnostics", "r_min"), cfg.get("diagnostics", "r_max"), cfg.get("diagnostics", "samples")
    if not 0 < r0 < r1 or n < 2:
        raise ConfigError("[diagnostics] r_min: need 0 < r_min < r_max and samples >= 2")
    r = np.geomspace(r0, r1, n)
    z = np.zeros((n, kernel.dim))
    z[:, 0] = r
    run.csv("kernel.csv", ["r", "K", "tail"], zip(r, eval_kernel(kernel, z), kernel.radial_tail(r)))
    run.info.append(kernel.descriptor())
    if "condition_c" in wanted:
        if not isinstance(kernel, GeneralDecreasingKernel):
            raise ConfigError("[diagnostics] checks: condition_c applies to the general kernel only")
        c = validate_condition_C(kernel)
        run.check("slow-decay condition", c.passed, c.reason or f"tail {c.tail:.6g}")


def cmd_converge(run: Run) -> None:
    cfg = run.cfg
    requested_checks(cfg, "converge")
    kernel = build_kernel(cfg)
    if not isinstance(kernel, RieszKernel):
        raise ConfigError("[kernel] type: the convergence probe has a closed-form reference only for riesz")
    h_list = cfg.get("diagnostics", "h_list")
    if len(h_list) < 3:
        raise ConfigError("[diagnostics] h_list: at least three grid levels are required")
    prof = gaussian_profile(kernel.dim, kernel.alpha, cfg.get("diagnostics", "support_radius"),
                            cfg.get("diagnostics", "eval_radius"))
    rep = _wrap("diagnostics", "h_list", convergence_probe, kernel, prof, h_list)
    orders = [np.nan] + list(rep.pairwise)
    run.csv("converge.csv", ["h", "error", "order_estimate"], zip(rep.h, rep.errors, orders))
    lim = cfg.get("diagnostics", "min_order")
    run.check("convergence order", rep.order >= lim, f"measured {rep.order:.4f} (minimum {lim:g})")


COMMANDS = {
    "solve": cmd_solve,
    "system": cmd_system,
    "wholespace": cmd_wholespace,
    "scan": cmd_scan,
    "abp": cmd_abp,
    "probe-smalldomain": cmd_probe,
    "kernel-table": cmd_kernel_table,
    "converge": cmd_converge,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracsym", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fracsym {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="scenario file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one scenario key (repeatable)")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides [diagnostics] seed)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(command: str, config: Path | None = None, overrides=(), out: Path | None = None,
        seed: int | None = None) -> int:
    """Execute one subcommand and return its exit code."""
    overrides = list(overrides)
    if seed is not None:
        if not 0 <= seed < 2**64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        overrides.append(f"diagnostics.seed={seed}")
    if out is not None:
        overrides.append(f"output.dir={out}")
    try:
        cfg = load(config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(cfg.get("output", "dir"))
    r = Run(command, cfg, outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        COMMANDS[command](r)
    except (ConfigError, HypothesisViolation, DomainError, GridAlignmentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergence, NonlinearityDomain) as exc:
        r.summary(f"solver failure: {exc}")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AbpRejected as exc:
        r.check("supersolution pair admissible", False, str(exc))
    except OSError as exc:
        print(f"config error: cannot write to {outdir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    r.summary()
    for name, ok, detail in r.checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return r.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run(args.command, args.config, args.overrides, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
