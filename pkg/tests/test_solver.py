import numpy as np
import pytest

from fracsym.geometry import GridFunction, UniformGrid, ball_mask
from fracsym.kernels import RieszKernel, torsion_constant
from fracsym.operator import apply, assemble
from fracsym.solver import (
    HypothesisViolation, NoPositiveBranch, NonConvergence, Nonlinearity, NonlinearityDomain, ProblemSpec,
    SolveOptions, SourceTerm, SystemSpec, classify_sign, solve_scalar, solve_system, solve_whole_space,
)


@pytest.fixture(scope="module")
def disc():
    g = UniformGrid.covering(2, 1 / 32, 1.0)
    return ball_mask(g, 1.0), RieszKernel(0.5, 2)


def test_torsion_solve_matches_closed_form(disc):
    mask, k = disc
    u, rep = solve_scalar(ProblemSpec(mask, k, g=SourceTerm.constant(1.0)))
    exact = np.clip(1 - mask.grid.radius() ** 2, 0, None) ** 0.5 / torsion_constant(2, 0.5)
    assert rep.converged and rep.sign == "positive"
    assert np.max(np.abs(u.values - exact)) < 1e-9


def test_zero_data_gives_zero(disc):
    mask, k = disc
    u, rep = solve_scalar(ProblemSpec(mask, k))
    assert np.all(u.values == 0)
    assert rep.sign == "zero"


def test_linear_source_term_dominates_torsion(disc):
    mask, k = disc
    tau, _ = solve_scalar(ProblemSpec(mask, k, g=SourceTerm.constant(1.0)))
    u, rep = solve_scalar(ProblemSpec(mask, k, Nonlinearity.linear(0.5), SourceTerm.constant(1.0)))
    assert rep.converged
    ins = mask.inside
    assert np.all(u.values[ins] > tau.values[ins])


def test_solution_satisfies_equation_through_public_apply(disc):
    mask, k = disc
    f = Nonlinearity.power(2.0, coef=1 / 8)
    g = SourceTerm.radial((0.0, 1.0), (2.0, 1.0))
    u, rep = solve_scalar(ProblemSpec(mask, k, f, g))
    op = assemble(mask.grid, mask, k)
    res = apply(op, u).values - f(u.values) - g.values_on(mask.grid)
    assert np.max(np.abs(res[mask.inside])) <= rep.effective_tol


def test_initial_guess_variants_agree(disc):
    mask, k = disc
    spec = ProblemSpec(mask, k, Nonlinearity.power(2.0, coef=1 / 8), SourceTerm.constant(1.0))
    u0, _ = solve_scalar(spec, SolveOptions(initial="zero"))
    u1, _ = solve_scalar(spec, SolveOptions(initial="torsion"))
    assert np.max(np.abs(u0.values - u1.values)) < 1e-9


def test_solver_is_deterministic(disc):
    mask, k = disc
    spec = ProblemSpec(mask, k, Nonlinearity.power(2.0, coef=1 / 8), SourceTerm.constant(1.0))
    a, _ = solve_scalar(spec)
    b, _ = solve_scalar(spec)
    assert np.array_equal(a.values, b.values)


def test_iteration_budget_raises_nonconvergence(disc):
    mask, k = disc
    spec = ProblemSpec(mask, k, Nonlinearity.power(2.0, coef=1 / 8), SourceTerm.constant(1.0))
    with pytest.raises(NonConvergence) as info:
        solve_scalar(spec, SolveOptions(max_iter=1, fallback="none"))
    assert info.value.report.residual > 1e-10
    assert isinstance(info.value.best, GridFunction)


def test_nonlinearity_validation_and_domain():
    with pytest.raises(ValueError):
        Nonlinearity.power_diff(0.5, 3.0)
    with pytest.raises(ValueError):
        Nonlinearity.table((0.0, 1.0), (0.0, 5.0), lipschitz=1.0)
    f = Nonlinearity.power(0.5)
    with pytest.raises(NonlinearityDomain):
        f(np.array([-1.0]))
    t = Nonlinearity.table((0.0, 1.0, 2.0), (0.0, 1.0, 1.5), lipschitz=1.0)
    assert np.allclose(t(np.array([0.5, 1.5])), [0.5, 1.25])


def test_generalized_slope_is_floored():
    f = Nonlinearity.power_diff(3.0, 0.5)
    s = f.slope(np.array([0.0, 1e-12, 1.0]), floor=1e-8)
    assert np.all(np.isfinite(s))


def test_growth_and_monotone_checks():
    assert Nonlinearity.linear(0.5).check_monotone(10.0)
    assert not Nonlinearity.linear(-0.5).check_monotone(10.0)


def test_source_validation():
    with pytest.raises(ValueError):
        SourceTerm.radial((0.0, 1.0), (1.0, 2.0))
    g = UniformGrid.covering(1, 0.25, 1.0)
    s = SourceTerm.radial((0.0, 1.0), (2.0, 1.0))
    assert np.allclose(s.values_on(g)[g.half_extent[0]], 2.0)


def test_classify_sign():
    assert classify_sign(np.array([0.0, 1.0])) == "nonnegative"
    assert classify_sign(np.array([0.5, 1.0])) == "positive"
    assert classify_sign(np.array([-1.0, 1.0])) == "sign-changing"
    assert classify_sign(np.zeros(3)) == "zero"


def _small_system(a1, a2, f1, f2, g1, g2):
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    return SystemSpec(ball_mask(g, 1.0), a1, a2, f1, f2, g1, g2)


def test_decoupled_system_reduces_to_torsion():
    spec = _small_system(0.5, 0.5, Nonlinearity.zero(), Nonlinearity.zero(), SourceTerm.constant(1.0),
                         SourceTerm.constant(1.0))
    u, v, rep = solve_system(spec)
    tau, _ = solve_scalar(ProblemSpec(spec.mask, RieszKernel(0.5, 2), g=SourceTerm.constant(1.0)))
    assert np.max(np.abs(u.values - v.values)) <= 1e-10
    assert np.max(np.abs(u.values - tau.values)) <= 1e-9


def test_system_modes_agree_and_relabeling_swaps():
    f1, f2 = Nonlinearity.linear(0.5), Nonlinearity.linear(0.5)
    g1, g2 = SourceTerm.constant(1.0), SourceTerm.constant(2.0)
    spec = _small_system(0.3, 0.7, f1, f2, g1, g2)
    sols = {}
    for mode in ("jacobi", "gauss_seidel", "newton"):
        u, v, rep = solve_system(spec, SolveOptions(system_mode=mode))
        assert rep.converged
        sols[mode] = (u.values, v.values)
    for mode in ("gauss_seidel", "newton"):
        assert np.max(np.abs(sols[mode][0] - sols["jacobi"][0])) < 1e-8
        assert np.max(np.abs(sols[mode][1] - sols["jacobi"][1])) < 1e-8
    v2, u2, _ = solve_system(_small_system(0.7, 0.3, f2, f1, g2, g1))
    assert np.array_equal(u2.values, sols["jacobi"][0])
    assert np.array_equal(v2.values, sols["jacobi"][1])
    assert not np.allclose(sols["jacobi"][0], sols["jacobi"][1])


def test_system_requires_monotone_couplings():
    spec = _small_system(0.5, 0.5, Nonlinearity.linear(-0.5), Nonlinearity.zero(), SourceTerm.constant(1.0),
                         SourceTerm.constant(1.0))
    with pytest.raises(HypothesisViolation):
        solve_system(spec)


def test_whole_space_zero_nonlinearity_gives_zero():
    rep = solve_whole_space(RieszKernel(0.5, 2), Nonlinearity.zero(), 1 / 4, [2.0, 4.0])
    assert all(lv.max_value < 1e-12 for lv in rep.levels)
    assert rep.core_differences and max(rep.core_differences) < 1e-12


def test_whole_space_critical_power_difference_has_no_positive_branch():
    with pytest.raises(NoPositiveBranch) as info:
        solve_whole_space(RieszKernel(0.5, 2), Nonlinearity.power_diff(3.0, 0.5), 1 / 4, [4.0, 8.0])
    assert info.value.report.levels[0].status == "collapsed"
