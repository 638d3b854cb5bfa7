import numpy as np
import pytest

from fracsym.diagnostics import (
    AbpRejected, abp_check, check_axial_symmetry_monotonicity, check_radial_monotonicity, check_radial_symmetry,
    comparison_witness, contact_pair, decay_condition, decay_fit, decay_target, eps_h, moving_plane_scan,
    radial_profile, random_bump, small_domain_probe, torsion_pair, verify_claim_sign,
)
from fracsym.geometry import ConstantExterior, DomainError, GridFunction, UniformGrid, ball_mask, stadium_mask
from fracsym.kernels import PiecewiseMuKernel, RieszKernel
from fracsym.operator import stencil_weights
from fracsym.solver import ProblemSpec, SourceTerm, solve_scalar
import oracles


@pytest.fixture(scope="module")
def coarse():
    g = UniformGrid.covering(2, 1 / 8, 1.0)
    return ball_mask(g, 1.0), RieszKernel(0.5, 2)


@pytest.fixture(scope="module")
def torsion32():
    g = UniformGrid.covering(2, 1 / 32, 1.0)
    mask, k = ball_mask(g, 1.0), RieszKernel(0.5, 2)
    u, _ = solve_scalar(ProblemSpec(mask, k, g=SourceTerm.constant(1.0)))
    return u, mask, k


def test_eps_h_formula():
    assert eps_h(1 / 64, 0.3) == pytest.approx(0.1 / 64)
    assert eps_h(1 / 64, 0.75, scale=2.0) == pytest.approx(0.1 * 2.0 * (1 / 64) ** 0.5)


def _frame_arrays(u, mask, kernel, lam, axis):
    g = u.grid
    m = int(round(2 * lam / g.h))
    ext = list(g.half_extent)
    ext[axis] += abs(m)
    big = g.enlarged(ext)
    vals = g.embed(u.values, big)
    inside = g.embed(mask.inside.astype(float), big) > 0.5
    W = stencil_weights(big.shape, big.h, kernel)[0]
    return big, vals, inside, W


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("lam", [0.125, 0.25, 0.5])
def test_claim_matches_brute_force(coarse, seed, lam):
    mask, k = coarse
    u = random_bump(mask, np.random.default_rng(seed))
    rep = verify_claim_sign(u, mask, k, lam)
    big, vals, inside, W = _frame_arrays(u, mask, k, lam, 0)
    tol = 64 * np.finfo(float).eps * np.abs(vals).max()
    nodes, Lw, I1, I2, I3 = oracles.claim_pieces(vals, inside, W, big.h, lam, 0, tol)
    assert len(nodes) == len(rep.nodes)
    if not nodes:
        assert rep.vacuous
        return
    scale = np.abs(Lw).max() + 1e-300
    assert np.allclose(rep.I1, I1, atol=1e-12 * scale)
    assert np.allclose(rep.I2, I2, atol=1e-12 * scale)
    assert np.allclose(rep.I3, I3, atol=1e-12 * scale)
    assert rep.residual == pytest.approx(Lw.max(), abs=1e-12 * scale)
    assert rep.decomposition_gap <= 1e-12 * scale


def test_claim_holds_for_off_centre_bumps(coarse):
    mask, k = coarse
    rng = np.random.default_rng(11)
    nonvacuous = 0
    for _ in range(10):
        u = random_bump(mask, rng)
        for lam in (0.125, 0.25, 0.375, 0.5, 0.75):
            rep = verify_claim_sign(u, mask, k, lam)
            assert rep.passed
            assert rep.residual <= rep.eps
            nonvacuous += not rep.vacuous
    assert nonvacuous > 0


def test_claim_vacuous_when_support_left_of_plane(coarse):
    mask, k = coarse
    g = mask.grid
    vals = np.clip(0.1 - np.sum((g.points() - (-0.5, 0.0)) ** 2, axis=-1), 0, None)
    rep = verify_claim_sign(GridFunction(g, vals), mask, k, 0.25)
    assert rep.vacuous and rep.passed


def test_claim_rejects_negative_input_and_misaligned_plane(coarse):
    mask, k = coarse
    g = mask.grid
    with pytest.raises(ValueError):
        verify_claim_sign(GridFunction(g, -np.where(mask.inside, 1.0, 0.0)), mask, k, 0.25)
    with pytest.raises(ValueError):
        verify_claim_sign(GridFunction(g, np.zeros(g.shape)), mask, k, 0.1)


def test_scan_on_zero_is_trivial(coarse):
    mask, k = coarse
    res = moving_plane_scan(GridFunction(mask.grid, np.zeros(mask.grid.shape)), mask, k, [0.25, 0.5])
    assert all(r.sigma_minus_count == 0 and r.min_w == 0.0 for r in res.reports)


def test_scan_on_torsion_solution(torsion32):
    u, mask, k = torsion32
    lams = [j / 16 for j in range(1, 16)]
    res = moving_plane_scan(u, mask, k, lams)
    assert all(r.sigma_minus_count == 0 and r.min_w >= -res.eps for r in res.reports)
    assert res.lambda0_hat == lams[0]


def test_scan_detects_shifted_profile(torsion32):
    u, mask, k = torsion32
    g = mask.grid
    shifted = np.clip(1 - np.sum((g.points() - (0.3, 0.0)) ** 2, axis=-1), 0, None)
    res = moving_plane_scan(GridFunction(g, np.where(mask.inside, shifted, 0.0)), mask, k, [0.0625, 0.125, 0.5])
    assert res.reports[0].sigma_minus_count > 0
    assert res.reports[0].sigma_minus_measure > 0
    assert all(r.claim_passed for r in res.reports)


@pytest.mark.parametrize("seed", range(4))
def test_comparison_witness_matches_brute_force(seed):
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    mask, k = ball_mask(g, 1.0), RieszKernel(0.5, 2)
    rng = np.random.default_rng(seed)
    u, x0 = contact_pair(mask, 0.25, (8, 2), rng)
    val = comparison_witness(u, k, 0.25, x0)
    assert val < 0
    big = u.grid
    W = stencil_weights(big.shape, big.h, k)[0]
    w = oracles.reflect_values(u.values, big.h, 0.25, 0) - u.values
    node = tuple(int(i) for i in np.rint(np.asarray(x0) / big.h).astype(int) + np.asarray(big.half_extent))
    assert val == pytest.approx(-oracles.lattice_row(W, w, node), rel=1e-10)


def test_comparison_witness_compact_kernel():
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    mask, k = ball_mask(g, 1.0), PiecewiseMuKernel(0.0, 0.5, 0.3, 2)
    u, x0 = contact_pair(mask, 0.25, (8, 2), np.random.default_rng(5), support_radius=0.5)
    assert comparison_witness(u, k, 0.25, x0) < 0


def test_abp_nonnegative_pair_gives_zero_ratios(coarse):
    mask, k = coarse
    g = mask.grid
    w = GridFunction(g, np.zeros(g.shape))
    rep = abp_check(w, np.where(mask.inside, 1.0, 0.0), mask, k)
    assert rep.ratio1 == 0.0 and rep.ratio2 == 0.0


def test_abp_torsion_pair_depth():
    g = UniformGrid.covering(2, 1 / 32, 1.0)
    mask, k = ball_mask(g, 1.0), RieszKernel(0.5, 2)
    w, h, op = torsion_pair(mask, k)
    rep = abp_check(w, h, mask, k, op=op)
    assert rep.neg_inf_w == pytest.approx(2 / np.pi, rel=1e-8)
    assert rep.inf_w == pytest.approx(-2 / np.pi, rel=1e-8)
    assert np.isfinite(rep.ratio1) and rep.ratio1 > 0
    assert rep.max_violation <= 1e-8


def test_abp_rejects_bad_pairs():
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    mask, k = ball_mask(g, 1.0), RieszKernel(0.5, 2)
    w, h, op = torsion_pair(mask, k)
    with pytest.raises(AbpRejected):
        abp_check(w, 0.5 * h, mask, k, op=op)
    neg_ext = GridFunction(g, w.values, ConstantExterior(-1.0))
    with pytest.raises(AbpRejected):
        abp_check(neg_ext, h, mask, k, op=op)


def test_small_domain_probe_threshold():
    k = RieszKernel(0.5, 2)
    masks = []
    for rho in (0.125, 0.25, 0.5):
        g = UniformGrid.covering(2, 1 / 32, rho)
        masks.append(ball_mask(g, rho))
    rep = small_domain_probe(masks, 1.0, k)
    assert all(a < b for a, b in zip(rep.kappas, rep.kappas[1:]))
    pre = rep.c_emp * rep.d0**0.5 * rep.phi_bound
    assert pre * rep.delta_hat ** (0.5 / 2) == pytest.approx(1.0)
    assert pre * (1e-12) ** 0.25 < 1e-2
    with pytest.raises(ValueError):
        small_domain_probe([], 1.0, k)


def test_radial_symmetry_examples(torsion32):
    u, mask, k = torsion32
    g = mask.grid
    exact = GridFunction(g, np.clip(1 - g.radius() ** 2, 0, None))
    assert check_radial_symmetry(exact, mask).max_asymmetry < 1e-14
    rep = check_radial_symmetry(u, mask, 2e-2)
    assert rep.passed and rep.max_asymmetry < 1e-10
    odd = GridFunction(g, np.where(mask.inside, g.points()[..., 0], 0.0))
    bad = check_radial_symmetry(odd, mask, 2e-2)
    assert not bad.passed and bad.max_asymmetry == pytest.approx(1.0, abs=0.05)


def test_radial_monotonicity_examples(torsion32):
    u, mask, k = torsion32
    g = mask.grid
    assert check_radial_monotonicity(u, mask, alpha=0.5).passed
    bump = np.clip(1 - g.radius() ** 2, 0, None) + 0.5 * np.exp(-200 * (g.radius() - 0.5) ** 2)
    rep = check_radial_monotonicity(GridFunction(g, np.where(mask.inside, bump, 0.0)), mask, alpha=0.5)
    assert not rep.passed
    assert rep.witness is not None and 0.3 < rep.witness[0] < 0.6


def test_axial_checks_on_stadium():
    g = UniformGrid.covering(2, 1 / 16, 1.5)
    m = stadium_mask(g, 0.5, 0.75)
    x = g.points()
    prof = np.where(m.inside, np.exp(-x[..., 0] ** 2 - 0.5 * x[..., 1] ** 2), 0.0)
    sym, mono = check_axial_symmetry_monotonicity(GridFunction(g, prof), m, axis=0)
    assert sym.passed and mono.passed
    bumpy = prof + np.where(m.inside, 0.3 * np.exp(-100 * (x[..., 0] - 0.5) ** 2), 0.0)
    sym, mono = check_axial_symmetry_monotonicity(GridFunction(g, bumpy), m, axis=0)
    assert not sym.passed and not mono.passed
    assert mono.witness is not None and mono.witness[0] > 0
    with pytest.raises(DomainError):
        check_radial_symmetry(GridFunction(g, prof), m)


def test_radial_profile_shell_means(torsion32):
    u, mask, _ = torsion32
    r, prof = radial_profile(u, mask)
    assert r[0] == 0.0 and np.all(np.diff(r) > 0)
    assert prof[0] == pytest.approx(u.values.max())


@pytest.mark.parametrize("m", [2.0, 3.0, 5.0])
def test_decay_fit_recovers_power_laws(m):
    r = np.linspace(1.0, 20.0, 200)
    rep = decay_fit((r, r**-m), (2.0, 15.0))
    assert rep.m_hat == pytest.approx(m, rel=1e-2)
    assert rep.power_law


def test_decay_fit_flags_exponential():
    r = np.linspace(1.0, 20.0, 400)
    narrow = decay_fit((r, np.exp(-r)), (2.0, 5.0))
    wide = decay_fit((r, np.exp(-r)), (10.0, 19.0))
    assert wide.m_hat > narrow.m_hat
    assert not wide.power_law and not narrow.power_law


def test_decay_fit_errors_and_targets():
    r = np.linspace(1.0, 2.0, 10)
    with pytest.raises(ValueError):
        decay_fit((r, r**-2), (1.0, 1.2))
    with pytest.raises(ValueError):
        decay_fit((r, -(r**-2)), (1.0, 2.0))
    rep = decay_fit((np.linspace(1, 10, 100), np.linspace(1, 10, 100) ** -3.0), (2, 9), alpha=0.5, gamma=2.0, dim=2, q=0.5)
    assert rep.condition_holds and rep.condition_bound == pytest.approx(0.5)
    assert rep.target == pytest.approx(6.0)
    assert rep.target_ratio == pytest.approx(0.5, rel=1e-2)


@pytest.mark.parametrize("m, alpha, gamma, N, q, cond, target", oracles.DECAY_TABLE)
def test_decay_condition_and_target_table(m, alpha, gamma, N, q, cond, target):
    assert decay_condition(m, alpha, gamma, N) is cond
    assert decay_target(N, alpha, q) == pytest.approx(target)


def test_random_bump_is_nonnegative_and_supported(coarse):
    mask, _ = coarse
    u = random_bump(mask, np.random.default_rng(0))
    assert u.values.min() >= 0
    assert np.all(u.values[~mask.inside] == 0)
    assert u.values.max() > 0
