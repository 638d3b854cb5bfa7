import math

import numpy as np
import pytest

from fracsym.geometry import ConstantExterior, GridFunction, RadialTableExterior, UniformGrid, ball_mask, box_mask, stadium_mask
from fracsym.kernels import PiecewiseMuKernel, RieszKernel, torsion_constant
from fracsym.operator import (
    apply, assemble, convergence_probe, dense_apply, dense_matrix, dump_operator, gaussian_profile, read_binary,
)
from oracles import gaussian_second_difference, pv_laplacian_1d


@pytest.fixture(scope="module")
def disc_op():
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    return assemble(g, ball_mask(g, 1.0), RieszKernel(0.4, 2))


def _random_field(op, seed=0):
    rng = np.random.default_rng(seed)
    return np.where(op.mask.inside, rng.normal(size=op.grid.shape), 0.0)


def test_dense_and_matrix_free_agree(disc_op):
    u = GridFunction(disc_op.grid, _random_field(disc_op))
    fast = apply(disc_op, u).values[disc_op.mask.inside]
    slow = dense_apply(disc_op, u)
    slow = slow[disc_op.mask.inside] if slow.shape == disc_op.grid.shape else slow
    assert np.max(np.abs(fast - slow)) <= 1e-12 * max(1.0, np.max(np.abs(fast)))


@pytest.mark.parametrize("kernel", [PiecewiseMuKernel(0.5, 0.5, 0.3, 2), PiecewiseMuKernel(0.0, 0.6, 0.3, 2)])
def test_dense_and_matrix_free_agree_piecewise(kernel):
    g = UniformGrid.covering(2, 1 / 8, 1.5)
    op = assemble(g, stadium_mask(g, 0.5, 0.75), kernel)
    u = GridFunction(g, _random_field(op, 5))
    fast = apply(op, u).values[op.mask.inside]
    slow = dense_apply(op, u)
    slow = slow[op.mask.inside] if slow.shape == g.shape else slow
    assert np.max(np.abs(fast - slow)) <= 1e-12 * max(1.0, np.max(np.abs(fast)))


def test_matrix_is_a_symmetric_m_matrix(disc_op):
    A = dense_matrix(disc_op)
    off = A - np.diag(np.diag(A))
    assert np.all(off <= 0)
    assert np.all(np.diag(A) > 0)
    assert np.all(A.sum(axis=1) > 0)
    assert np.allclose(A, A.T, rtol=0, atol=1e-12 * np.abs(A).max())


def test_zero_and_constant_inputs(disc_op):
    g = disc_op.grid
    zero = apply(disc_op, GridFunction(g, np.zeros(g.shape)))
    assert np.all(zero.values == 0)
    c = 2.5
    const = apply(disc_op, GridFunction(g, np.full(g.shape, c), ConstantExterior(c)))
    assert np.max(np.abs(const.values[disc_op.mask.inside])) <= 1e-9 * c * np.abs(disc_op.diagonal()).max()


def test_nonconstant_exterior_is_rejected(disc_op):
    g = disc_op.grid
    u = GridFunction(g, np.zeros(g.shape), RadialTableExterior((0.0, 5.0), (1.0, 0.0)))
    with pytest.raises(ValueError):
        apply(disc_op, u)


def test_linearity(disc_op):
    g = disc_op.grid
    a, b = _random_field(disc_op, 1), _random_field(disc_op, 2)
    La = apply(disc_op, GridFunction(g, a)).values
    Lb = apply(disc_op, GridFunction(g, b)).values
    Lab = apply(disc_op, GridFunction(g, 2 * a - 3 * b)).values
    assert np.allclose(Lab, 2 * La - 3 * Lb, atol=1e-10 * np.abs(Lab).max())


def test_reflection_equivariance(disc_op):
    g = disc_op.grid
    a = _random_field(disc_op, 3)
    La = apply(disc_op, GridFunction(g, a)).values
    Lf = apply(disc_op, GridFunction(g, np.flip(a, 0))).values
    assert np.allclose(Lf, np.flip(La, 0), atol=1e-10 * np.abs(La).max())
    Lt = apply(disc_op, GridFunction(g, a.T.copy())).values
    assert np.allclose(Lt, La.T, atol=1e-10 * np.abs(La).max())


def test_discrete_comparison_principle(disc_op):
    # L u >= 0 in the mask with u = 0 outside forces u >= 0
    A = dense_matrix(disc_op)
    rng = np.random.default_rng(4)
    for _ in range(5):
        rhs = rng.random(A.shape[0]) * (rng.random(A.shape[0]) < 0.2)
        u = np.linalg.solve(A, rhs)
        assert u.min() >= -1e-13


def test_piecewise_mu_one_is_bitwise_riesz():
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    m = ball_mask(g, 1.0)
    a = assemble(g, m, RieszKernel(0.35, 2))
    b = assemble(g, m, PiecewiseMuKernel(1.0, 0.35, 0.35, 2))
    assert np.array_equal(a.stencil, b.stencil)
    assert np.array_equal(a.diagonal(), b.diagonal())


@pytest.mark.parametrize("dim, h", [(1, 1 / 128), (2, 1 / 32)])
def test_torsion_identity(dim, h):
    g = UniformGrid.covering(dim, h, 1.0)
    op = assemble(g, ball_mask(g, 1.0), RieszKernel(0.5, dim))
    psi = np.clip(1 - g.radius() ** 2, 0, None) ** 0.5 / torsion_constant(dim, 0.5)
    Lu = op.apply_values(psi)
    assert np.max(np.abs(Lu[op.mask.inside] - 1.0)) < 1e-10


def test_modulated_profile_against_quadrature():
    """A non-torsion profile: errors against the PV quadrature shrink with h."""
    a = 0.5

    def u(x):
        return np.clip(1 - x**2, 0, None) ** a * (1 + x + 2 * x**2) * np.cos(x)

    xs = np.array([-0.75, -0.5, 0.0, 0.25, 0.75])
    ref = np.array([pv_laplacian_1d(lambda y: float(u(np.array(y))), x, a, breaks=(1 - x, 1 + x), reach=1.0) for x in xs])
    errs = []
    for h in (1 / 64, 1 / 128, 1 / 256):
        g = UniformGrid.covering(1, h, 1.0)
        op = assemble(g, ball_mask(g, 1.0), RieszKernel(a, 1))
        Lu = op.apply_values(u(g.axis_coords(0)))
        idx = np.rint(xs / h).astype(int) + g.half_extent[0]
        errs.append(np.max(np.abs(Lu[idx] - ref)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_gaussian_reference_matches_quadrature(alpha):
    prof = gaussian_profile(1, alpha)
    for x in (0.0, 0.6, 1.7):
        ref = pv_laplacian_1d(lambda y: math.exp(-y * y), x, alpha, second_difference=gaussian_second_difference)
        assert float(prof.exact(np.array([x]))) == pytest.approx(ref, abs=1e-10)


def test_gaussian_reference_2d_radial_consistency():
    # at the origin (-Delta)^a exp(-|x|^2) = 4^a Gamma(N/2+a)/Gamma(N/2)
    prof = gaussian_profile(2, 0.5)
    assert float(prof.exact(np.zeros(2))) == pytest.approx(2 * math.gamma(1.5) / math.gamma(1.0))


def test_convergence_probe_needs_three_levels():
    with pytest.raises(ValueError):
        convergence_probe(RieszKernel(0.5, 1), gaussian_profile(1, 0.5), [1 / 32, 1 / 64])


def test_convergence_probe_order():
    rep = convergence_probe(RieszKernel(0.5, 1), gaussian_profile(1, 0.5), [1 / 32, 1 / 64, 1 / 128])
    assert rep.order >= 1.0
    assert all(e1 > e2 for e1, e2 in zip(rep.errors, rep.errors[1:]))


def test_box_mask_operator_torsion_positive():
    g = UniformGrid.covering(2, 1 / 16, 1.0)
    op = assemble(g, box_mask(g, (-1.0, -0.5), (1.0, 0.5)), RieszKernel(0.5, 2))
    A = dense_matrix(op)
    tau = np.linalg.solve(A, np.ones(A.shape[0]))
    assert tau.min() > 0


def test_binary_dump_round_trip(tmp_path, disc_op):
    p = tmp_path / "op.bin"
    dump_operator(disc_op, p)
    header, payload = read_binary(p)
    assert header["dims"] == list(disc_op.grid.shape)
    n_st = disc_op.stencil.size
    assert np.array_equal(payload[:n_st].reshape(disc_op.stencil.shape), disc_op.stencil)
    assert np.array_equal(payload[n_st:], disc_op.diagonal_extra[disc_op.mask.inside])
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        read_binary(bad)
