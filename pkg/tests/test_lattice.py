import mpmath
import numpy as np
import pytest
from scipy import signal

from fracsym.lattice import StencilConvolver, _epstein_theta, epstein_zeta
from oracles import lattice_sum_direct


def test_epstein_one_dimension_is_twice_riemann_zeta():
    for s in (-0.5, 0.4, 1.5, 3.0):
        assert epstein_zeta(1, s) == pytest.approx(2 * float(mpmath.zeta(s)), rel=1e-13)


@pytest.mark.parametrize("s", [-0.6, 0.5, 1.2, 2.5, 3.0])
def test_epstein_theta_split_matches_closed_form_in_2d(s):
    assert float(_epstein_theta(2, s, 6)) == pytest.approx(epstein_zeta(2, s), rel=1e-11)


def test_epstein_convergent_sum_by_direct_summation():
    # for s > N the series converges; add the continuum remainder of the shell beyond the cutoff
    for dim, s in ((2, 5.0), (3, 6.0)):
        cut = 200 if dim == 2 else 60
        direct = lattice_sum_direct(dim, s, cut)
        area = 2 * np.pi if dim == 2 else 4 * np.pi
        remainder = area * cut ** (dim - s) / (s - dim)
        assert epstein_zeta(dim, s) == pytest.approx(direct + remainder, rel=1e-4)


def test_epstein_three_dimensional_reference_value():
    assert epstein_zeta(3, 1.0) == pytest.approx(-2.8372974794806, rel=1e-10)


def test_epstein_is_negative_in_operator_range():
    # s = N + 2a - 2 lies in (N-2, N) where the continued sum is negative
    for dim in (1, 2, 3):
        for a in (0.1, 0.5, 0.9):
            assert epstein_zeta(dim, dim + 2 * a - 2) < 0


@pytest.mark.parametrize("shape", [(7,), (5, 6), (3, 4, 5)])
def test_stencil_convolver_matches_direct_convolution(shape):
    rng = np.random.default_rng(len(shape))
    st = rng.random(tuple(2 * s - 1 for s in shape))
    st = 0.5 * (st + np.flip(st))
    u = rng.random(shape)
    conv = StencilConvolver(st, shape)
    ref = signal.convolve(u, st, mode="full", method="direct")
    sl = tuple(slice(s - 1, 2 * s - 1) for s in shape)
    assert np.allclose(conv(u), ref[sl], rtol=1e-12, atol=1e-12)


def test_stencil_convolver_rejects_wrong_shape():
    with pytest.raises(ValueError):
        StencilConvolver(np.ones((3, 3)), (3, 3))
