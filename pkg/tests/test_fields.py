import numpy as np
import pytest

from lortz_euler.fields import (EVEN, ODD, ScalarField, VectorField, curl, divergence, gradient,
                                mfold_residual, norm, parity_residual, reflect, rotate,
                                sample_scalar, sample_vector, symmetrize_mfold)
from lortz_euler.geometry import DomainSpec, GridSpec, grid_for


@pytest.fixture
def d0():
    return DomainSpec(epsilon=0.0, m=8, grid=GridSpec(24, 32, 8))


@pytest.fixture
def d1():
    return DomainSpec(epsilon=0.1, m=8, grid=GridSpec(24, 64, 16))


def test_gradient_of_smooth_scalar(d1):
    f = sample_scalar(d1, lambda x: x[..., 0] ** 2 + 0.5 * x[..., 1] ** 2 + np.sin(x[..., 2]))
    g = gradient(f).values
    pts = grid_for(d1).points
    exact = np.stack([2 * pts[0], pts[1], np.cos(pts[2])])
    mask = grid_for(d1).interior_mask()
    assert np.abs(g - exact)[:, mask].max() < 1e-6


def test_base_vorticity_and_divergence(d1, base):
    u = sample_vector(d1, base.u_star)
    g = grid_for(d1)
    w = curl(u).values
    mask = g.interior_mask()
    assert np.abs(w[2] - base.vorticity_star(g.r))[mask].max() < 1e-4
    assert np.abs(w[:2])[:, mask].max() < 1e-4
    assert np.abs(divergence(u).values)[mask].max() < 1e-4


def test_curl_of_gradient_vanishes(d1):
    f = sample_scalar(d1, lambda x: x[..., 0] * x[..., 1] + np.cos(x[..., 2]) * x[..., 0])
    assert np.abs(curl(gradient(f)).values).max() < 1e-4


def test_parity(d0, base):
    u = sample_vector(d0, base.u_star)
    assert parity_residual(u, ODD) < 1e-14
    assert parity_residual(curl(u), EVEN) < 1e-10
    rng = np.random.default_rng(0)
    v = VectorField(d0, rng.standard_normal((3,) + grid_for(d0).shape))
    assert np.array_equal(reflect(reflect(v)).values, v.values)
    with pytest.raises(ValueError):
        parity_residual(v, "neither")


def test_mfold_projector(d0):
    rng = np.random.default_rng(1)
    v = VectorField(d0, rng.standard_normal((3,) + grid_for(d0).shape))
    p = symmetrize_mfold(v, 8)
    assert mfold_residual(p, 8) < 1e-13
    assert np.allclose(symmetrize_mfold(p, 8).values, p.values)
    assert mfold_residual(v, 8) > 0.1
    assert np.allclose(rotate(rotate(p, 1, 8), -1, 8).values, p.values)


def test_norms(d0):
    one = ScalarField(d0, np.ones(grid_for(d0).shape))
    assert norm(one, "L2") == pytest.approx(np.sqrt(grid_for(d0).volume()))
    assert norm(one, "sup") == 1.0
    with pytest.raises(ValueError):
        norm(one, "bogus")
