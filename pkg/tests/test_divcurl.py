import numpy as np
import pytest

from lortz_euler.diagnostics import div_residual, tangency_residual
from lortz_euler.divcurl import check_compatibility, solve_divcurl, solver_for
from lortz_euler.errors import IncompatibleData
from lortz_euler.fields import ODD, VectorField, curl, inner, norm, parity_residual, sample_vector
from lortz_euler.geometry import DomainSpec, GridSpec, grid_for


def test_recovers_base_flow(base):
    d = DomainSpec(epsilon=0.0, m=8, grid=GridSpec(16, 64, 16))
    u = sample_vector(d, base.u_star)
    v = solve_divcurl(curl(u))
    assert norm(v - u, "sup") / norm(u, "sup") < 1e-10


def _solve_base_vorticity(base, n_s):
    d = DomainSpec(epsilon=0.1, m=8, grid=GridSpec(n_s, 64, 16))
    g = grid_for(d)
    om = np.zeros((3,) + g.shape)
    om[2] = base.vorticity_star(g.r)
    u, info = solver_for(d, "odd").solve(VectorField(d, om), check=False)
    return d, u, info


def test_perturbed_solution_properties(base):
    d, u, _ = _solve_base_vorticity(base, 16)
    assert tangency_residual(u) < 1e-10
    assert parity_residual(u, ODD) < 1e-12
    h = solver_for(d, "odd").harmonic.field
    assert abs(inner(u, h)) < 1e-10 * norm(u, "L2") * norm(h, "L2")


def test_least_squares_residual_converges(base):
    # the discrete system is consistent only up to truncation on the wavy wall
    res = [_solve_base_vorticity(base, n)[2].residual for n in (16, 24)]
    divs = [div_residual(_solve_base_vorticity(base, n)[1]) for n in (16, 24)]
    assert res[0] / res[1] > 1.5**3.5
    assert divs[0] / divs[1] > 1.5**3.5


def test_incompatible_vorticity_rejected():
    d = DomainSpec(epsilon=0.0, m=8, grid=GridSpec(16, 64, 16))
    bad = sample_vector(d, lambda x: np.stack([x[..., 0], x[..., 1], 0 * x[..., 2]], axis=-1))
    with pytest.raises(IncompatibleData):
        check_compatibility(bad)
