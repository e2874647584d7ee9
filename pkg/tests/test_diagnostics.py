import numpy as np
import pytest

from lortz_euler.clebsch import clebsch_step
from lortz_euler.diagnostics import (bernoulli_on_orbits, euler_residual, fibration_check,
                                     full_report, theta_mode_energy)
from lortz_euler.fields import ScalarField, sample_scalar, sample_vector
from lortz_euler.geometry import DomainSpec, GridSpec, grid_for


@pytest.fixture(scope="module")
def setup(base):
    d = DomainSpec(epsilon=0.0, m=8, grid=GridSpec(16, 64, 16))
    u = sample_vector(d, base.u_star)
    H = sample_scalar(d, lambda x: base.bernoulli_poly(np.hypot(x[..., 0], x[..., 1])))
    return d, u, H


def test_euler_residual_and_negative_control(setup):
    d, u, H = setup
    good = euler_residual(u, H)
    bad = euler_residual(u, ScalarField(d, 2 * H.values))
    assert good < 1e-4
    assert bad > 0.3
    assert bad > 100 * good


def test_fibration(setup):
    d, u, H = setup
    rep = fibration_check(H)
    assert rep.monotone and rep.increasing and rep.margin > 0
    flat = fibration_check(ScalarField(d, np.ones(grid_for(d).shape)))
    assert flat.degenerate and not flat.monotone


def test_bernoulli_on_orbits(setup, base):
    d, u, H = setup
    assert bernoulli_on_orbits(u, H, n_orbits=5, base=base) < 1e-8
    fake = sample_scalar(d, lambda x: x[..., 0])
    assert bernoulli_on_orbits(u, fake, n_orbits=5, base=base) > 0.1


def test_mode_energy_axisymmetric(setup):
    _, u, _ = setup
    e = theta_mode_energy(u)
    assert e[0] > 0 and e[1:].max() < 1e-25 * e[0]


def test_full_report_base_state(setup, base):
    d, u, H = setup
    rep = full_report(u, clebsch_step(u, base), base=base, n_orbits=5)
    assert rep.euler_residual_rel < 1e-4
    assert rep.bernoulli_orbit_variation < 1e-8
    assert rep.parity_residual < 1e-14 and rep.mfold_residual < 1e-14
    assert rep.fibration_monotone
    assert set(rep.to_dict()) >= {"euler_residual_rel", "div_residual", "notes"}
