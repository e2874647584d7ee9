import numpy as np
import pytest

from lortz_euler.errors import ConfigError, PointOutsideDomain
from lortz_euler.geometry import (DomainSpec, GridSpec, MappedPoint, boundary_normal,
                                  from_cartesian, grid_for, to_cartesian)


@pytest.fixture
def dom():
    return DomainSpec(epsilon=0.1, m=8, grid=GridSpec(12, 32, 8))


def test_mapping_round_trip(dom):
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = MappedPoint(rng.uniform(0, 1), rng.uniform(0, 2 * np.pi), rng.uniform(0, dom.axial_period))
        q = from_cartesian(to_cartesian(p, dom), dom)
        assert np.allclose([q.s, q.theta, q.z], [p.s, p.theta, p.z], atol=1e-12)


def test_point_outside_raises(dom):
    with pytest.raises(PointOutsideDomain):
        from_cartesian([1.5, 0.0, 0.0], dom)


@pytest.mark.parametrize("kw", [dict(m=0), dict(epsilon=-0.1), dict(m=3),
                                dict(grid=GridSpec(12, 32, 7)), dict(epsilon=2.0)])
def test_invalid_domains(kw):
    with pytest.raises(ConfigError):
        DomainSpec(**{**dict(m=8, grid=GridSpec(12, 32, 8)), **kw})


def test_normal_is_radial_on_straight_cylinder():
    d = DomainSpec(epsilon=0.0)
    th = np.linspace(0, 2 * np.pi, 7)
    n = boundary_normal(th, 0.3 * np.ones_like(th), d)
    assert np.allclose(n, np.stack([np.cos(th), np.sin(th), 0 * th], axis=-1))


def test_normal_matches_implicit_gradient(dom):
    # finite-difference gradient of r - R(theta, z) at a wall point
    th, z = 0.37, 1.1
    x = to_cartesian(MappedPoint(1.0, th, z), dom)

    def phi(y):
        t = np.arctan2(y[1], y[0])
        return np.hypot(y[0], y[1]) - dom.radius(t, y[2])
    h = 1e-6
    grad = np.array([(phi(x + h * e) - phi(x - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(boundary_normal(th, z, dom), grad / np.linalg.norm(grad), atol=1e-8)


def test_grid_volume_and_mask():
    d = DomainSpec(epsilon=0.0, grid=GridSpec(48, 16, 4))
    g = grid_for(d)
    assert g.volume() == pytest.approx(np.pi * d.axial_period, rel=1e-3)
    mask = g.interior_mask()
    assert not mask[0].any() and not mask[-1].any() and mask[10].all()


def test_digest_tracks_grid(dom):
    assert dom.digest() == DomainSpec(epsilon=0.1, m=8, grid=GridSpec(12, 32, 8)).digest()
    assert dom.digest() != dom.with_grid(n_s=14).digest()
    assert len(dom.digest()) == 16
