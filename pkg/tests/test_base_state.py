import numpy as np
import pytest

from lortz_euler.base_state import Profile, check_hypotheses
from lortz_euler.errors import ConfigError, PeriodOutOfRange


def test_bernoulli_oracle(base):
    # H*(1) = 1*4/2 + 1/2 int_0^1 (1+q)^2 dq = 2 + 7/6
    assert base.bernoulli_star(1.0) == pytest.approx(19 / 6, abs=1e-12)
    r = np.linspace(0, 1.4, 9)
    assert np.allclose(base.bernoulli_poly(r), base.bernoulli_star(r), atol=1e-12)


def test_bernoulli_derivative(base):
    r = np.linspace(0.1, 1.2, 7)
    h = 1e-6
    fd = (base.bernoulli_poly(r + h) - base.bernoulli_poly(r - h)) / (2 * h)
    assert np.allclose(base.bernoulli_star_prime(r), fd, rtol=1e-8)


def test_period_window_and_inverse(base):
    assert base.period_window == pytest.approx((2 * np.pi / 5, 2 * np.pi))
    r = np.array([0.0, 0.3, 1.0, 1.7])
    assert np.allclose(base.radius_of_period(base.period_star(r)), r, atol=1e-12)
    assert np.allclose(base.script_H(base.period_star(r)), base.bernoulli_poly(r), atol=1e-12)


def test_script_H_prime(base):
    T = np.linspace(2.0, 6.0, 5)
    h = 1e-6
    fd = (base.script_H(T + h) - base.script_H(T - h)) / (2 * h)
    assert np.allclose(base.script_H_prime(T), fd, rtol=1e-7)


def test_circulation_potential(base):
    T = np.linspace(2.0, 6.0, 5)
    h = 1e-5
    fd = (base.circulation_potential(T + h) - base.circulation_potential(T - h)) / (2 * h)
    assert np.allclose(fd, T * base.script_H_prime(T) / (2 * np.pi), rtol=1e-7)
    assert base.circulation_potential(2 * np.pi) == pytest.approx(0.0, abs=1e-14)


def test_out_of_window(base):
    with pytest.raises(PeriodOutOfRange) as ei:
        base.script_H(7.0)
    assert ei.value.period == pytest.approx(7.0)
    # inside the slack the polynomial continuation is used
    assert np.isfinite(base.script_H(2 * np.pi * 1.01, slack=0.05))


def test_hypotheses():
    assert check_hypotheses(Profile()).passed
    assert not check_hypotheses(Profile((1.0,))).passed          # constant rotation
    assert not check_hypotheses(Profile((1.0, 0.0, 1.0))).h2     # Omega''(0) = 0
    with pytest.raises(ConfigError):
        Profile(())


def test_u_star_is_rigid_profile(base):
    x = np.array([[0.5, 0.0, 0.1], [0.0, 0.8, 2.0]])
    u = base.u_star(x)
    assert np.allclose(u[0], [0.0, 0.5 * 1.25, 0.0])
    assert np.allclose(u[1], [-0.8 * 1.64, 0.0, 0.0])
