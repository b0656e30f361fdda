import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman_newton.nonlinearity import NONLINEARITIES, cutoff, cutoff_derivative, get_nonlinearity
from carleman_newton.phantoms import PHANTOMS, get_phantom, heat_kernel_solution

val = st.floats(-3, 3, allow_nan=False)


def _fd_check(f, u, gx, gy, tau=1e-6):
    x = y = np.zeros(1)
    du = (f.F(x, y, u + tau, gx, gy) - f.F(x, y, u - tau, gx, gy)) / (2 * tau)
    dx = (f.F(x, y, u, gx + tau, gy) - f.F(x, y, u, gx - tau, gy)) / (2 * tau)
    dy = (f.F(x, y, u, gx, gy + tau) - f.F(x, y, u, gx, gy - tau)) / (2 * tau)
    ax, ay = f.dF_dgrad(x, y, u, gx, gy)
    au = f.dF_du(x, y, u, gx, gy)
    for a, b in ((au, du), (ax, dx), (ay, dy)):
        assert np.allclose(a, b, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("name", sorted(NONLINEARITIES))
@settings(max_examples=30, deadline=None)
@given(u=val, gx=val, gy=val)
def test_partials_match_finite_differences(name, u, gx, gy):
    _fd_check(get_nonlinearity(name), np.array([u]), np.array([gx]), np.array([gy]))


@settings(max_examples=30, deadline=None)
@given(u=val, gx=val, gy=val)
def test_cutoff_partials_match_finite_differences(u, gx, gy):
    # keep away from the kink of |u| and |grad u| at 0
    if abs(u) < 1e-3 or np.hypot(gx, gy) < 1e-3:
        return
    _fd_check(get_nonlinearity("sqrt_gradient", cutoff_B=2.0), np.array([u]), np.array([gx]), np.array([gy]))


def test_cutoff_profile():
    s = np.linspace(0, 5, 501)
    chi = cutoff(s, 1.5)
    assert np.all(chi[s <= 1.5] == 1.0)
    assert np.all(chi[s >= 3.0] == 0.0)
    assert np.all(np.diff(chi) <= 0)
    mid = (s > 1.6) & (s < 2.9)
    d = cutoff_derivative(s[mid], 1.5)
    fd = (cutoff(s[mid] + 1e-6, 1.5) - cutoff(s[mid] - 1e-6, 1.5)) / 2e-6
    np.testing.assert_allclose(d, fd, rtol=1e-5, atol=1e-8)


def test_cutoff_inactive_below_bound():
    f, fb = get_nonlinearity("fisher"), get_nonlinearity("fisher", cutoff_B=10.0)
    u = np.linspace(-2, 2, 9)
    z = np.zeros_like(u)
    np.testing.assert_array_equal(f.F(z, z, u, z, z), fb.F(z, z, u, z, z))


def test_values():
    f = get_nonlinearity("fisher")
    assert f.F(0, 0, np.array(0.5), 0, 0) == 0.25
    g = get_nonlinearity("sqrt_gradient")
    assert g.F(0, 0, np.array(1.0), np.array(3.0), np.array(4.0)) == pytest.approx(1 + np.sqrt(26))
    assert not f.needs_gradient and g.needs_gradient


def test_unknown_nonlinearity_and_bad_cutoff():
    with pytest.raises(ValueError):
        get_nonlinearity("cubic")
    with pytest.raises(ValueError):
        get_nonlinearity("fisher", cutoff_B=0.0)


def test_phantoms():
    p = get_phantom("disk8")
    assert p(0.0, 0.3) == 8.0 and p(0.0, 0.3 + 0.46) == 0.0 and p(0.0, -0.15) == 8.0
    four = get_phantom("fourdisks")
    vals = {d.label: d.value for d in four.inclusions}
    assert vals == {"up_right": 12.0, "down_left": 10.0, "down_right": 14.0, "up_left": 9.0}
    for x, y, v in [(0.5, 0.5, 12), (-0.5, -0.5, 10), (0.5, -0.5, 14), (-0.5, 0.5, 9), (0, 0, 0)]:
        assert four(x, y) == v
    g = get_phantom("gaussian")
    assert g(0.0, 0.0) == 1.0
    assert set(PHANTOMS) >= {"disk8", "fourdisks", "gaussian"}
    with pytest.raises(ValueError):
        get_phantom("square")


def test_heat_kernel_solution_solves_heat_equation():
    x, y, t, e = 0.3, -0.2, 0.4, 1e-4
    u = lambda x, y, t: heat_kernel_solution(x, y, t)
    ut = (u(x, y, t + e) - u(x, y, t - e)) / (2 * e)
    lap = (u(x + e, y, t) + u(x - e, y, t) + u(x, y + e, t) + u(x, y - e, t) - 4 * u(x, y, t)) / e**2
    assert ut == pytest.approx(lap, rel=1e-4)
