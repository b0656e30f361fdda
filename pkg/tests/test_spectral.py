import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman_newton.errors import NumericalError
from carleman_newton.forward import BoundaryTraces
from carleman_newton.grid import Grid2D, boundary_index
from carleman_newton.nonlinearity import Nonlinearity, get_nonlinearity
from carleman_newton.spectral import (
    DF_projection,
    F_projection,
    boundary_coeffs,
    linearization_blocks,
    residual,
)
from carleman_newton.time_basis import build_basis, stiffness
from carleman_newton.verify import jacobian_check

# int_0^1.5 psi_1^2 psi_m dt, continuous Gram-Schmidt at 30 digits (mpmath)
PSI1_SQ_PSI = [1.0065625309761388573, 0.2976086117585281305, 0.054830084160480433275]


@pytest.fixture(scope="module")
def basis3():
    return build_basis(1.5, 3000, 3)


def _traces(grid, basis, g0, g1):
    b = boundary_index(grid)
    return BoundaryTraces(grid, b, basis.nodes.copy(), g0, g1)


def test_boundary_coeffs_of_basis_function(basis3):
    g = Grid2D.square(1.0, 7)
    nb = len(boundary_index(g))
    g0 = np.tile(basis3.psi[1], (nb, 1))
    data = boundary_coeffs(_traces(g, basis3, g0, np.zeros_like(g0)), basis3)
    np.testing.assert_allclose(data.G0, np.tile([0.0, 1.0, 0.0], (nb, 1)), atol=1e-8)
    assert np.all(data.G1 == 0)


def test_boundary_coeffs_match_direct_quadrature(basis3):
    g = Grid2D.square(1.0, 5)
    nb = len(boundary_index(g))
    rng = np.random.default_rng(3)
    g0 = np.cos(basis3.nodes)[None] * rng.uniform(1, 2, (nb, 1))
    data = boundary_coeffs(_traces(g, basis3, g0, g0), basis3)
    w = basis3.quad.weights
    k = 3
    direct = [sum(g0[k, t] * basis3.psi[m, t] * w[t] for t in range(basis3.nt + 1)) for m in range(3)]
    np.testing.assert_allclose(data.G0[k], direct, rtol=0, atol=1e-12)


def test_boundary_coeffs_reject_mismatch(basis3):
    g = Grid2D.square(1.0, 5)
    other = build_basis(1.5, 1500, 3)
    nb = len(boundary_index(g))
    z = np.zeros((nb, 1501))
    with pytest.raises(ValueError):
        boundary_coeffs(BoundaryTraces(g, boundary_index(g), other.nodes, z, z), basis3)


def test_F_projection_trivial_cases(basis3, rng):
    g = Grid2D.square(1.0, 6)
    U = rng.standard_normal((3, 6, 6))
    assert np.all(F_projection(U, get_nonlinearity("zero"), basis3, g) == 0)
    np.testing.assert_allclose(F_projection(U, get_nonlinearity("linear"), basis3, g), U, atol=1e-10)


def test_F_projection_fisher_oracle(basis3):
    g = Grid2D.square(1.0, 5)
    c = 0.7
    U = np.zeros((3, 5, 5))
    U[0] = c
    f = F_projection(U, get_nonlinearity("fisher"), basis3, g)[:, 2, 2]
    expected = c * np.array([1.0, 0, 0]) - c**2 * np.array(PSI1_SQ_PSI)
    np.testing.assert_allclose(f, expected, atol=1e-7)


def test_F_projection_non_finite_reports_node(basis3):
    bad = Nonlinearity("bad", lambda x, y, u, gx, gy: np.where(u > 0.5, np.nan, u), None, None, False)
    g = Grid2D.square(1.0, 5)
    U = np.zeros((3, 5, 5))
    U[0, 1, 3] = 10.0
    with pytest.raises(NumericalError, match=r"\(1, 3\)"):
        F_projection(U, bad, basis3, g)


def test_DF_examples(basis3, rng):
    g = Grid2D.square(1.0, 6)
    U = rng.standard_normal((3, 6, 6))
    H = rng.standard_normal((3, 6, 6))
    np.testing.assert_allclose(DF_projection(U, H, get_nonlinearity("linear"), basis3, g), H, atol=1e-10)
    np.testing.assert_allclose(DF_projection(np.zeros_like(U), H, get_nonlinearity("sqrt_gradient"), basis3, g), H, atol=1e-10)


@pytest.mark.parametrize("name", ["fisher", "sqrt_gradient"])
@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10**6))
def test_DF_is_linear_in_direction(name, a, b, seed):
    basis = build_basis(1.5, 100, 3)
    g = Grid2D.square(1.0, 5)
    r = np.random.default_rng(seed)
    U, H1, H2 = (r.standard_normal((3, 5, 5)) for _ in range(3))
    f = get_nonlinearity(name)
    lhs = DF_projection(U, a * H1 + b * H2, f, basis, g)
    rhs = a * DF_projection(U, H1, f, basis, g) + b * DF_projection(U, H2, f, basis, g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)) * np.abs(rhs).max())


@pytest.mark.parametrize("name", ["fisher", "sqrt_gradient"])
def test_DF_matches_central_differences(name):
    c = jacobian_check(name, probes=25)
    assert c.passed, c.line()


@pytest.mark.parametrize("name", ["fisher", "sqrt_gradient"])
def test_linearization_blocks_agree_with_DF(name, rng):
    from carleman_newton.grid import gradient

    basis = build_basis(1.5, 200, 4)
    g = Grid2D.square(1.0, 7)
    U = 0.5 * rng.standard_normal((4, 7, 7))
    H = rng.standard_normal((4, 7, 7))
    f = get_nonlinearity(name)
    blk = linearization_blocks(U, f, basis, g)
    Hf = H.reshape(4, -1).T
    out = np.einsum("pmn,pn->pm", blk.u, Hf)
    if blk.gx is not None:
        GH = gradient(H, g.h).reshape(2, 4, -1)
        out += np.einsum("pmn,pn->pm", blk.gx, GH[0].T) + np.einsum("pmn,pn->pm", blk.gy, GH[1].T)
    np.testing.assert_allclose(out.T.reshape(H.shape), DF_projection(U, H, f, basis, g), atol=1e-10)


def test_cutoff_is_inactive_for_small_states(basis3, rng):
    g = Grid2D.square(1.0, 6)
    U = 0.01 * rng.standard_normal((3, 6, 6))
    a = F_projection(U, get_nonlinearity("sqrt_gradient"), basis3, g)
    b = F_projection(U, get_nonlinearity("sqrt_gradient", cutoff_B=100.0), basis3, g)
    np.testing.assert_array_equal(a, b)


def test_residual_trivial_cases(basis3):
    g = Grid2D.square(1.0, 6)
    S = stiffness(basis3)
    assert np.all(residual(np.zeros((3, 6, 6)), S, get_nonlinearity("zero"), basis3, g) == 0)
    a = np.array([1.0, -2.0, 0.5])
    U = np.broadcast_to(a[:, None, None], (3, 6, 6)).copy()
    L = residual(U, S, get_nonlinearity("zero"), basis3, g)
    np.testing.assert_allclose(L[:, 1:-1, 1:-1], np.broadcast_to((-S @ a)[:, None, None], (3, 4, 4)), atol=1e-10)
    assert np.all(L[:, 0] == 0) and np.all(L[:, :, -1] == 0)


def test_residual_second_order_on_manufactured_state(basis3):
    # u_m = sin(x + m) cos(y): Lap u_m = -2 u_m exactly
    errs = []
    for n in (21, 41):
        g = Grid2D.square(1.0, n)
        X, Y = g.mesh()
        U = np.array([np.sin(X + m) * np.cos(Y) for m in range(3)])
        S = stiffness(basis3)
        exact = -2 * U - np.tensordot(S, U, axes=1) + U
        L = residual(U, S, get_nonlinearity("linear"), basis3, g)
        errs.append(np.abs(L - exact)[:, 1:-1, 1:-1].max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
