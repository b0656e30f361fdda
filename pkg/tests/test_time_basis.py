import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman_newton.time_basis import (
    BasisError,
    build_basis,
    export_csv,
    project,
    quadrature_grid,
    raw_functions,
    stiffness,
    synthesize,
    truncation_error,
)

T = 1.5
# Continuous Gram-Schmidt with 30-digit adaptive quadrature (mpmath), T = 1.5.
PSI0 = [0.32371498726891207059, -0.98390077177144806181, 1.5211662233543292008]
PSIT = [1.4507899203477090273, 1.7228060624145862133, 2.0770042559114011005]
S3 = np.array(
    [
        [1.0, 2.8179330958728748295, 2.5208725343685085267],
        [0.0, 1.0, 5.0749521448960419219],
        [0.0, 0.0, 1.0],
    ]
)


@pytest.mark.parametrize("rule", ["exact", "gregory", "trapezoid"])
def test_quadrature_grid_invariants(rule):
    q = quadrature_grid(T, 300, rule=rule, N=5)
    assert q.nodes[0] == 0.0 and q.nodes[-1] == T
    assert np.all(q.weights > 0)
    assert q.weights.sum() == pytest.approx(T, rel=1e-13)


def test_exact_rule_integrates_weighted_polynomials():
    q = quadrature_grid(T, 300, rule="exact", N=5)
    t = q.nodes
    for k in range(10):
        # int_0^T t^k e^{2t-T} dt, by a fine Simpson reference
        fine = np.linspace(0, T, 200001)
        ref = integrate.simpson(fine**k * np.exp(2 * fine - T), x=fine)
        assert q.integrate(t**k * np.exp(2 * t - T)) == pytest.approx(ref, rel=1e-9)


def test_unknown_rule_rejected():
    with pytest.raises(ValueError):
        quadrature_grid(T, 100, rule="simpson")


def test_single_function_closed_form():
    b = build_basis(T, 3000, 1)
    t = b.nodes
    np.testing.assert_allclose(b.psi[0], np.exp(t - 0.75) / math.sqrt(math.sinh(1.5)), rtol=1e-12)
    assert b.psi0[0] == pytest.approx(0.32371498726891207, abs=1e-12)


def test_low_modes_match_continuous_oracle():
    b = build_basis(T, 3000, 3)
    np.testing.assert_allclose(b.psi0, PSI0, atol=1e-10)
    np.testing.assert_allclose(b.psi[:, -1], PSIT, atol=1e-10)
    np.testing.assert_allclose(stiffness(b), S3, atol=1e-8)


def test_stiffness_single_mode_is_one():
    assert stiffness(build_basis(T, 100, 1))[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_paper_size_basis(basis35):
    assert np.abs(basis35.gram() - np.eye(35)).max() <= 1e-8
    S = stiffness(basis35)
    pT, p0 = basis35.psi[:, -1], basis35.psi[:, 0]
    assert np.abs(S + S.T - np.outer(pT, pT) + np.outer(p0, p0)).max() <= 1e-7


def test_paper_size_basis_under_fine_quadrature(basis35):
    # Independent check: evaluate the recorded recurrence on a 10x finer grid
    # and integrate with composite Simpson.
    t = np.linspace(0, T, 30001)
    vals = basis35.evaluate(t)
    G = integrate.simpson(vals[:, None, :] * vals[None, :, :], x=t)
    assert np.abs(G - np.eye(35)).max() <= 1e-8


def test_evaluate_matches_samples(basis35):
    np.testing.assert_allclose(basis35.evaluate(basis35.nodes), basis35.psi, atol=1e-9, rtol=0)


def test_gs_coeffs_reproduce_basis_for_small_N():
    b = build_basis(T, 600, 6)
    raw = raw_functions(b.nodes, T, 6)
    np.testing.assert_allclose(b.gs_coeffs @ raw, b.psi, atol=1e-9)
    assert np.allclose(np.triu(b.gs_coeffs, 1), 0)


def test_resolution_guard():
    with pytest.raises(ValueError):
        build_basis(T, 99, 10)


def test_unresolvable_basis_rejected():
    # 60 modes on 600 nodes: the moment-corrected rule cannot stay positive
    with pytest.raises(BasisError):
        build_basis(T, 600, 60)


@pytest.mark.parametrize("k", [0, 4, 17, 34])
def test_project_basis_function_gives_unit_vector(basis35, k):
    c = project(basis35.psi[k], basis35)
    e = np.zeros(35)
    e[k] = 1.0
    np.testing.assert_allclose(c, e, atol=1e-8)


def test_project_zero_and_exponential():
    b = build_basis(T, 3000, 1)
    assert np.all(project(np.zeros(3001), b) == 0)
    c = project(np.exp(b.nodes - T / 2), b)
    assert c[0] == pytest.approx(1.4592050764353917559, abs=1e-10)


def test_project_length_mismatch(small_basis):
    with pytest.raises(ValueError):
        project(np.zeros(small_basis.nt), small_basis)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_in_span_trace_has_no_truncation_error(small_basis, coeffs):
    trace = synthesize(np.array(coeffs), small_basis)
    assert truncation_error(trace, small_basis).max() <= 1e-7


def test_truncation_error_l2_non_increasing(basis35):
    t = basis35.nodes
    trace = np.exp(-3 * t) + np.sin(4 * t) / (1 + t)
    prev = np.inf
    for N in (5, 10, 20, 35):
        b = build_basis(T, 3000, N)
        e = truncation_error(trace, b)
        l2 = math.sqrt(b.quad.integrate(e * e))
        assert l2 <= prev + 1e-12
        prev = l2


def test_export_csv(tmp_path):
    b = build_basis(T, 40, 3)
    path = tmp_path / "basis.csv"
    export_csv(b, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,psi_1,psi_2,psi_3"
    assert len(lines) == 42
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 1:].T, b.psi)
