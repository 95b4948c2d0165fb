import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treekernels._numerics import operator_norm
from treekernels.commutant import MatrixMultiplier
from treekernels.kernels import BergmanTreeKernel, TridiagonalKernel
from treekernels.shifts import assemble_shift, bergman_weights, custom_weights
from treekernels.tree import build_path_tree, build_two_ray_tree
from treekernels.vonneumann import (
    PolynomialSample,
    ball_positivity_defect,
    eigenline_multiplier_recovery,
    empirical_vn_constant,
    fejer_approximants,
    geometric_symbol,
    matrix_vn_defect,
    polynomial_of_matrix,
    probe_report,
    random_polynomial,
    sup_norm_estimate,
    vn_defect,
    wot_convergence_probe,
)

S2 = 1 / math.sqrt(2)


def poly(*c):
    return PolynomialSample(np.array(c, dtype=complex), len(c) - 1)


@pytest.fixture(scope="module")
def bpath():
    return assemble_shift(bergman_weights(build_path_tree(60), 2)).dense()


@pytest.fixture(scope="module")
def bpath_kernel():
    return BergmanTreeKernel(build_path_tree(60), 2)


def test_sup_norm_trivial():
    assert sup_norm_estimate(poly(0, 0, 0, 1)).value == pytest.approx(1.0)
    assert sup_norm_estimate(poly(1, 2)).value == pytest.approx(3.0)
    est = sup_norm_estimate(poly(1, 2), grid_size=64)
    assert est.grid_size == 64 and est.error_bar > 0


def test_sup_norm_refinement():
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = random_polynomial(rng, 8)
        coarse = sup_norm_estimate(p, grid_size=1024).value
        fine = sup_norm_estimate(p, grid_size=10240).value
        assert abs(fine - coarse) <= 1e-3 * fine
        assert fine - coarse <= sup_norm_estimate(p, grid_size=1024).error_bar


def test_sup_norm_several_variables():
    c = np.zeros((3, 3), dtype=complex)
    c[1, 1] = 1.0
    p = PolynomialSample(c, 2)
    assert sup_norm_estimate(p, "polydisc", grid_size=64).value == pytest.approx(1.0)
    ball = sup_norm_estimate(p, "ball", grid_size=256).value
    assert 0.49 <= ball <= 0.5 + 1e-12


def test_random_polynomial_invariants():
    rng = np.random.default_rng(1)
    for d in (1, 2):
        p = random_polynomial(rng, 5, nvars=d)
        assert np.abs(p.coeffs).max() <= 1
        if d == 2:
            i, j = np.nonzero(p.coeffs)
            assert (i + j).max() <= 5


def test_vn_trivial_cases(bpath):
    for k in range(6):
        assert vn_defect(bpath, poly(*([0] * k + [1]))) <= 1e-12
    big = assemble_shift(custom_weights(build_path_tree(5), lambda u, d: 1.5)).dense()
    assert vn_defect(big, poly(0, 1)) == pytest.approx(0.5)


def test_vn_random_polynomials(bpath):
    rng = np.random.default_rng(2)
    defects = [vn_defect(bpath, random_polynomial(rng, int(rng.integers(0, 9))))
               for _ in range(100)]
    assert max(defects) <= 1e-3


def test_vn_defect_decreases_under_refinement(bpath):
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = random_polynomial(rng, 8)
        assert vn_defect(bpath, p, 1024) <= vn_defect(bpath, p, 64) + 1e-15


def test_matrix_vn(bpath):
    rng = np.random.default_rng(4)
    p = random_polynomial(rng, 6)
    P = [[p.coeffs, np.zeros(7)], [np.zeros(7), p.coeffs]]
    assert matrix_vn_defect(bpath, P).defect == pytest.approx(vn_defect(bpath, p), abs=1e-12)
    assert matrix_vn_defect(bpath, [[p.coeffs]]).defect == pytest.approx(vn_defect(bpath, p),
                                                                          abs=1e-12)
    res = matrix_vn_defect(bpath, [[[1], [0, 1]], [[0], [1]]])
    assert res.defect <= 1e-3
    assert res.grid_sup <= res.inflation_bound + 1e-12


def test_ball_positivity():
    S = assemble_shift(bergman_weights(build_two_ray_tree(6), 2)).dense()
    eig = np.linalg.eigvalsh(np.eye(len(S)) - S.T @ S).min()
    assert ball_positivity_defect([S], 1) == pytest.approx(eig, abs=1e-12)
    Z = np.zeros((4, 4))
    assert ball_positivity_defect([Z, Z], 2) == pytest.approx(1.0)
    assert ball_positivity_defect([0.6 * S, 0.8 * S], 1) >= -1e-12
    with pytest.raises(ValueError):
        ball_positivity_defect([S, S.T], 1)


def test_fejer_examples():
    a = fejer_approximants([0, 1], 10, sup=1.0)
    for n in range(1, 11):
        sig = a.sigma(n)
        assert len(sig) == n + 1 and sig[1] == pytest.approx(n / (n + 1))
        assert sig[0] == 0 and not np.any(sig[2:])
    sups = a.sup_norms()
    assert np.allclose(sups[1:], [n / (n + 1) for n in range(1, 11)])
    c = fejer_approximants([2.5], 5, sup=2.5)
    for n in range(6):
        assert c.sigma(n)[0] == 2.5 and not np.any(c.sigma(n)[1:])


def test_fejer_geometric():
    a = fejer_approximants(geometric_symbol(0.5, 400), 200)
    assert a.phi_sup == pytest.approx(2.0)
    assert a.sup_norms().max() <= a.phi_sup + 1e-9
    err = a.pointwise_errors()
    assert err[-1] < 1e-2 and err[-1] < err[10]


def test_fejer_warns_without_decay():
    with pytest.warns(UserWarning, match="decayed"):
        fejer_approximants(np.ones(50), 20)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=10), st.integers(0, 40))
def test_fejer_bound_property(coeffs, n):
    a = fejer_approximants(coeffs, max(n, len(coeffs)))
    assert a.sup_norms(256).max() <= a.phi_sup + 1e-9 + \
        sup_norm_estimate(PolynomialSample(np.array(coeffs), len(coeffs) - 1),
                          grid_size=256).error_bar


def test_eigenline_polynomial(bpath_kernel):
    S = bpath_kernel.shift.dense()
    r = eigenline_multiplier_recovery(polynomial_of_matrix([1, -0.5, 0.25j], S), bpath_kernel)
    assert r.in_class
    assert np.abs(r.coefficients[:3] - [1, -0.5, 0.25j]).max() < 1e-8
    assert np.abs(r.coefficients[3:]).max() < 1e-8
    assert r.action_residual < 1e-8 and r.sup_bound_slack >= 0


def test_eigenline_identity():
    k = TridiagonalKernel(S2, 0.5, 30)
    r = eigenline_multiplier_recovery(np.eye(k.shift.shape[0]), k)
    assert r.in_class and abs(r.coefficients[0] - 1) < 1e-12
    assert np.abs(r.coefficients[1:]).max() < 1e-12


def test_eigenline_non_scalar_constant_rejected():
    k = TridiagonalKernel(S2, 0.5, 30)
    T = MatrixMultiplier(np.diag([1.0, 2.0]), k.model).operator
    r = eigenline_multiplier_recovery(T, k)
    assert not r.in_class and r.line_defect > 1e-6 and r.coefficients is None


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_g_independence_follows_line_preservation(seed):
    k = TridiagonalKernel(S2, 0.5, 24)
    rng = np.random.default_rng(seed)
    p = random_polynomial(rng, int(rng.integers(0, 13)))
    A = polynomial_of_matrix(p.coeffs, k.shift.dense())
    r = eigenline_multiplier_recovery(A, k, line_tol=1e-8)
    assert r.line_defect <= 1e-8 and r.g_independence <= 1e-6


def test_wot_linear_rate(bpath):
    rng = np.random.default_rng(9)
    f = rng.normal(size=len(bpath))
    h = rng.normal(size=len(bpath))
    rep = wot_convergence_probe(bpath, [0, 1], f, h, n_max=30, sup=1.0)
    base = abs(np.vdot(h, bpath @ f))
    assert np.allclose(rep.residuals, base / (np.arange(31) + 1), rtol=1e-12)
    rep = wot_convergence_probe(bpath, [0.7], f, h, n_max=30, sup=0.7)
    assert np.all(rep.residuals == 0)


def test_wot_geometric(bpath):
    rep = wot_convergence_probe(bpath, geometric_symbol(0.5, 400), n_max=200, seed=0, sup=2.0)
    assert rep.residuals[-1] < 1e-3 and rep.bound_ok
    doc = rep.to_dict()
    assert doc["probe"] == "wot_convergence" and len(doc["residuals"]) == 201


def test_empirical_constant(bpath):
    rng = np.random.default_rng(5)
    samples = [random_polynomial(rng, 4) for _ in range(10)]
    K = empirical_vn_constant(bpath, samples)
    assert 0 < K <= 1 + 1e-3
    assert K >= max(operator_norm(polynomial_of_matrix(p.coeffs, bpath))
                    / sup_norm_estimate(p).value for p in samples) - 1e-15


def test_probe_report_fields():
    doc = json.loads(probe_report("vn_defect", {"a": 2}, [0.1, -0.2], 1024, 7))
    assert doc == {"probe": "vn_defect", "params": {"a": 2}, "values": [0.1, -0.2],
                   "grid_resolution": 1024, "seed": 7}
