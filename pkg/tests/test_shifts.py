import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from treekernels._numerics import operator_norm
from treekernels.shifts import (
    CauchyDualError,
    ShiftError,
    adjoint_kernel,
    assemble_shift,
    bergman_weights,
    cauchy_dual,
    concavity_defect,
    contraction_bound,
    custom_weights,
    hyponormality_defect,
    moment_norm,
    moment_norm_by_matrix,
    spectral_radius,
    two_parameter_weights,
)
from treekernels.tree import build_from_spec, build_path_tree, build_two_ray_tree

S2 = 1 / math.sqrt(2)


def test_bergman_weight_values():
    p = build_path_tree(6)
    w = bergman_weights(p, 2)
    assert w[p.vertices[1]] == pytest.approx(math.sqrt(0.5), abs=1e-15)
    w3 = bergman_weights(p, 3)
    for d in range(6):
        assert w3[p.vertices[d + 1]] == pytest.approx(math.sqrt((d + 1) / (d + 3)), abs=1e-15)
    t = build_two_ray_tree(4)
    assert bergman_weights(t, 2)[(1, 1)] == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("a", [1, 0, 2.5])
def test_bergman_parameter_rejected(a):
    with pytest.raises(ShiftError):
        bergman_weights(build_path_tree(3), a)


def test_two_parameter_values():
    w = two_parameter_weights(S2, 0.5, 6)
    assert w[(2, 2)] == 0.5 and w[(1, 3)] == 0.5
    assert w[(1, 1)] == w[(2, 1)] == S2
    assert w[(1, 2)] == w[(2, 3)] == 1.0
    assert w[(1, 5)] == 1.0
    with pytest.raises(ShiftError):
        two_parameter_weights(0.5, 1.0, 6)


def test_unit_path_is_jordan_block():
    p = build_path_tree(4)
    S = assemble_shift(custom_weights(p, lambda u, d: 1.0)).dense()
    assert np.array_equal(S, np.eye(5, k=-1))


def test_bergman_path_column_norms():
    p = build_path_tree(30)
    S = assemble_shift(bergman_weights(p, 2)).dense()
    norms = (S ** 2).sum(axis=0)
    assert np.allclose(norms[:-1], [(d + 1) / (d + 2) for d in range(30)], atol=1e-15)
    assert norms[-1] == 0


def test_two_parameter_root_column():
    S = assemble_shift(two_parameter_weights(0.4, 0.3, 5)).dense()
    col = S[:, 0]
    assert np.count_nonzero(col) == 2 and np.allclose(col[col != 0], 0.4)


def test_horizon_enforced():
    with pytest.raises(Exception):
        assemble_shift(bergman_weights(build_path_tree(3), 2), N=4)


def test_contraction_bounds():
    N = 12
    assert contraction_bound(bergman_weights(build_two_ray_tree(N), 2)) == \
        pytest.approx((N) / (N + 1))
    assert contraction_bound(two_parameter_weights(S2, 0.5, 8)) <= 1
    assert contraction_bound(custom_weights(build_path_tree(5), lambda u, d: 1.0)) == 1


def test_contraction_bound_excludes_frontier():
    # the last interior generation sits at depth N - 1
    N = 12
    assert contraction_bound(bergman_weights(build_path_tree(N), 2)) == \
        pytest.approx(N / (N + 1), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([build_path_tree, build_two_ray_tree]))
def test_contraction_bound_is_squared_norm(seed, build):
    # columns of a tree shift are orthogonal, so ||S||^2 is the largest column norm
    rng = np.random.default_rng(seed)
    tree = build(8)
    lam = {u: float(rng.uniform(0.1, 2.0)) for u in tree.vertices[1:]}
    sh = assemble_shift(custom_weights(tree, lam))
    assert contraction_bound(sh) == pytest.approx(operator_norm(sh.dense()) ** 2, rel=1e-12)


def test_adjoint_kernel_examples():
    b = adjoint_kernel(assemble_shift(bergman_weights(build_path_tree(6), 2)))
    assert b.dim == 1 and np.array_equal(b.vectors[:, 0], np.eye(7)[0])
    sh = assemble_shift(two_parameter_weights(S2, 0.5, 6))
    b = adjoint_kernel(sh)
    assert b.dim == 2
    y = b.vectors[:, 1]
    idx = sh.tree.index
    assert abs(abs(y[idx[(1, 1)]]) - S2) < 1e-14
    assert y[idx[(1, 1)]] == pytest.approx(-y[idx[(2, 1)]])
    t3 = build_from_spec({"kind": "generations", "depth": 3, "counts": [[3], [1, 1, 1],
                                                                       [1, 1, 1]]})
    sh3 = assemble_shift(bergman_weights(t3, 2))
    assert adjoint_kernel(sh3).dim == 3 == _brute_dim_E(sh3)


def _brute_dim_E(shift):
    """Kernel of the adjoint restricted to vectors supported below the frontier."""
    idx = shift.interior
    A = shift.adjoint.toarray()[:, idx]
    return null_space(A, rcond=1e-10).shape[1]


@st.composite
def small_trees(draw):
    depth = draw(st.integers(2, 5))
    rows, width = [], 1
    for _ in range(depth):
        row = [draw(st.integers(1, 3)) for _ in range(width)]
        rows.append(row)
        width = sum(row)
        if width > 12:
            break
    return build_from_spec({"kind": "generations", "depth": len(rows), "counts": rows})


@settings(max_examples=50, deadline=None)
@given(small_trees(), st.integers(2, 5))
def test_dim_E_formula_matches_brute_force(tree, a):
    if tree.n_vertices > 40:
        return
    sh = assemble_shift(bergman_weights(tree, a))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        basis = adjoint_kernel(sh)
    formula = 1 + sum(len(tree.chi(v)) - 1 for v in tree.branching_vertices
                      if tree.depth[v] + 1 < tree.frontier_depth)
    assert basis.dim == formula == _brute_dim_E(sh)
    V = basis.vectors
    assert np.allclose(V.T @ V, np.eye(basis.dim), atol=1e-12)
    assert np.abs(sh.adjoint @ V).max() <= 1e-10
    for j, k in enumerate(basis.generations):
        support = np.nonzero(np.abs(V[:, j]) > 0)[0]
        assert {tree.depth[tree.vertices[i]] for i in support} == {k}


def test_frontier_kernel_vectors_filtered():
    t = build_from_spec({"kind": "generations", "depth": 2, "counts": [[1], [2]]})
    with pytest.warns(UserWarning):
        b = adjoint_kernel(assemble_shift(bergman_weights(t, 2)))
    assert b.dim == 1 and b.filtered == 1


def test_cauchy_dual_isometry_and_bergman():
    p = build_path_tree(8)
    S = assemble_shift(custom_weights(p, lambda u, d: 1.0))
    D = cauchy_dual(S)
    assert np.allclose(D.dense(), S.dense())
    B = assemble_shift(bergman_weights(build_path_tree(20), 2))
    D = cauchy_dual(B).dense()
    # the dual weight into depth d+1 is lambda / lambda^2 = sqrt((d+2)/(d+1))
    sub = np.diag(D, -1)
    expected = [math.sqrt((d + 2) / (d + 1)) for d in range(20)]
    assert np.allclose(sub, expected, atol=1e-14)


def test_cauchy_dual_literal_truncation_fails():
    B = assemble_shift(bergman_weights(build_path_tree(5), 2))
    with pytest.raises(CauchyDualError, match="smallest singular value"):
        cauchy_dual(B, interior=False)


def test_spectral_radius():
    B = assemble_shift(bergman_weights(build_two_ray_tree(10), 2))
    assert spectral_radius(B.matrix) == 0
    assert spectral_radius(np.eye(4)) == 1
    assert spectral_radius(cauchy_dual(B).matrix) == 0
    R = np.array([[0.0, 2.0], [-2.0, 0.0]])
    assert spectral_radius(R) == pytest.approx(2.0)


def test_hyponormality_examples():
    unit = assemble_shift(custom_weights(build_path_tree(10), lambda u, d: 1.0))
    assert hyponormality_defect(unit) >= -1e-12
    assert hyponormality_defect(assemble_shift(two_parameter_weights(S2, 0.5, 10))) < 0
    assert hyponormality_defect(assemble_shift(bergman_weights(build_path_tree(30), 2))) \
        >= -1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, S2), st.floats(0.05, 0.95))
def test_two_parameter_never_hyponormal(s, t):
    assert hyponormality_defect(assemble_shift(two_parameter_weights(s, t, 8))) < 0


@settings(max_examples=20, deadline=None)
@given(small_trees(), st.integers(2, 5))
def test_bergman_hyponormal_on_interior(tree, a):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert hyponormality_defect(assemble_shift(bergman_weights(tree, a))) >= -1e-10


def test_concavity_examples():
    unit = assemble_shift(custom_weights(build_path_tree(8), lambda u, d: 1.0))
    assert abs(concavity_defect(unit)) < 1e-14
    assert concavity_defect(assemble_shift(bergman_weights(build_path_tree(30), 2))) <= 1e-10
    inflated = assemble_shift(custom_weights(build_path_tree(8), lambda u, d: 2.0 ** d))
    assert concavity_defect(inflated) > 0


def test_moment_examples():
    p = build_path_tree(10)
    assert moment_norm(p, 2, p.root, 3) == pytest.approx(0.25, rel=1e-14)
    assert moment_norm(p, 2, p.root, 0) == pytest.approx(1.0, rel=1e-14)
    t = build_two_ray_tree(10)
    # d_v = 1, a = 2, n = 2: (2! 3!) / (4! 1!)
    sh = assemble_shift(bergman_weights(t, 2))
    by_matrix = moment_norm_by_matrix(sh, (1, 1), 2)
    assert by_matrix == pytest.approx(0.5, rel=1e-14)
    assert moment_norm(t, 2, (1, 1), 2) == pytest.approx(by_matrix, rel=1e-12)


def test_moment_beyond_horizon_warns():
    p = build_path_tree(4)
    with pytest.warns(UserWarning, match="horizon"):
        v = moment_norm(p, 2, p.root, 10)
    assert v == pytest.approx(1 / 11)  # (1! 10!) / (11! 0!)


def test_moment_large_arguments_finite():
    p = build_path_tree(2)
    v = moment_norm(p, 5, p.root, 3000, check=False)
    assert 0 < v < 1 and math.isfinite(v)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 3), st.integers(0, 20))
def test_moment_matches_matrix(a, d, n):
    t = build_from_spec({"kind": "generations", "depth": 24,
                         "counts": [[2]] + [[1, 1]] * 23})
    v = t.generation(d)[-1]
    sh = assemble_shift(bergman_weights(t, a))
    closed = moment_norm(t, a, v, n, check=False)
    assert moment_norm_by_matrix(sh, v, n) == pytest.approx(closed, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(small_trees(), st.integers(2, 5))
def test_contraction_criterion_implies_norm_bound(tree, a):
    w = bergman_weights(tree, a)
    if contraction_bound(w) <= 1:
        assert operator_norm(assemble_shift(w).matrix) <= 1 + 1e-12


def test_cauchy_identity_on_interior():
    sh = assemble_shift(two_parameter_weights(0.6, 0.3, 12))
    D = cauchy_dual(sh)
    idx = sh.interior
    prod = (D.adjoint @ sh.matrix).toarray()[np.ix_(idx, idx)]
    assert np.abs(prod - np.eye(len(idx))).max() <= 1e-10


def test_coo_export():
    sh = assemble_shift(bergman_weights(build_path_tree(2), 2))
    lines = sh.to_coo_text().splitlines()
    assert lines[0] == "# shape 3 3"
    assert lines[1].split()[:2] == ["1", "0"]
    assert float(lines[1].split()[2]) == math.sqrt(0.5)
    assert all(len(line.split()) == 3 for line in lines[1:])
