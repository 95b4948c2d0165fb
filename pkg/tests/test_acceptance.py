"""Quantitative acceptance checks, one PASS/FAIL line per criterion.

Each test calls the ``verdict`` fixture, which prints the line, collects it for
the terminal summary and asserts it.
"""
import math
import os

import numpy as np
import pytest

from treekernels import cli
from treekernels.commutant import abelian_and_irreducibility_test
from treekernels.kernels import (
    BergmanTreeKernel,
    FunctionVector,
    TridiagonalKernel,
    condition_ratio,
    eigenvector_defect,
    eval_bergman_kernel,
    gram_psd_check,
    reproducing_check,
)
from treekernels.shifts import (
    assemble_shift,
    bergman_weights,
    contraction_bound,
    hyponormality_defect,
    moment_norm,
    moment_norm_by_matrix,
    two_parameter_weights,
)
from treekernels.tree import build_from_spec, build_path_tree, build_two_ray_tree
from treekernels.vonneumann import (
    eigenline_multiplier_recovery,
    fejer_approximants,
    geometric_symbol,
    matrix_vn_defect,
    polynomial_of_matrix,
    random_polynomial,
    vn_defect,
    wot_convergence_probe,
)

N = 60
S_MAX = 1 / math.sqrt(2)
EPS = np.finfo(float).eps


def _random_disc(rng, count, radius):
    r = np.sqrt(rng.uniform(0, radius ** 2, count))
    return r * np.exp(2j * np.pi * rng.uniform(size=count))


def _unit(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="module")
def families():
    return {
        "bergman-path-a2": BergmanTreeKernel(build_path_tree(N), 2),
        "bergman-two-ray-a2": BergmanTreeKernel(build_two_ray_tree(N), 2),
        "bergman-two-ray-a3": BergmanTreeKernel(build_two_ray_tree(N), 3),
        "tridiagonal-s0.707-t0.5": TridiagonalKernel(S_MAX, 0.5, N),
    }


def test_c01_path_kernel_closed_form(verdict, families):
    K = families["bergman-path-a2"]
    radii = np.linspace(0, 0.9, 15)
    pts = radii * np.exp(2j * np.pi * 0.618033988749895 * np.arange(15))
    worst = max(abs(eval_bergman_kernel(K, z, w)[0, 0] - 1 / (1 - z * np.conj(w)) ** 2)
                for z in pts for w in pts)
    verdict("1", "path kernel vs 1/(1-z conj w)^2 on 15x15 grid", worst <= 1e-9,
            f"max abs error {worst:.2e} <= 1e-9")


def test_c02_moment_consistency(verdict):
    width5 = [[1] * 5] * 21
    trees = [build_path_tree(24), build_two_ray_tree(24),
             build_from_spec({"kind": "generations", "depth": 24,
                              "counts": [[2], [1, 3], [2, 1, 1, 1]] + width5})]
    worst = 0.0
    for a in (2, 3, 4, 5):
        for tree in trees:
            sh = assemble_shift(bergman_weights(tree, a))
            for v in tree.vertices:
                if tree.depth[v] > 3:
                    continue
                for n in range(21):
                    closed = moment_norm(tree, a, v, n, check=False)
                    measured = moment_norm_by_matrix(sh, v, n)
                    worst = max(worst, abs(closed - measured) / closed)
    verdict("2", "moment closed form vs ||S^n e_v||^2, a<=5, d_v<=3, n<=20", worst <= 1e-10,
            f"max rel error {worst:.2e} <= 1e-10")


def test_c03_gram_positivity(verdict, families):
    rng = np.random.default_rng(3)
    worst = math.inf
    for K in families.values():
        pts = _random_disc(rng, 50, 0.95)
        vecs = [_unit(rng, K.dim) for _ in range(50)]
        worst = min(worst, gram_psd_check(K, pts, vecs))
    verdict("3", "Gram matrices of 50 random pairs, both families", worst >= -1e-10,
            f"min eigenvalue {worst:.2e} >= -1e-10")


def test_c04_reproducing_property(verdict, families):
    rng = np.random.default_rng(4)
    worst = 0.0
    for K in families.values():
        ws = _random_disc(rng, 10, 0.7)
        for n in range(21):
            for g in np.eye(K.dim):
                f = FunctionVector.monomial(K, n, g)
                for w in ws:
                    for h in np.eye(K.dim):
                        worst = max(worst, reproducing_check(K, f, w, h).residual)
    verdict("4", "reproducing residual, degree<=20, |w|<=0.7, both families", worst < 1e-8,
            f"max residual {worst:.2e} < 1e-8")


RADII = np.append(np.linspace(0, 0.99, 100), 0.99)


def _explicit_bergman_bound(K, w):
    r = abs(w) ** 2
    head = sum(math.comb(n + K.a - 1, n) * r ** n for n in range(K.n0 + 1))
    return head + math.factorial(K.m0 + K.a)


@pytest.mark.parametrize("a", [2, 3])
def test_c05_bergman_condition_ratio(verdict, families, a):
    K = families[f"bergman-two-ray-a{a}"]
    excess = max(condition_ratio(K, r).ratio - _explicit_bergman_bound(K, r) for r in RADII)
    verdict("5", f"two-ray Bergman a={a}: ratio <= explicit bound on |w|<=0.99", excess <= 0,
            f"max(ratio - bound) {excess:.3e} <= 0 (n0={K.n0}, m0={K.m0})")


@pytest.mark.xfail(strict=True, reason="with alpha_0 < 0 the stated max-bound lies below "
                   "the measured ratio; see the decisions ledger")
def test_c05_tridiagonal_literal_bound(verdict, families):
    K = families["tridiagonal-s0.707-t0.5"]
    a = K.a
    excess = -math.inf
    for r in RADII:
        k1, k2 = K.k_values(r)
        bound = max((k1 + a) / (k2 - a), (k2 + a) / (k1 - a))
        excess = max(excess, condition_ratio(K, r).ratio - bound)
    verdict("5", f"tridiagonal: ratio <= max{{(k1+a)/(k2-a),(k2+a)/(k1-a)}}, a={a:+.3f}",
            excess <= 0, f"max(ratio - bound) {excess:.3e} <= 0")


def test_c05_tridiagonal_absolute_forms(verdict, families):
    K = families["tridiagonal-s0.707-t0.5"]
    mid = max(condition_ratio(K, r).ratio - K.intermediate_bound(r) for r in RADII)
    fin = max(condition_ratio(K, r).ratio - K.final_bound(r) for r in RADII)
    defined = sum(math.isfinite(K.final_bound(r)) for r in RADII)
    verdict("5", "tridiagonal: ratio <= eigenvalue bound with |a| (supplementary)",
            mid <= 0 and fin <= 0,
            f"intermediate excess {mid:.3e}, |a| max-bound excess {fin:.3e} "
            f"(finite at {defined}/{len(RADII)} radii)")


def test_c06_eigenvector_structure(verdict, families):
    worst, dims = 0.0, {}
    ws = 0.5 * np.array([0, 0.3, 0.6 + 0.2j, -1j, 1, np.exp(2.5j)])
    for name, K in families.items():
        for w in ws:
            for g in np.eye(K.dim):
                rep = eigenvector_defect(K, w, g)
                worst = max(worst, rep.residual)
                dims.setdefault(name, set()).add((rep.null_dim, rep.dim_E))
    expected = {"bergman-path-a2": {(1, 1)}, "bergman-two-ray-a2": {(2, 2)},
                "bergman-two-ray-a3": {(2, 2)}, "tridiagonal-s0.707-t0.5": {(2, 2)}}
    verdict("6", "sections are S* eigenvectors at N=60, |w|<=0.5; null dim = dim E",
            worst < 1e-6 and dims == expected,
            f"max rel residual {worst:.2e} < 1e-6, (null dim, dim E) {sorted(dims.items())}")


def test_c07_commutant_dichotomy(verdict):
    path = abelian_and_irreducibility_test(assemble_shift(bergman_weights(build_path_tree(N), 2)))
    ray = abelian_and_irreducibility_test(assemble_shift(bergman_weights(build_two_ray_tree(40),
                                                                         2)))
    w = ray.witness
    shift_defect = max(w["C1_shift_defect"], w["C2_shift_defect"])
    ok = (path.max_commutator <= 1e-9 and w["commutator_norm"] > 0.1
          and shift_defect <= 1e-9)
    verdict("7", "path commutant abelian; two-ray constant pair does not commute", ok,
            f"path max commutator {path.max_commutator:.2e} <= 1e-9, two-ray witness "
            f"{w['commutator_norm']:.3f} > 0.1 (pair-shift defect {shift_defect:.1e})")


@pytest.mark.parametrize("name", ["bergman-path-a2", "bergman-two-ray-a2",
                                  "tridiagonal-s0.707-t0.5"])
def test_c08_multiplier_recovery(verdict, families, name):
    K = families[name]
    S = K.shift.dense()
    rng = np.random.default_rng(8)
    coef_err, slack = 0.0, math.inf
    for _ in range(20):
        p = random_polynomial(rng, int(rng.integers(0, N // 2 + 1)))
        r = eigenline_multiplier_recovery(polynomial_of_matrix(p.coeffs, S), K)
        assert r.in_class
        truth = np.zeros(len(r.coefficients), dtype=complex)
        truth[:len(p.coeffs)] = p.coeffs
        coef_err = max(coef_err, float(np.abs(r.coefficients - truth).max()))
        # |phi(w)| <= ||A|| holds exactly; allow the rounding of the two norms
        slack = min(slack, r.sup_bound_slack + 8 * EPS * r.norm_A)
    verdict("8", f"{name}: recover 20 random p of degree <= N/2 from p(S)",
            coef_err < 1e-8 and slack >= 0,
            f"max coefficient error {coef_err:.2e} < 1e-8, min sup-bound slack "
            f"{slack:.2e} >= 0")


def _vn_shifts():
    out = {}
    for a in (2, 3, 4, 5):
        out[f"bergman-path-a{a}"] = assemble_shift(bergman_weights(build_path_tree(N), a))
        out[f"bergman-two-ray-a{a}"] = assemble_shift(bergman_weights(build_two_ray_tree(N), a))
    for s in S_MAX * np.arange(1, 6) / 5:
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            out[f"tridiagonal-s{s:.3f}-t{t}"] = assemble_shift(two_parameter_weights(s, t, N))
    return out


def test_c09_von_neumann(verdict):
    certified = {k: v for k, v in _vn_shifts().items() if contraction_bound(v) <= 1 + 1e-12}
    rng = np.random.default_rng(9)
    scalar, matrix = -math.inf, -math.inf
    for sh in certified.values():
        S = sh.dense()
        for _ in range(100):
            scalar = max(scalar, vn_defect(S, random_polynomial(rng, int(rng.integers(0, 9))),
                                           1024))
    S = certified["bergman-two-ray-a2"].dense()
    for _ in range(20):
        deg = int(rng.integers(0, 9))
        P = [[random_polynomial(rng, deg).coeffs for _ in range(2)] for _ in range(2)]
        matrix = max(matrix, matrix_vn_defect(S, P, 1024).defect)
    verdict("9", f"von Neumann on {len(certified)} contraction-certified shifts",
            len(certified) == 33 and scalar <= 1e-3 and matrix <= 1e-3,
            f"max scalar defect {scalar:.2e} <= 1e-3, max 2x2 defect {matrix:.2e} <= 1e-3")


def test_c10_hyponormality_failure(verdict):
    worst = -math.inf
    for s in S_MAX * np.arange(1, 6) / 5:
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            worst = max(worst, hyponormality_defect(assemble_shift(two_parameter_weights(s, t, N))))
    verdict("10", "min eig of interior S*S - SS* on 5x5 (s,t) grid", worst < -1e-3,
            f"largest min-eigenvalue {worst:.3e} < -1e-3")


PHI = geometric_symbol(0.5, 400)


def test_c11_fejer_bound(verdict):
    approx = fejer_approximants(PHI, 200)
    worst = float(approx.sup_norms(1024).max())
    verdict("11", "Fejer means of 1/(1-z/2): ||sigma_n|| <= ||phi|| for n<=200",
            worst <= approx.phi_sup, f"max ||sigma_n|| {worst:.6f} <= {approx.phi_sup:.6f}")


@pytest.mark.parametrize("name", ["bergman-path-a2", "bergman-two-ray-a2",
                                  "tridiagonal-s0.707-t0.5"])
def test_c11_wot_residual(verdict, families, name):
    rep = wot_convergence_probe(families[name].shift.dense(), PHI, n_max=200, seed=11, sup=2.0)
    r200 = float(rep.residuals[200])
    verdict("11", f"{name}: WOT residual r_200 at N=60", r200 < 1e-3,
            f"r_200 {r200:.2e} < 1e-3")


@pytest.mark.parametrize("suite", sorted(cli.NAMED_SUITES))
def test_c12_determinism(verdict, tmp_path, suite):
    dirs = [tmp_path / "first", tmp_path / "second"]
    codes = [cli.main(["suite", suite, "--seed", "12", "--out", str(d)]) for d in dirs]
    names = [sorted(os.listdir(d)) for d in dirs]
    same = names[0] == names[1] and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names[0])
    verdict("12", f"suite {suite}: two seeded runs", codes == [0, 0] and same,
            f"{len(names[0])} report files byte-identical: {same}, exit codes {codes}")
