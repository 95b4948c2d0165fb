"""Von Neumann inequalities and the reflexivity mechanism on truncations.

Sup norms are taken on a boundary grid (maximum principle), operator norms
densely.  The reflexivity probes follow the operator-theoretic route: extract
a scalar symbol from an operator whose adjoint keeps every sampled section
line, then approximate that symbol by Fejer means and watch the matrix
entries converge.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._numerics import operator_norm
from .commutant import circle_grid
from .kernels import KernelFamily
from .shifts import TruncatedShift

DEFAULT_GRID = 1024


def _dense(a) -> np.ndarray:
    if isinstance(a, TruncatedShift):
        a = a.matrix
    return a.toarray() if sp.issparse(a) else np.asarray(a)


@dataclass
class PolynomialSample:
    """Polynomial in ``d`` variables with coefficient array indexed by exponents.

    For ``d = 1`` ``coeffs[k]`` multiplies ``z^k``.  For ``d > 1`` ``coeffs`` has
    shape ``(deg + 1,) * d`` and only total degree ``<= deg`` is populated.
    """

    coeffs: np.ndarray
    degree: int
    seed: int | None = None

    @property
    def nvars(self) -> int:
        return np.asarray(self.coeffs).ndim

    def __call__(self, *z):
        c = np.asarray(self.coeffs)
        if c.ndim == 1:
            return np.polynomial.polynomial.polyval(z[0], c)
        out = 0
        for alpha in zip(*np.nonzero(c)):
            term = c[alpha]
            for zi, ai in zip(z, alpha):
                term = term * zi ** ai
            out = out + term
        return out

    def to_dict(self) -> dict:
        c = np.asarray(self.coeffs, dtype=complex)
        return {"degree": self.degree, "seed": self.seed,
                "real": c.real.tolist(), "imag": c.imag.tolist()}


def random_polynomial(rng: np.random.Generator, degree: int, nvars: int = 1,
                      seed: int | None = None) -> PolynomialSample:
    """Coefficients uniform in the closed unit disc; total degree ``<= degree``."""
    shape = (degree + 1,) * nvars
    r = np.sqrt(rng.uniform(size=shape))
    c = r * np.exp(2j * np.pi * rng.uniform(size=shape))
    if nvars > 1:
        total = sum(np.indices(shape))
        c[total > degree] = 0
    return PolynomialSample(c, degree, seed)


@dataclass
class SupEstimate:
    value: float
    grid_size: int
    error_bar: float
    domain: str


def sup_norm_estimate(p: PolynomialSample, domain: str = "disc",
                      grid_size: int = DEFAULT_GRID, seed: int = 0) -> SupEstimate:
    """``max |p|`` over the distinguished boundary of the domain.

    ``disc``: ``grid_size`` points on the circle.  ``polydisc``: the torus with
    ``grid_size`` points per angle.  ``ball``: ``grid_size ** (d - 1) * 8``
    seeded uniform points on the sphere.  The error bar is Bernstein's bound
    ``deg * max|p| * pi / grid_size`` (a heuristic for the ball).
    """
    d = p.nvars
    if domain == "disc":
        if d != 1:
            raise ValueError("disc sup norm needs a one-variable polynomial")
        z = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
        vals = np.abs(p(z))
    elif domain == "polydisc":
        th = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
        mesh = np.meshgrid(*([th] * d), indexing="ij")
        vals = np.abs(p(*mesh))
    elif domain == "ball":
        rng = np.random.default_rng(seed)
        count = 8 * grid_size ** max(d - 1, 1)
        v = rng.normal(size=(count, d)) + 1j * rng.normal(size=(count, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        vals = np.abs(p(*v.T))
    else:
        raise ValueError(f"unknown domain {domain!r}")
    value = float(np.max(vals))
    return SupEstimate(value, grid_size, p.degree * value * math.pi / grid_size, domain)


def polynomial_of_matrix(coeffs, S) -> np.ndarray:
    """Horner evaluation of ``sum_k coeffs[k] S^k``."""
    S = _dense(S)
    out = np.zeros(S.shape, dtype=complex)
    eye = np.eye(S.shape[0])
    for c in np.asarray(coeffs)[::-1]:
        out = out @ S + c * eye
    return out


def vn_defect(S, p: PolynomialSample, grid_size: int = DEFAULT_GRID) -> float:
    """``||p(S)|| - max_{|z|=1} |p(z)|``."""
    return operator_norm(polynomial_of_matrix(p.coeffs, S)) - \
        sup_norm_estimate(p, "disc", grid_size).value


@dataclass
class MatrixVNResult:
    defect: float
    operator_norm: float
    grid_sup: float
    inflation_bound: float


def matrix_vn_defect(S, P, grid_size: int = DEFAULT_GRID) -> MatrixVNResult:
    """``||(p_ij(S))|| - max_{|z|=1} ||(p_ij(z))||`` for an ``m x m`` polynomial matrix.

    ``P[i][j]`` holds the coefficients of ``p_ij``; ragged lengths are padded.
    ``inflation_bound`` is
    ``m * max_ij sup|p_ij|``, an upper bound for ``grid_sup``.
    """
    m = len(P)
    if m > 4 or any(len(row) != m for row in P):
        raise ValueError("P must be a square m x m polynomial matrix with m <= 4")
    length = max(len(np.atleast_1d(c)) for row in P for c in row)
    padded = np.zeros((m, m, length), dtype=complex)
    for i, j in itertools.product(range(m), repeat=2):
        c = np.atleast_1d(np.asarray(P[i][j], dtype=complex))
        padded[i, j, : len(c)] = c
    P = padded
    S = _dense(S)
    n = S.shape[0]
    big = np.zeros((m * n, m * n), dtype=complex)
    for i, j in itertools.product(range(m), repeat=2):
        big[i * n:(i + 1) * n, j * n:(j + 1) * n] = polynomial_of_matrix(P[i, j], S)
    z = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
    vals = np.zeros((grid_size, m, m), dtype=complex)
    for i, j in itertools.product(range(m), repeat=2):
        vals[:, i, j] = np.polynomial.polynomial.polyval(z, P[i, j])
    grid_sup = float(np.max(np.linalg.norm(vals, ord=2, axis=(1, 2))))
    entry_sup = float(np.max(np.abs(vals)))
    norm = operator_norm(big)
    return MatrixVNResult(norm - grid_sup, norm, grid_sup, m * entry_sup)


def empirical_vn_constant(S, samples) -> float:
    """``max ||p(S)|| / sup |p|`` over ``samples``."""
    return max(operator_norm(polynomial_of_matrix(p.coeffs, S)) / sup_norm_estimate(p).value
               for p in samples)


def ball_positivity_defect(T, k: int, commute_tol: float = 1e-10) -> float:
    """Minimum eigenvalue of ``sum_j (-1)^j C(k,j) sum_{|a|=j} j!/a! T*^a T^a``."""
    T = [_dense(t) for t in T]
    d = len(T)
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in 1..{d}")
    for a, b in itertools.combinations(T, 2):
        if operator_norm(a @ b - b @ a) > commute_tol:
            raise ValueError("the tuple does not commute")
    n = T[0].shape[0]
    total = np.zeros((n, n), dtype=complex)
    for j in range(k + 1):
        inner = np.zeros((n, n), dtype=complex)
        for alpha in itertools.product(range(j + 1), repeat=d):
            if sum(alpha) != j:
                continue
            Ta = np.eye(n, dtype=complex)
            for t, a in zip(T, alpha):
                Ta = Ta @ np.linalg.matrix_power(t, a)
            coef = math.factorial(j) / math.prod(math.factorial(a) for a in alpha)
            inner += coef * Ta.conj().T @ Ta
        total += (-1) ** j * math.comb(k, j) * inner
    return float(np.linalg.eigvalsh(0.5 * (total + total.conj().T)).min())


def fejer_coefficients(c, n: int) -> np.ndarray:
    """Coefficients of the Cesaro mean ``sigma_n`` of ``sum c_k z^k``."""
    c = np.asarray(c, dtype=complex)
    k = np.arange(min(n, len(c) - 1) + 1)
    return c[: len(k)] * (1 - k / (n + 1))


@dataclass
class ApproximantSequence:
    """Fejer means ``sigma_0 .. sigma_{n_max}`` of a Taylor series."""

    coeffs: np.ndarray
    n_max: int
    phi_sup: float
    bound: float = 1.0
    sup_estimated: bool = False

    def sigma(self, n: int) -> np.ndarray:
        return fejer_coefficients(self.coeffs, n)

    def __call__(self, n: int, w):
        return np.polynomial.polynomial.polyval(w, self.sigma(n))

    def phi(self, w):
        return np.polynomial.polynomial.polyval(w, self.coeffs)

    def sup_norms(self, grid_size: int = DEFAULT_GRID) -> np.ndarray:
        """``max_{|z|=1} |sigma_n|`` for every ``n``."""
        z = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
        return np.array([np.max(np.abs(self(n, z))) for n in range(self.n_max + 1)])

    def pointwise_errors(self, radius: float = 0.95, count: int = 64) -> np.ndarray:
        """``max_{|w|<=radius grid} |sigma_n(w) - phi(w)|`` for every ``n``."""
        rr = np.linspace(0, radius, 8)[:, None]
        w = (rr * np.exp(2j * np.pi * np.arange(count) / count)).ravel()
        target = self.phi(w)
        return np.array([np.max(np.abs(self(n, w) - target)) for n in range(self.n_max + 1)])


def fejer_approximants(coeffs, n_max: int, sup: float | None = None,
                       grid_size: int = DEFAULT_GRID) -> ApproximantSequence:
    """Cesaro means of ``phi = sum coeffs[k] z^k`` with bound constant ``M = 1``.

    ``sup`` is ``||phi||_inf``; without it the sup is taken on the boundary grid
    from the given coefficients, with a warning if they have not decayed.
    """
    c = np.zeros(max(len(coeffs), n_max + 1), dtype=complex)
    c[: len(coeffs)] = coeffs
    estimated = sup is None
    if estimated:
        tail = np.abs(c[-max(1, len(c) // 10):]).sum()
        if tail > 1e-12 * max(np.abs(c).sum(), 1e-300):
            warnings.warn("coefficients have not decayed; sup estimated on the grid",
                          stacklevel=2)
        z = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
        sup = float(np.max(np.abs(np.polynomial.polynomial.polyval(z, c))))
    return ApproximantSequence(c, n_max, float(sup), 1.0, estimated)


def geometric_symbol(ratio: complex, n_terms: int) -> np.ndarray:
    """Taylor coefficients of ``1 / (1 - ratio z)``."""
    return ratio ** np.arange(n_terms, dtype=float)


@dataclass
class EigenlineReport:
    in_class: bool
    line_defect: float
    g_independence: float
    coefficients: np.ndarray | None
    grid: list
    values: np.ndarray | None
    sup_phi: float | None
    norm_A: float
    action_residual: float | None
    skipped: list = field(default_factory=list)

    @property
    def sup_bound_slack(self) -> float | None:
        return None if self.sup_phi is None else self.norm_A - self.sup_phi


def eigenline_multiplier_recovery(A, kernel: KernelFamily, grid=None, radius: float = 0.9,
                                  degree: int | None = None, margin: int | None = None,
                                  line_tol: float = 1e-6, indep_tol: float = 1e-6,
                                  test_points=(0.0, 0.3, 0.45j, -0.2 + 0.25j),
                                  test_degree: int = 4) -> EigenlineReport:
    """Extract ``phi`` from ``A* kappa(., w) g = conj(phi(w)) kappa(., w) g``.

    The section lines tested at each grid point are the frame vectors and
    their normalised sum.  Rows of depth ``<= N - margin`` are used, which is
    exact when ``A`` moves depth by at most ``margin``.  If some line is not
    preserved to ``line_tol`` the operator is outside the surrogate class and
    no symbol is fitted.
    """
    model = kernel.model
    shift = model.shift
    N = shift.N
    A = _dense(A)
    margin = N // 2 if margin is None else margin
    degree = N // 2 if degree is None else degree
    if grid is None:
        grid = circle_grid(radius, 2 * (degree + 1))
    idx = shift.block(N - margin)
    AH = A.conj().T
    m = model.dim
    probes = np.hstack([np.eye(m), np.ones((m, 1)) / math.sqrt(m)]) if m > 1 else np.eye(1)
    line_defect, indep = 0.0, 0.0
    values = []
    for w in grid:
        V = model.sections(w) @ probes
        AV = (AH @ V)[idx]
        Vr = V[idx]
        num = np.einsum("ij,ij->j", Vr.conj(), AV)
        den = np.einsum("ij,ij->j", Vr.conj(), Vr).real
        phibar = num / den
        resid = AV - Vr * phibar
        scale = np.maximum(np.linalg.norm(AV, axis=0), np.linalg.norm(Vr, axis=0) * 1e-300)
        line_defect = max(line_defect, float(np.max(np.linalg.norm(resid, axis=0) / scale)))
        phis = np.conj(phibar)
        indep = max(indep, float(np.max(np.abs(phis - phis[0]))))
        values.append(phis[0])
    norm_A = operator_norm(A)
    if line_defect > line_tol or indep > indep_tol:
        return EigenlineReport(False, line_defect, indep, None, list(grid), None, None,
                               norm_A, None)
    values = np.array(values)
    V = np.vander(np.asarray(grid), degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    sup_phi = float(np.max(np.abs(values)))
    # (A f)(w) = phi(w) f(w) on low-degree monomials
    worst = 0.0
    for i in range(m):
        for n in range(test_degree + 1):
            if n + model.generations[i] > N - margin:
                continue
            c = np.zeros((n + 1, m), dtype=complex)
            c[n, i] = 1.0
            xi = model.embed(c)
            taylor = model.taylor(A @ xi)
            for w in test_points:
                lhs = np.polynomial.polynomial.polyval(w, taylor)
                f_w = np.polynomial.polynomial.polyval(w, c)
                phi_w = np.polynomial.polynomial.polyval(w, coef)
                worst = max(worst, float(np.max(np.abs(lhs - phi_w * f_w))))
    return EigenlineReport(True, line_defect, indep, coef, [complex(w) for w in grid], values,
                           sup_phi, norm_A, worst)


@dataclass
class WOTReport:
    residuals: np.ndarray
    sigma_norms: np.ndarray
    phi_sup: float
    bound_ok: bool
    seed: int

    def to_dict(self) -> dict:
        return {"probe": "wot_convergence", "seed": self.seed,
                "residuals": self.residuals.tolist(),
                "sigma_norms": self.sigma_norms.tolist(),
                "phi_sup": self.phi_sup, "bound_ok": self.bound_ok}


def random_unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def wot_convergence_probe(S, coeffs, f=None, h=None, n_max: int = 200, seed: int = 0,
                          sup: float | None = None, K: float = 1.0,
                          tol: float = 1e-9) -> WOTReport:
    """``r_n = |<(sigma_n(S) - phi(S)) f, h>|`` for ``n = 0..n_max``.

    On the truncation ``S^(N+1) = 0``, so ``phi(S)`` is the finite sum of the
    first ``N + 1`` Taylor terms.  Also checks ``||sigma_n(S)|| <= K M ||phi||``
    with ``M = 1`` (Fejer) for every ``n``.
    """
    S = _dense(S)
    n = S.shape[0]
    rng = np.random.default_rng(seed)
    f = random_unit_vector(rng, n) if f is None else np.asarray(f, dtype=complex)
    h = random_unit_vector(rng, n) if h is None else np.asarray(h, dtype=complex)
    approx = fejer_approximants(coeffs, n_max, sup)
    c = approx.coeffs[:n]
    powers = [np.eye(n, dtype=complex)]
    for _ in range(1, len(c)):
        powers.append(powers[-1] @ S)
    k = np.arange(len(c))
    phi_S = sum(ck * P for ck, P in zip(c, powers))
    deriv_S = sum(kk * ck * P for kk, ck, P in zip(k, c, powers))
    res = np.empty(n_max + 1)
    norms = np.empty(n_max + 1)
    for m in range(n_max + 1):
        # sigma_m(S) = sum_{k<=m} (1 - k/(m+1)) c_k S^k
        if m + 1 >= len(c):
            sig = phi_S - deriv_S / (m + 1)
        else:
            w = np.where(k <= m, 1 - k / (m + 1), 0.0)
            sig = sum(wk * ck * P for wk, ck, P in zip(w, c, powers) if wk != 0)
        res[m] = abs(np.vdot(h, (sig - phi_S) @ f))
        norms[m] = operator_norm(sig)
    bound_ok = bool(np.all(norms <= K * approx.bound * approx.phi_sup + tol))
    return WOTReport(res, norms, approx.phi_sup, bound_ok, seed)


def probe_report(probe: str, params: dict, values, grid_resolution: int | None,
                 seed: int | None) -> str:
    """JSON document ``{probe, params, values, grid_resolution, seed}``."""
    vals = np.asarray(values, dtype=float).tolist()
    return json.dumps({"probe": probe, "params": params, "values": vals,
                       "grid_resolution": grid_resolution, "seed": seed},
                      indent=2, sort_keys=True)
