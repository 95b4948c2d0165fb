"""Explicit B(E)-valued kernels on the unit disc and checks of their axioms.

Two families are implemented:

* :class:`BergmanTreeKernel` for the Bergman-type shift ``B_a`` on any tree of
  finite branching index; the kernel is diagonal in the generation-adapted
  basis of ``E``.
* :class:`TridiagonalKernel` for the two-parameter weight system on the
  two-ray tree; the kernel is a 2x2 matrix in the frame ``(x, y/||y||)`` with
  constant-tail coefficients, so every series has a closed form.

Functions live in :class:`FunctionVector`, which stores Taylor coefficients in
frame coordinates.  Each family supplies its own Hilbert-space inner product
(moment norms or orthonormal-basis coordinates), which is independent of the
kernel evaluator.  Both of those routes can also be checked against the
l^2 model in :mod:`treekernels.model`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import linprog

from ._numerics import (
    RANK_RTOL,
    log_branch_coefficient,
    log_moment,
    log_root_coefficient,
    nullspace,
    series_cap,
    sum_series,
)
from .model import ShiftModel
from .shifts import (
    TruncatedShift,
    adjoint_kernel,
    assemble_shift,
    bergman_weights,
    two_parameter_weights,
)
from .tree import DirectedTree, branching_index, build_two_ray_tree

SERIES_TOL = 1e-12


class KernelDomainError(ValueError):
    """A point outside the open unit disc."""


class TruncationBudgetError(ValueError):
    """The truncated section is too far from the true one."""


def _check_disc(*points):
    for p in points:
        if not abs(p) < 1:
            raise KernelDomainError(f"point {p!r} is not in the open unit disc")


@dataclass(eq=False)
class FunctionVector:
    """``f(z) = sum_n z^n coeffs[n]`` with rows in frame coordinates of ``E``."""

    coeffs: np.ndarray
    kernel: "KernelFamily"

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if c.shape[1] != self.kernel.dim:
            raise ValueError(f"coefficient rows must have length {self.kernel.dim}")
        self.coeffs = c

    @classmethod
    def monomial(cls, kernel, n: int, g) -> "FunctionVector":
        c = np.zeros((n + 1, kernel.dim), dtype=complex)
        c[n] = g
        return cls(c, kernel)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(np.any(self.coeffs != 0, axis=1))
        return int(nz[-1]) if nz.size else 0

    def __call__(self, w: complex) -> np.ndarray:
        return np.polynomial.polynomial.polyval(w, self.coeffs)

    def __add__(self, other: "FunctionVector") -> "FunctionVector":
        a, b = _pad(self.coeffs, other.coeffs)
        return FunctionVector(a + b, self.kernel)

    def __mul__(self, c: complex) -> "FunctionVector":
        return FunctionVector(self.coeffs * c, self.kernel)

    __rmul__ = __mul__

    def inner(self, other: "FunctionVector") -> complex:
        return self.kernel.inner(self, other)

    def norm(self) -> float:
        return math.sqrt(max(self.kernel.inner(self, self).real, 0.0))


def _pad(a, b, extra: int = 0):
    n = max(len(a), len(b)) + extra
    out = []
    for c in (a, b):
        p = np.zeros((n, c.shape[1]), dtype=complex)
        p[: len(c)] = c
        out.append(p)
    return out


class KernelFamily:
    """Common interface of the two explicit kernel families."""

    dim: int
    shift: TruncatedShift

    def eval(self, z: complex, w: complex) -> np.ndarray:
        raise NotImplementedError

    def coefficient_blocks(self, w: complex, degree: int) -> np.ndarray:
        """Matrices ``K_n(w)`` with ``kappa(z, w) = sum_n z^n K_n(w)``."""
        raise NotImplementedError

    def inner(self, f: FunctionVector, h: FunctionVector) -> complex:
        raise NotImplementedError

    def tail_bound(self, w: complex, g, depth: int) -> float:
        """Bound on the norm of the part of ``kappa(., w) g`` beyond ``depth``."""
        raise NotImplementedError

    def ratio_bound(self, w: complex) -> float:
        raise NotImplementedError

    def closed_eigenvalues(self, w: complex) -> tuple[float, float]:
        """``(mu_max, mu_min)`` of ``kappa(w, w)`` from scalar formulas."""
        raise NotImplementedError

    @cached_property
    def model(self) -> ShiftModel:
        return ShiftModel(self.shift, self.frame)

    def section(self, w: complex, g, degree: int | None = None) -> FunctionVector:
        """``kappa(., w) g`` truncated at ``degree`` (adaptive by default)."""
        _check_disc(w)
        if degree is None:
            degree = self._default_degree(w)
        blocks = self.coefficient_blocks(w, degree)
        return FunctionVector(blocks @ np.asarray(g, dtype=complex), self)

    def _default_degree(self, w) -> int:
        raise NotImplementedError

    def norm_sq_monomial(self, n: int, g) -> float:
        f = FunctionVector.monomial(self, n, g)
        return self.inner(f, f).real


class BergmanTreeKernel(KernelFamily):
    """Kernel of ``B_a`` on ``tree``.

    ``kappa(z, w) = sum_n C(n+a-1, n) (z conj w)^n P_root
    + sum_{v branching} sum_n a_{d_v, n} (z conj w)^n P_v``.
    """

    def __init__(self, tree: DirectedTree, a: int, tol: float = SERIES_TOL):
        self.tree = tree
        self.a = int(a)
        self.tol = tol
        self.weights = bergman_weights(tree, a)
        self.shift = assemble_shift(self.weights)
        if tree.frontier_depth < branching_index(tree) + 1:
            raise ValueError("truncation depth must exceed the branching index")
        basis = adjoint_kernel(self.shift)
        self.basis = basis
        self.frame = basis.vectors
        self.generations = list(basis.generations)
        self.dim = basis.dim
        self.branching = list(tree.branching_vertices)
        self.m0 = max((tree.depth[v] for v in self.branching), default=None)

    @cached_property
    def projection_blocks(self) -> dict:
        """``{label: P}`` in frame coordinates; ``P_root`` then one per branching vertex."""
        t = self.tree
        n = t.n_vertices
        Q = self.frame
        blocks = {}
        e = np.zeros(n)
        e[0] = 1.0
        blocks["root"] = Q.conj().T @ np.outer(e, e) @ Q
        for v in self.branching:
            kids = [t.index[u] for u in t.chi(v)]
            gamma = np.array([self.weights[u] for u in t.chi(v)])
            gamma /= np.linalg.norm(gamma)
            P = np.zeros((n, n))
            P[np.ix_(kids, kids)] = np.eye(len(kids)) - np.outer(gamma, gamma)
            blocks[v] = Q.conj().T @ P @ Q
        return blocks

    def _log_coefficient(self, label):
        if label == "root":
            return lambda n: log_root_coefficient(n, self.a)
        m = self.tree.depth[label]
        return lambda n: log_branch_coefficient(m, n, self.a)

    def block_series(self, label, zeta: complex, cap: int | None = None):
        """``sum_n c_n zeta^n`` for one block; returns ``(value, cap)``."""
        return sum_series(self._log_coefficient(label), zeta, self.tol, cap)

    def eval(self, z: complex, w: complex) -> np.ndarray:
        _check_disc(z, w)
        zeta = z * np.conj(w)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        cache = {}
        for label, P in self.projection_blocks.items():
            key = "root" if label == "root" else self.tree.depth[label]
            if key not in cache:
                cache[key] = self.block_series(label, zeta)[0]
            out += cache[key] * P
        return out

    def coefficient_blocks(self, w: complex, degree: int) -> np.ndarray:
        n = np.arange(degree + 1)
        wc = np.conj(w) ** n
        out = np.zeros((degree + 1, self.dim, self.dim), dtype=complex)
        for label, P in self.projection_blocks.items():
            c = np.exp(self._log_coefficient(label)(n)) * wc
            out += c[:, None, None] * P
        return out

    def _default_degree(self, w) -> int:
        return series_cap(lambda n: log_root_coefficient(n, self.a), abs(w) ** 2, self.tol)

    @cached_property
    def _log_moments(self):
        return [lambda n, k=k: log_moment(k, n, self.a) for k in self.generations]

    def monomial_norms_sq(self, n_terms: int) -> np.ndarray:
        """``||z^n g_i||^2`` from the closed moment formula, shape ``(n_terms, dim)``."""
        n = np.arange(n_terms, dtype=float)
        return np.column_stack([np.exp(f(n)) for f in self._log_moments])

    def inner(self, f: FunctionVector, h: FunctionVector) -> complex:
        a, b = _pad(f.coeffs, h.coeffs)
        return complex(np.sum(a * b.conj() * self.monomial_norms_sq(len(a))))

    def tail_bound(self, w: complex, g, depth: int) -> float:
        g = np.asarray(g, dtype=complex)
        r = abs(w) ** 2
        total = 0.0
        for i, k in enumerate(self.generations):
            if g[i] == 0:
                continue
            start = depth - k + 1
            logc = self._log_coefficient("root" if k == 0 else self.owner(i))
            cap = series_cap(logc, r, self.tol * 1e-6) if r > 0 else 0
            n = np.arange(start, max(cap, start) + 1, dtype=float)
            total += abs(g[i]) ** 2 * float(np.sum(np.exp(logc(n) + n * np.log(r)))) \
                if r > 0 else 0.0
        return math.sqrt(total)

    def owner(self, i: int):
        return self.basis.owners[i]

    def closed_eigenvalues(self, w: complex) -> tuple[float, float]:
        r = abs(w) ** 2
        mu_max = sum_series(lambda n: log_root_coefficient(n, self.a), r, self.tol)[0].real
        if self.m0 is None:
            return mu_max, mu_max
        m0 = self.m0
        mu_min = sum_series(lambda n: log_branch_coefficient(m0, n, self.a), r,
                            self.tol)[0].real
        return mu_max, mu_min

    def ratio_limit(self) -> float:
        """``lim_n C(n+a-1, n) / a_{m0, n} = (m0+a)! / ((m0+1)! (a-1)!)``."""
        if self.m0 is None:
            return 1.0
        m0, a = self.m0, self.a
        return math.factorial(m0 + a) / (math.factorial(m0 + 1) * math.factorial(a - 1))

    @cached_property
    def n0(self) -> int:
        """Smallest ``n0`` with ``C(n+a-1,n) <= (m0+a)! a_{m0,n}`` for all ``n >= n0``.

        The coefficient ratio increases to :meth:`ratio_limit`, so it is enough
        to scan until the ratio stays below ``(m0+a)!`` through its limit.
        """
        if self.m0 is None:
            return 0
        m0, a = self.m0, self.a
        bound = math.lgamma(m0 + a + 1)
        n = np.arange(0, 4096, dtype=float)
        lr = log_root_coefficient(n, a) - log_branch_coefficient(m0, n, a)
        if math.log(self.ratio_limit()) > bound + 1e-12:
            raise ArithmeticError("coefficient ratio limit exceeds (m0+a)!")
        bad = np.flatnonzero(lr > bound + 1e-12)
        return int(bad[-1] + 1) if bad.size else 0

    def ratio_bound(self, w: complex) -> float:
        """``sum_{n<=n0} C(n+a-1,n)|w|^(2n) + (m0+a)!`` (1 for a scalar kernel)."""
        if self.m0 is None:
            return 1.0
        r = abs(w) ** 2
        n = np.arange(self.n0 + 1, dtype=float)
        head = float(np.sum(np.exp(log_root_coefficient(n, self.a)) * r ** n))
        return head + math.factorial(self.m0 + self.a)


class TridiagonalKernel(KernelFamily):
    """Kernel of the two-parameter shift, in the frame ``(x, y/||y||)``.

    ``x = e_root`` and ``y = s(e_(1,1) - e_(2,1))`` with ``||y|| = s sqrt 2``.
    ``depth`` sets the truncation used for l^2-side comparisons.
    """

    def __init__(self, s: float, t: float, depth: int = 60):
        self.s = float(s)
        self.t = float(t)
        self.weights = two_parameter_weights(s, t, build_two_ray_tree(depth))
        self.shift = assemble_shift(self.weights)
        self.tree = self.shift.tree
        self.dim = 2
        n = self.tree.n_vertices
        idx = self.tree.index
        x = np.zeros(n)
        x[idx[(0, 0)]] = 1.0
        yhat = np.zeros(n)
        yhat[idx[(1, 1)]] = 1 / math.sqrt(2)
        yhat[idx[(2, 1)]] = -1 / math.sqrt(2)
        self.frame = np.column_stack([x, yhat])
        self.generations = [0, 1]
        self.y_norm = self.s * math.sqrt(2)
        self.a = self.alpha(0) * self.y_norm

    def alpha(self, k: int) -> float:
        s2, t2 = self.s ** 2, self.t ** 2
        if k == 0:
            return (1 - 1 / t2) / (4 * s2)
        if k == 1:
            return 1 / (2 * s2)
        if k == 2:
            return (1 + 1 / t2) / (4 * s2)
        return 1 / (2 * s2 * t2)

    def alphas(self, n: int) -> np.ndarray:
        return np.array([self.alpha(k) for k in range(n)])

    def onb_scale(self, k: int) -> tuple[float, float]:
        """``(a_k, b_k)``."""
        a_k = 1.0 if k <= 1 else 1 / self.t
        b_k = 1.0 if k == 0 else 1 / self.t
        return a_k, b_k

    def tails(self, zeta: complex) -> tuple[complex, complex]:
        """``sum_{k>=1} alpha_k zeta^k`` and ``sum_{k>=1} alpha_{k+1} zeta^k``."""
        a1, a2, a3 = self.alpha(1), self.alpha(2), self.alpha(3)
        geo = 1 / (1 - zeta)
        return (a1 * zeta + a2 * zeta ** 2 + a3 * zeta ** 3 * geo,
                a2 * zeta + a3 * zeta ** 2 * geo)

    def eval(self, z: complex, w: complex) -> np.ndarray:
        _check_disc(z, w)
        wc = np.conj(w)
        t1, t2 = self.tails(z * wc)
        return np.array([[1 + t1, self.a * z * z * wc],
                         [self.a * z * wc * wc, 1 + 2 * self.s ** 2 * t2]])

    def eval_series(self, z: complex, w: complex, cap: int) -> np.ndarray:
        """Partial sums through ``(z conj w)^cap`` of the defining series."""
        zeta = z * np.conj(w)
        k = np.arange(1, cap + 1)
        p = zeta ** k
        al = self.alphas(cap + 2)
        t1 = np.sum(al[k] * p)
        t2 = np.sum(al[k + 1] * p)
        wc = np.conj(w)
        return np.array([[1 + t1, self.a * z * z * wc],
                         [self.a * z * wc * wc, 1 + 2 * self.s ** 2 * t2]])

    def coefficient_blocks(self, w: complex, degree: int) -> np.ndarray:
        wc = np.conj(w)
        out = np.zeros((degree + 1, 2, 2), dtype=complex)
        out[0] = np.eye(2)
        for n in range(1, degree + 1):
            out[n, 0, 0] = self.alpha(n) * wc ** n
            out[n, 1, 1] = 2 * self.s ** 2 * self.alpha(n + 1) * wc ** n
        if degree >= 1:
            out[1, 1, 0] = self.a * wc * wc
        if degree >= 2:
            out[2, 0, 1] = self.a * wc
        return out

    def _default_degree(self, w) -> int:
        r = abs(w) ** 2
        if r == 0:
            return 3
        # constant tail: alpha_3 r^n / (1 - r) <= tol
        n = math.log(SERIES_TOL * (1 - r) / max(self.alpha(3), 1.0)) / math.log(r)
        return max(4, int(math.ceil(n)) + 2)

    def onb_coordinates(self, f: FunctionVector) -> tuple[complex, np.ndarray, np.ndarray]:
        """``(c, c_k, d_k)`` of ``f`` in the basis ``{x, a_k z^k p, b_k z^k q}``."""
        coeffs = np.zeros((len(f.coeffs) + 1, 2), dtype=complex)
        coeffs[: len(f.coeffs)] = f.coeffs
        alpha_t = coeffs[:, 0]  # x-components
        beta_t = coeffs[:, 1]  # y/||y|| components
        s = self.s
        n = len(f.coeffs)
        u = s * alpha_t[1: n + 1] + beta_t[:n] / math.sqrt(2)
        v = s * alpha_t[1: n + 1] - beta_t[:n] / math.sqrt(2)
        ab = np.array([self.onb_scale(k) for k in range(n)])
        return coeffs[0, 0], u / ab[:, 0], v / ab[:, 1]

    def from_onb(self, c: complex, ck, dk) -> FunctionVector:
        """Inverse of :meth:`onb_coordinates`."""
        ck = np.asarray(ck, dtype=complex)
        dk = np.asarray(dk, dtype=complex)
        n = len(ck)
        ab = np.array([self.onb_scale(k) for k in range(n)]).reshape(n, 2)
        u, v = ck * ab[:, 0], dk * ab[:, 1]
        coeffs = np.zeros((n + 1, 2), dtype=complex)
        coeffs[0, 0] = c
        coeffs[1:, 0] = (u + v) / (2 * self.s)
        coeffs[:n, 1] = (u - v) / math.sqrt(2)
        return FunctionVector(coeffs, self)

    def inner(self, f: FunctionVector, h: FunctionVector) -> complex:
        a, b = _pad(f.coeffs, h.coeffs)
        cf, uf, vf = self.onb_coordinates(FunctionVector(a, self))
        ch, uh, vh = self.onb_coordinates(FunctionVector(b, self))
        return complex(cf * np.conj(ch) + np.vdot(uh, uf) + np.vdot(vh, vf))

    def tail_bound(self, w: complex, g, depth: int) -> float:
        # ||T'^n x||^2 = alpha_n, ||T'^n yhat||^2 = 2 s^2 alpha_{n+1}; terms of one
        # kind sit at distinct depths and are orthogonal
        g = np.asarray(g, dtype=complex)
        r = abs(w) ** 2
        if r == 0:
            return 0.0
        tx = self._alpha_tail(depth + 1, 0, r)
        ty = 2 * self.s ** 2 * self._alpha_tail(depth, 1, r)
        return abs(g[0]) * math.sqrt(tx) + abs(g[1]) * math.sqrt(ty)

    def _alpha_tail(self, start: int, shift: int, r: float) -> float:
        """``sum_{n >= start} alpha_{n+shift} r^n``."""
        total, n = 0.0, start
        while n + shift < 3:
            total += self.alpha(n + shift) * r ** n
            n += 1
        return total + self.alpha(3) * r ** n / (1 - r)

    def k_values(self, w: complex) -> tuple[float, float]:
        """``(k_1(w, w), k_2(w, w))``."""
        t1, t2 = self.tails(abs(w) ** 2)
        return 1 + t1.real, 1 + 2 * self.s ** 2 * t2.real

    def closed_eigenvalues(self, w: complex) -> tuple[float, float]:
        k1, k2 = self.k_values(w)
        disc = math.sqrt((k1 - k2) ** 2 + 4 * self.a ** 2 * abs(w) ** 6)
        return 0.5 * (k1 + k2 + disc), 0.5 * (k1 + k2 - disc)

    def intermediate_bound(self, w: complex) -> float:
        """``(k1+k2+|k1-k2|+2|a||w|^3) / (k1+k2-|k1-k2|-2|a||w|^3)``."""
        k1, k2 = self.k_values(w)
        off = 2 * abs(self.a) * abs(w) ** 3
        den = k1 + k2 - abs(k1 - k2) - off
        return (k1 + k2 + abs(k1 - k2) + off) / den if den > 0 else math.inf

    def final_bound(self, w: complex, signed: bool = False) -> float:
        """``max{(k1+|a|)/(k2-|a|), (k2+|a|)/(k1-|a|)}``; ``inf`` where undefined.

        ``signed=True`` uses ``a`` itself, which is only valid when ``a >= 0``.
        """
        k1, k2 = self.k_values(w)
        a = self.a if signed else abs(self.a)
        if min(k1, k2) - a <= 0:
            return math.inf
        return max((k1 + a) / (k2 - a), (k2 + a) / (k1 - a))

    def ratio_bound(self, w: complex) -> float:
        return min(self.intermediate_bound(w), self.final_bound(w))


def gram_psd_check(kernel: KernelFamily, points, vectors) -> float:
    """Minimum eigenvalue of ``[<kappa(w_i, w_j) v_j, v_i>]_{ij}``."""
    pts = list(points)
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    n = len(pts)
    G = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            G[i, j] = np.vdot(vecs[i], kernel.eval(pts[i], pts[j]) @ vecs[j])
            G[j, i] = np.conj(G[i, j])
    return float(np.linalg.eigvalsh(G).min())


@dataclass
class ReproducingResult:
    lhs: complex
    rhs: complex
    residual: float


def reproducing_check(kernel: KernelFamily, f: FunctionVector, w: complex, g,
                      degree: int | None = None) -> ReproducingResult:
    """Compare ``<f, kappa(., w) g>_H`` with ``<f(w), g>_E``.

    The left side pairs the section's Taylor blocks with the family's own norm
    data; the right side only evaluates ``f``.  The section is truncated at
    ``degree`` (default: past the degree of ``f``, where truncation is exact
    for both families).
    """
    _check_disc(w)
    g = np.asarray(g, dtype=complex)
    if degree is None:
        degree = f.degree + 2
    if degree < f.degree + 2:
        raise TruncationBudgetError(f"section degree {degree} too small for deg f = {f.degree}")
    sec = kernel.section(w, g, degree)
    lhs = kernel.inner(f, sec)
    rhs = complex(np.vdot(g, f(w)))
    return ReproducingResult(lhs, rhs, abs(lhs - rhs))


@dataclass
class ConditionRatio:
    w: complex
    mu_max: float
    mu_min: float
    ratio: float
    mu_max_closed: float
    mu_min_closed: float
    bound: float

    @property
    def closed_mismatch(self) -> float:
        return max(abs(self.mu_max - self.mu_max_closed) / self.mu_max_closed,
                   abs(self.mu_min - self.mu_min_closed) / self.mu_min_closed)


def condition_ratio(kernel: KernelFamily, w: complex) -> ConditionRatio:
    """Extreme eigenvalues of ``kappa(w, w)``, their closed forms, and the ratio bound."""
    _check_disc(w)
    K = kernel.eval(w, w)
    mu = np.linalg.eigvalsh(0.5 * (K + K.conj().T))
    if mu[0] <= 0:
        raise ArithmeticError(f"kappa(w, w) is not invertible at w={w}")
    mx, mn = kernel.closed_eigenvalues(w)
    return ConditionRatio(complex(w), float(mu[-1]), float(mu[0]), float(mu[-1] / mu[0]),
                          float(mx), float(mn), float(kernel.ratio_bound(w)))


def condition_sweep(kernel: KernelFamily, radii) -> list[ConditionRatio]:
    return [condition_ratio(kernel, float(r)) for r in radii]


SWEEP_COLUMNS = ("|w|", "mu_min", "mu_max", "ratio", "bound")


def sweep_to_csv(rows, path=None) -> str:
    """CSV with columns ``|w|, mu_min, mu_max, ratio, bound`` (frozen order)."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SWEEP_COLUMNS)
    for r in rows:
        wr.writerow([repr(abs(r.w)), repr(r.mu_min), repr(r.mu_max), repr(r.ratio),
                     repr(r.bound)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def sweep_to_json(rows) -> str:
    out = []
    for r in rows:
        d = asdict(r)
        d["w"] = abs(r.w)
        out.append(d)
    return json.dumps(out, indent=2, sort_keys=True, allow_nan=True)


@dataclass
class PolynomialWitness:
    found: bool
    degree: int | None
    coefficients: list | None
    slack: float | None
    violation: float | None


def polynomial_bound_witness(kernel: KernelFamily, grid, max_degree: int = 12,
                             rel_tol: float = 0.1) -> PolynomialWitness:
    """Lowest-degree real polynomial ``p`` with ``ratio(w) <= p(|w|^2)`` on the grid.

    ``grid`` holds values of ``|w|^2``.  For each degree the minimax upper fit
    (smallest ``max(p - ratio)`` subject to ``p >= ratio``) is found by linear
    programming; the first degree whose slack is within ``rel_tol`` of the
    largest ratio is returned.  Failure up to ``max_degree`` is a finding.
    """
    r = np.asarray(grid, dtype=float)
    if r.min() < 0 or r.max() > 0.99:
        raise ValueError("grid values of |w|^2 must lie in [0, 0.99]")
    rho = np.array([condition_ratio(kernel, math.sqrt(x)).ratio for x in r])
    target = rel_tol * rho.max()
    for deg in range(max_degree + 1):
        V = np.vander(r, deg + 1, increasing=True)
        # variables: coefficients, then slack t; minimise t
        c = np.zeros(deg + 2)
        c[-1] = 1.0
        A = np.vstack([np.hstack([-V, np.zeros((len(r), 1))]),
                       np.hstack([V, -np.ones((len(r), 1))])])
        b = np.concatenate([-rho, rho])
        res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * (deg + 1) + [(0, None)],
                      method="highs")
        if not res.success:
            continue
        coef = res.x[:-1]
        p = V @ coef
        slack = float(np.max(p - rho))
        violation = float(np.max(rho - p))
        if slack <= target and violation <= 1e-9 * rho.max():
            return PolynomialWitness(True, deg, coef.tolist(), slack, violation)
    return PolynomialWitness(False, None, None, None, None)


@dataclass
class EigenvectorReport:
    residual: float
    tail_bound: float
    null_dim: int
    dim_E: int
    max_angle: float
    ambiguous: bool


def eigenvector_defect(kernel: KernelFamily, w: complex, g, radius: float = 0.5,
                       tail_budget: float = 1e-8) -> EigenvectorReport:
    """Check that truncated sections are eigenvectors of ``S*`` for ``conj(w)``.

    Rows of depth ``<= N-1`` of ``S* - conj(w)`` act exactly on the truncated
    section, so the residual there measures the construction, not the
    truncation.  The same row block has a null space of dimension
    ``card(generation N)``; it is compared with the span of the sections by
    principal angles.
    """
    _check_disc(w)
    if abs(w) > radius:
        raise TruncationBudgetError(f"|w|={abs(w)} exceeds the configured radius {radius}")
    model = kernel.model
    shift = kernel.shift
    g = np.asarray(g, dtype=complex)
    v = model.section(w, g)
    tail = kernel.tail_bound(w, g, shift.N) / np.linalg.norm(v)
    if tail > tail_budget:
        raise TruncationBudgetError(
            f"truncation tail {tail:.3e} exceeds the budget {tail_budget:.1e} at |w|={abs(w)}")
    rows = shift.interior
    op = (shift.adjoint.toarray() - np.conj(w) * np.eye(shift.shape[0]))[rows]
    residual = float(np.linalg.norm(op @ v) / np.linalg.norm(v))
    ns = nullspace(op, RANK_RTOL)
    secs = model.sections(w)
    angles = subspace_angles(ns.basis, secs) if ns.basis.shape[1] == secs.shape[1] else [np.pi / 2]
    return EigenvectorReport(residual, float(tail), int(ns.basis.shape[1]), kernel.dim,
                             float(np.max(angles)), ns.ambiguous)


def assumption_map(f: FunctionVector, g, h) -> FunctionVector:
    """``f_{g,h}(w) = <f(w), g>_E h``."""
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    scal = f.coeffs @ g.conj()
    return FunctionVector(np.outer(scal, h), f.kernel)


def monomial_ratio_sequence(kernel: KernelFamily, n_terms: int) -> np.ndarray:
    """``max_{j,k} ||z^n g_k||^2 / ||z^n g_j||^2`` for ``n < n_terms``.

    A bounded sequence makes ``f -> f_{g,h}`` bounded on ``H``.
    """
    out = np.empty(n_terms)
    eye = np.eye(kernel.dim)
    for n in range(n_terms):
        norms = [kernel.norm_sq_monomial(n, e) for e in eye]
        out[n] = max(norms) / min(norms)
    return out


def eval_bergman_kernel(kernel: BergmanTreeKernel, z: complex, w: complex) -> np.ndarray:
    return kernel.eval(z, w)


def eval_tridiagonal_kernel(kernel: TridiagonalKernel, z: complex, w: complex) -> np.ndarray:
    return kernel.eval(z, w)
