"""Commutants of truncated shifts and matrix-valued polynomial multipliers.

A commutant is the null space of ``X -> SX - XS``.  For a general square
matrix this is solved through the Kronecker form (size ``n^2``).  A tree
shift maps generation ``j`` into generation ``j + 1``, so the Sylvester
equation splits by the block offset ``i - j`` of ``X``'s generation blocks; the
graded solver exploits this and handles much larger truncations.  The two
paths agree on every input both can handle.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._numerics import RANK_RTOL, nullspace, operator_norm
from .kernels import FunctionVector, KernelFamily
from .model import ShiftModel
from .shifts import TruncatedShift

DENSE_MAX_DIM = 48


class CommutantError(ValueError):
    pass


def _dense(a) -> np.ndarray:
    return a.toarray() if sp.issparse(a) else np.asarray(a)


def matrix_to_json(a) -> dict:
    """``{"real": rows, "imag": rows}`` in row-major order."""
    a = np.asarray(a, dtype=complex)
    return {"real": a.real.tolist(), "imag": a.imag.tolist()}


@dataclass
class CommutantReport:
    """Basis of ``{S}'`` plus abelianness and irreducibility diagnostics.

    ``basis`` is orthonormal for the Frobenius inner product.
    """

    ambient_dim: int
    basis: list
    method: str
    threshold: float
    ambiguous: bool
    max_defect: float
    abelian: bool | None = None
    max_commutator: float | None = None
    star_commutant_dim: int | None = None
    irreducible: bool | None = None
    witness: dict | None = field(default=None)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def to_dict(self, include_basis: bool = False) -> dict:
        d = {
            "ambient_dim": self.ambient_dim,
            "dimension": self.dim,
            "method": self.method,
            "rank_threshold": self.threshold,
            "ambiguous": self.ambiguous,
            "max_sylvester_defect": self.max_defect,
            "abelian": self.abelian,
            "max_commutator": self.max_commutator,
            "star_commutant_dim": self.star_commutant_dim,
            "irreducible": self.irreducible,
            "witness": self.witness,
        }
        if include_basis:
            d["basis"] = [matrix_to_json(x) for x in self.basis]
        return d

    def to_json(self, include_basis: bool = False) -> str:
        return json.dumps(self.to_dict(include_basis), indent=2, sort_keys=True)


def _kronecker_nullspace(ops, rtol, scale):
    n = ops[0].shape[0]
    eye = np.eye(n)
    rows = []
    for S in ops:
        # vec(SX - XS) = (I kron S - S^T kron I) vec(X), column-major vec
        rows.append(np.kron(eye, S) - np.kron(S.T, eye))
    ns = nullspace(np.vstack(rows), rtol, scale)
    basis = [ns.basis[:, k].reshape(n, n, order="F") for k in range(ns.basis.shape[1])]
    return basis, ns


def _graded_blocks(S, depths):
    """Generation index lists and the sub-diagonal blocks ``S_{p, p-1}``."""
    N = int(depths.max())
    gens = [np.flatnonzero(depths == p) for p in range(N + 1)]
    blocks = {p: S[np.ix_(gens[p], gens[p - 1])] for p in range(1, N + 1)}
    return gens, blocks


def _is_graded(S, depths) -> bool:
    r, c = np.nonzero(S)
    return bool(np.all(depths[r] == depths[c] + 1))


def _graded_nullspace(S, depths, with_adjoint, rtol, scale):
    gens, Sb = _graded_blocks(S, depths)
    N = len(gens) - 1
    n = S.shape[0]
    sizes = [len(g) for g in gens]
    basis = []
    ambiguous = False
    for m in range(-N, N + 1):
        # unknown blocks X_{p,q} with p - q = m
        pairs = [(q + m, q) for q in range(N + 1) if 0 <= q + m <= N]
        offsets, total = {}, 0
        for p, q in pairs:
            offsets[(p, q)] = total
            total += sizes[p] * sizes[q]
        eqs = []

        def place(row_blocks, p, q, mat):
            if (p, q) in offsets:
                row_blocks.append((offsets[(p, q)], mat))

        # S X - X S at block (p, q) with p - q = m + 1
        for q in range(N + 1):
            p = q + m + 1
            if not 0 <= p <= N:
                continue
            terms = []
            if p >= 1:
                place(terms, p - 1, q, np.kron(np.eye(sizes[q]), Sb[p]))
            if q + 1 <= N:
                place(terms, p, q + 1, -np.kron(Sb[q + 1].T, np.eye(sizes[p])))
            eqs.append((sizes[p] * sizes[q], terms))
        if with_adjoint:
            # S* X - X S* at block (p, q) with p - q = m - 1
            for q in range(N + 1):
                p = q + m - 1
                if not 0 <= p <= N:
                    continue
                terms = []
                if p + 1 <= N:
                    place(terms, p + 1, q, np.kron(np.eye(sizes[q]), Sb[p + 1].conj().T))
                if q >= 1:
                    place(terms, p, q - 1,
                          -np.kron(Sb[q].conj(), np.eye(sizes[p])))
                eqs.append((sizes[p] * sizes[q], terms))
        A = np.zeros((sum(e[0] for e in eqs), total), dtype=S.dtype)
        r0 = 0
        for height, terms in eqs:
            for off, mat in terms:
                A[r0:r0 + height, off:off + mat.shape[1]] += mat
            r0 += height
        ns = nullspace(A, rtol, scale)
        ambiguous |= ns.ambiguous
        for k in range(ns.basis.shape[1]):
            x = ns.basis[:, k]
            X = np.zeros((n, n), dtype=np.result_type(S.dtype, x.dtype))
            for (p, q), off in offsets.items():
                blk = x[off:off + sizes[p] * sizes[q]].reshape(sizes[p], sizes[q], order="F")
                X[np.ix_(gens[p], gens[q])] = blk
            basis.append(X)
    return basis, ambiguous


def commutant_basis(S, method: str = "auto", rtol: float = RANK_RTOL,
                    max_dim: int = DENSE_MAX_DIM, with_adjoint: bool = False,
                    depths=None) -> CommutantReport:
    """Orthonormal basis of ``{S}'`` (or ``{S, S*}'`` with ``with_adjoint``).

    ``method`` is ``"kronecker"``, ``"graded"`` or ``"auto"`` (graded when
    ``S`` is a tree shift or ``depths`` are given and compatible).  The dense
    Kronecker route refuses matrices larger than ``max_dim``.
    """
    if isinstance(S, TruncatedShift):
        depths = S.depths if depths is None else depths
        S = S.dense()
    S = _dense(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise CommutantError("commutant needs a square matrix")
    n = S.shape[0]
    scale = max(2 * operator_norm(S), 1.0)
    graded_ok = depths is not None and _is_graded(S, np.asarray(depths))
    if method == "auto":
        method = "graded" if graded_ok else "kronecker"
    if method == "graded":
        if not graded_ok:
            raise CommutantError("graded solver needs a generation-raising matrix")
        basis, ambiguous = _graded_nullspace(S, np.asarray(depths), with_adjoint, rtol, scale)
    elif method == "kronecker":
        if n > max_dim:
            raise CommutantError(f"dense Kronecker solve limited to n <= {max_dim}, got {n}")
        ops = [S, S.conj().T] if with_adjoint else [S]
        basis, ns = _kronecker_nullspace(ops, rtol, scale)
        ambiguous = ns.ambiguous
    else:
        raise CommutantError(f"unknown method {method!r}")
    defect = max((operator_norm(S @ X - X @ S) / np.linalg.norm(X) for X in basis), default=0.0)
    return CommutantReport(n, basis, method, rtol * scale, bool(ambiguous), float(defect))


def max_pairwise_commutator(basis, idx=None) -> float:
    """``max_{i<j} ||[X_i, X_j]||`` compressed to ``idx``."""
    if len(basis) < 2:
        return 0.0
    B = np.stack(basis)
    if idx is not None:
        B = B[:, idx][:, :, idx]
    best = 0.0
    for i in range(len(B)):
        prod1 = np.einsum("ab,kbc->kac", B[i], B[i + 1:])
        prod2 = np.einsum("kab,bc->kac", B[i + 1:], B[i])
        if len(prod1):
            best = max(best, float(np.max(np.linalg.norm(prod1 - prod2, ord=2, axis=(1, 2)))))
    return best


@dataclass
class MatrixMultiplier:
    """``Phi(z) = sum_j coeffs[j] z^j`` acting on the model of a truncated shift."""

    coeffs: np.ndarray
    model: ShiftModel

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.shape[1:] != (self.model.dim, self.model.dim):
            raise CommutantError(f"coefficients must be {self.model.dim}x{self.model.dim}")
        self.coeffs = c

    @classmethod
    def scalar(cls, poly, model: ShiftModel) -> "MatrixMultiplier":
        poly = np.asarray(poly, dtype=complex)
        return cls(poly[:, None, None] * np.eye(model.dim), model)

    @property
    def degree(self) -> int:
        nz = [j for j, C in enumerate(self.coeffs) if np.any(C != 0)]
        return nz[-1] if nz else 0

    def __call__(self, w: complex) -> np.ndarray:
        return np.polynomial.polynomial.polyval(w, self.coeffs)

    @cached_property
    def operator(self) -> np.ndarray:
        return self.model.multiplier_operator(self.coeffs)


def apply_matrix_multiplier(phi: MatrixMultiplier, f: FunctionVector,
                            cap: int | None = None) -> FunctionVector:
    """Taylor coefficients of ``Phi f`` (Cauchy product)."""
    cap = phi.model.N if cap is None else cap
    if phi.degree + f.degree > cap:
        raise CommutantError(f"deg Phi + deg f = {phi.degree + f.degree} exceeds cap {cap}")
    out = np.zeros((phi.degree + f.degree + 1, f.kernel.dim), dtype=complex)
    for j, C in enumerate(phi.coeffs[: phi.degree + 1]):
        for n, c in enumerate(f.coeffs[: f.degree + 1]):
            out[j + n] += C @ c
    return FunctionVector(out, f.kernel)


def commutation_defect(phi: MatrixMultiplier, shift: TruncatedShift | None = None) -> float:
    """``||(M_Phi S - S M_Phi) P||`` with ``P`` the degree-compatible columns."""
    shift = phi.model.shift if shift is None else shift
    S = shift.dense()
    M = phi.operator
    idx = phi.model.compatible_indices(phi.model.multiplier_margin(phi.degree))
    return operator_norm((M @ S - S @ M)[:, idx])


def constant_multiplier_pair(model: ShiftModel, margin: int | None = None) -> dict:
    """Two constant multipliers that commute with ``M_z`` but not with each other.

    ``C1`` is the rank-one projection onto the first frame vector and ``C2``
    swaps the first two frame vectors.  Needs ``dim E >= 2``.
    """
    m = model.dim
    if m < 2:
        raise CommutantError("a non-commuting constant pair needs dim E >= 2")
    C1 = np.zeros((m, m))
    C1[0, 0] = 1.0
    C2 = np.zeros((m, m))
    C2[0, 1] = C2[1, 0] = 1.0
    M1 = MatrixMultiplier(C1, model)
    M2 = MatrixMultiplier(C2, model)
    margin = 2 * model.k_t + 1 if margin is None else margin
    idx = model.compatible_indices(margin)
    A, B = M1.operator, M2.operator
    sub = np.ix_(idx, idx)
    comm = operator_norm((A @ B - B @ A)[sub])
    return {
        "C1": C1,
        "C2": C2,
        "commutator_norm": comm,
        "C1_shift_defect": commutation_defect(M1),
        "C2_shift_defect": commutation_defect(M2),
        "C1_idempotent_defect": operator_norm((A @ A - A)[sub]),
        "C1_selfadjoint_defect": operator_norm((A - A.conj().T)[sub]),
    }


def abelian_and_irreducibility_test(shift: TruncatedShift, margin: int | None = None,
                                    tol: float = 1e-9, model: ShiftModel | None = None
                                    ) -> CommutantReport:
    """Abelianness of ``{S}'`` on the compatible block and dimension of ``{S, S*}'``.

    For ``dim E >= 2`` the report carries a witness pair of constant
    multipliers.  The projection ``C1`` reduces ``M_z`` only if its
    self-adjointness defect vanishes; this is reported, not assumed.
    """
    margin = shift.N // 2 if margin is None else margin
    rep = commutant_basis(shift)
    idx = shift.block(shift.N - margin)
    rep.max_commutator = max_pairwise_commutator(rep.basis, idx)
    rep.abelian = rep.max_commutator <= tol
    star = commutant_basis(shift, with_adjoint=True)
    rep.star_commutant_dim = star.dim
    rep.irreducible = star.dim == 1
    model = ShiftModel(shift) if model is None else model
    if model.dim >= 2:
        w = constant_multiplier_pair(model)
        rep.witness = {k: (matrix_to_json(v) if isinstance(v, np.ndarray) else float(v))
                       for k, v in w.items()}
    return rep


def direct_sum_shift(shift, m: int) -> np.ndarray:
    """``S (+) ... (+) S`` with ``m`` copies."""
    return np.kron(np.eye(m), _dense(shift.matrix if isinstance(shift, TruncatedShift) else shift))


def direct_sum_constants_check(shift, m: int, rtol: float = RANK_RTOL) -> dict:
    """Commutant of ``m`` copies of ``S`` and the residual of ``C kron I`` in it."""
    if isinstance(shift, TruncatedShift):
        depths = np.tile(shift.depths, m)
        base = shift.dense()
    else:
        base = _dense(shift)
        depths = None
    S = np.kron(np.eye(m), base)
    rep = commutant_basis(S, rtol=rtol, depths=depths)
    B = np.stack([x.ravel() for x in rep.basis], axis=1)
    n = base.shape[0]
    worst = 0.0
    for i, j in itertools.product(range(m), repeat=2):
        E = np.zeros((m, m))
        E[i, j] = 1.0
        v = np.kron(E, np.eye(n)).ravel()
        resid = v - B @ (B.conj().T @ v)
        worst = max(worst, float(np.linalg.norm(resid)))
    return {"dimension": rep.dim, "constant_residual": worst,
            "max_sylvester_defect": rep.max_defect}


@dataclass
class RecoveredMultiplier:
    """Estimate of ``Phi`` with ``T = M_Phi``."""

    multiplier: MatrixMultiplier
    grid: list
    values: list
    skipped: list
    operator_norm: float
    sup_phi: float
    sup_ratio: float
    claim_excess: float
    operator_mismatch: float

    @property
    def norm_bound_slack(self) -> float:
        """``||T|| sup ratio - sup ||Phi(w)||`` over the grid."""
        return self.operator_norm * self.sup_ratio - self.sup_phi


def circle_grid(radius: float, count: int) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(count) / count)


def _fit_coefficients(grid, values, degree):
    V = np.vander(np.asarray(grid), degree + 1, increasing=True)
    vals = np.stack(values)
    flat = vals.reshape(len(vals), -1)
    coef, *_ = np.linalg.lstsq(V, flat, rcond=None)
    return coef.reshape((degree + 1,) + vals.shape[1:])


def multiplier_recovery(T, kernel: KernelFamily, grid=None, method: str = "sections",
                        degree: int | None = None, margin: int | None = None,
                        radius: float = 0.7, cond_limit: float = 1e10,
                        commute_tol: float = 1e-8) -> RecoveredMultiplier:
    """Recover ``Phi`` from an operator commuting with the truncated shift.

    ``"sections"`` solves ``T* kappa(., w) g_i = kappa(., w) Phi(w)* g_i`` on
    the rows of depth ``<= N - margin`` for each grid point and fits a matrix
    polynomial of degree ``degree`` (default ``N // 2``).  ``"constants"``
    reads ``Phi`` off ``U T g_i = Phi g_i``.  Grid points where the section
    frame is ill-conditioned are skipped and listed.
    """
    model = kernel.model
    shift = model.shift
    T = _dense(T)
    N = shift.N
    margin = N // 2 if margin is None else margin
    degree = N // 2 if degree is None else degree
    S = shift.dense()
    idx = shift.block(N - margin)
    comm = operator_norm((S @ T - T @ S)[np.ix_(idx, idx)])
    if comm > commute_tol * max(1.0, operator_norm(T)):
        raise CommutantError(f"T does not commute with S on the compatible block ({comm:.2e})")
    if grid is None:
        grid = circle_grid(radius, 2 * (degree + 1))
    grid = list(grid)
    values, used, skipped = [], [], []
    if method == "sections":
        TH = T.conj().T
        for w in grid:
            V = model.sections(w)
            W = (TH @ V)[idx]
            Vr = V[idx]
            if np.linalg.cond(Vr) > cond_limit:
                skipped.append(complex(w))
                continue
            X, *_ = np.linalg.lstsq(Vr, W, rcond=None)
            values.append(X.conj().T)
            used.append(w)
        coeffs = _fit_coefficients(used, values, degree)
    elif method == "constants":
        cols = T @ model.frame
        coeffs = np.stack([model.taylor(cols[:, j]) for j in range(model.dim)], axis=2)
        values = [np.polynomial.polynomial.polyval(w, coeffs) for w in grid]
        used = grid
    else:
        raise CommutantError(f"unknown method {method!r}")
    phi = MatrixMultiplier(coeffs, model)
    tnorm = operator_norm(T)
    sup_phi, sup_ratio, claim = 0.0, 1.0, -math.inf
    for w, P in zip(used, values):
        K = kernel.eval(w, w)
        mu = np.linalg.eigvalsh(0.5 * (K + K.conj().T))
        sup_ratio = max(sup_ratio, mu[-1] / mu[0])
        sup_phi = max(sup_phi, operator_norm(P))
        claim = max(claim, operator_norm(P @ K) / mu[-1] - tnorm)
    M = phi.operator
    mismatch = operator_norm((M - T)[:, idx]) / max(tnorm, 1e-300)
    return RecoveredMultiplier(phi, [complex(w) for w in used], values, skipped, tnorm,
                               sup_phi, sup_ratio, claim, mismatch)
