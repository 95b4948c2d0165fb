"""Weight systems and truncated weighted shifts on rooted directed trees.

The weighted shift acts by ``S e_v = sum_{u in Chi(v)} lambda_u e_u``.  On the
depth-``N`` truncation the frontier columns are zero, and every positivity or
defect diagnostic below is compressed to the interior block so that the
truncation does not masquerade as an operator property.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from ._numerics import RANK_RTOL, canonical_sign, log_moment, nullspace, operator_norm
from .tree import DirectedTree, TreeSpecError, build_two_ray_tree, truncate


class ShiftError(ValueError):
    """Invalid weights or an operation the truncated shift cannot support."""


class CauchyDualError(ShiftError):
    """``S*S`` is not invertible on the requested block."""


@dataclass(frozen=True, eq=False)
class WeightSystem:
    """Positive weights ``lambda_u`` on the non-root vertices of ``tree``.

    ``provenance`` records how the weights were built, e.g. ``("bergman", 2)``
    or ``("two_parameter", s, t)``.
    """

    tree: DirectedTree
    lam: Mapping
    provenance: tuple = ("custom",)

    def __post_init__(self):
        missing = [u for u in self.tree.vertices[1:] if u not in self.lam]
        if missing:
            raise ShiftError(f"missing weights for vertices {missing[:5]}")
        for u in self.tree.vertices[1:]:
            val = self.lam[u]
            if not (np.isfinite(val) and val > 0):
                raise ShiftError(f"weight at {u!r} must be positive, got {val!r}")

    def __getitem__(self, u):
        return self.lam[u]

    def column_sq_norms(self) -> np.ndarray:
        """``sum_{u in Chi(v)} lambda_u^2`` for every vertex (0 on the frontier)."""
        t = self.tree
        return np.array([sum(self.lam[u] ** 2 for u in t.chi(v)) for v in t.vertices])

    def restrict(self, tree: DirectedTree) -> "WeightSystem":
        return WeightSystem(tree, {u: self.lam[u] for u in tree.vertices[1:]}, self.provenance)


def bergman_weights(tree: DirectedTree, a: int) -> WeightSystem:
    """Weights of the Bergman shift ``B_a`` on ``tree``.

    ``lambda_u = sqrt((d_v + 1) / (d_v + a)) / sqrt(card Chi(v))`` for
    ``u in Chi(v)``.
    """
    if isinstance(a, bool) or int(a) != a or a < 2:
        raise ShiftError(f"Bergman parameter a must be an integer >= 2, got {a!r}")
    a = int(a)
    lam = {}
    for v in tree.vertices:
        kids = tree.chi(v)
        if not kids:
            continue
        d = tree.depth[v]
        w = math.sqrt((d + 1) / (d + a)) / math.sqrt(len(kids))
        for u in kids:
            lam[u] = w
    return WeightSystem(tree, lam, ("bergman", a))


def two_parameter_weights(s: float, t: float, tree: DirectedTree | int) -> WeightSystem:
    """Two-parameter weight system on the two-ray tree.

    ``lambda_(1,1) = lambda_(2,1) = s``, ``lambda_(1,2) = lambda_(2,3) = 1``,
    ``lambda_(2,2) = lambda_(1,3) = t`` and all later weights equal 1.
    ``tree`` may be a two-ray tree or its depth.
    """
    if isinstance(tree, int):
        tree = build_two_ray_tree(tree)
    if tree.root != (0, 0) or set(tree.chi(tree.root)) != {(1, 1), (2, 1)}:
        raise ShiftError("two-parameter weights live on the two-ray tree")
    if not (s > 0 and t > 0):
        raise ShiftError(f"s and t must be positive, got s={s}, t={t}")
    if t == 1:
        raise ShiftError("t = 1 is excluded from the two-parameter family")
    special = {(1, 1): s, (2, 1): s, (1, 2): 1.0, (2, 3): 1.0, (2, 2): t, (1, 3): t}
    lam = {u: float(special.get(u, 1.0)) for u in tree.vertices[1:]}
    return WeightSystem(tree, lam, ("two_parameter", float(s), float(t)))


def custom_weights(tree: DirectedTree, weight: Callable | Mapping) -> WeightSystem:
    """Weights from a mapping or from ``weight(u, depth_of_u)``."""
    if callable(weight):
        lam = {u: float(weight(u, tree.depth[u])) for u in tree.vertices[1:]}
    else:
        lam = dict(weight)
    return WeightSystem(tree, lam, ("custom",))


@dataclass(frozen=True, eq=False)
class TruncatedShift:
    """Sparse matrix of the weighted shift on ``span{e_v : d_v <= N}``."""

    weights: WeightSystem
    matrix: sp.csr_matrix
    provenance: tuple = field(default=("shift",))

    @property
    def tree(self) -> DirectedTree:
        return self.weights.tree

    @property
    def N(self) -> int:
        return self.tree.frontier_depth

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def adjoint(self) -> sp.csr_matrix:
        return self.matrix.conj().T.tocsr()

    @cached_property
    def depths(self) -> np.ndarray:
        return np.array(self.tree.depths())

    def block(self, max_depth: int) -> np.ndarray:
        """Indices of vertices with depth ``<= max_depth``."""
        return np.flatnonzero(self.depths <= max_depth)

    @property
    def interior(self) -> np.ndarray:
        return self.block(self.N - 1)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_coo_text(self) -> str:
        """Coordinate-list dump ``row col value`` for debugging."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        lines = [f"# shape {self.shape[0]} {self.shape[1]}"]
        for k in order:
            lines.append(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}")
        return "\n".join(lines) + "\n"


def assemble_shift(weights: WeightSystem, N: int | None = None) -> TruncatedShift:
    """Matrix of the weighted shift truncated at depth ``N``.

    Column ``v`` holds ``lambda_u`` at row ``u`` for each child ``u`` of ``v``;
    frontier columns are zero.
    """
    tree = weights.tree
    if N is None:
        N = tree.frontier_depth
    if N > tree.frontier_depth:
        raise TreeSpecError(f"N={N} exceeds the tree horizon {tree.frontier_depth}")
    if N < tree.frontier_depth:
        tree = truncate(tree, N)
        weights = weights.restrict(tree)
    rows, cols, vals = [], [], []
    idx = tree.index
    for v in tree.vertices:
        for u in tree.chi(v):
            rows.append(idx[u])
            cols.append(idx[v])
            vals.append(weights[u])
    n = tree.n_vertices
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=float)
    return TruncatedShift(weights, mat, weights.provenance)


def contraction_bound(weights: WeightSystem | TruncatedShift) -> float:
    """``sup_v sum_{u in Chi(v)} lambda_u^2`` over non-frontier vertices."""
    if isinstance(weights, TruncatedShift):
        weights = weights.weights
    t = weights.tree
    norms = weights.column_sq_norms()
    interior = [i for i, v in enumerate(t.vertices) if not t.is_frontier(v)]
    return float(norms[interior].max()) if interior else 0.0


@dataclass
class AdjointKernelBasis:
    """Orthonormal basis of ``ker S*``, one generation per vector.

    Attributes
    ----------
    vectors : ndarray, shape (n, dim)
        Basis vectors as columns.
    generations : list of int
        Depth ``k_i`` supporting the ``i``-th vector.
    owners : list
        The vertex whose children support the vector (the root for ``e_root``).
    filtered : int
        Number of kernel vectors discarded because they live on the frontier.
    ambiguous : bool
        True when some singular value sits within a factor 10 of the rank
        threshold.
    """

    vectors: np.ndarray
    generations: list
    owners: list
    filtered: int
    ambiguous: bool
    threshold: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def adjoint_kernel(shift: TruncatedShift, rtol: float = RANK_RTOL) -> AdjointKernelBasis:
    """Generation-adapted orthonormal basis of ``ker S*``.

    ``S*`` maps the children of ``v`` onto ``e_v``, so the kernel splits into
    ``[e_root]`` plus, for each branching vertex ``v``, the orthogonal
    complement of ``Gamma_v = sum_{u in Chi(v)} lambda_u e_u`` inside
    ``l^2(Chi(v))``.  Each piece is computed by an SVD null space.
    """
    tree = shift.tree
    n = tree.n_vertices
    scale = operator_norm(shift.matrix) if n > 1 else 1.0
    vecs, gens, owners = [], [], []
    e_root = np.zeros(n)
    e_root[0] = 1.0
    vecs.append(e_root)
    gens.append(0)
    owners.append(tree.root)
    filtered = 0
    ambiguous = False
    for v in tree.vertices:
        kids = tree.chi(v)
        if len(kids) < 2:
            continue
        gamma = np.array([[shift.weights[u] for u in kids]])
        ns = nullspace(gamma, rtol, scale=scale)
        ambiguous |= ns.ambiguous
        if tree.depth[v] + 1 >= tree.frontier_depth:
            filtered += ns.basis.shape[1]
            continue
        block = canonical_sign(ns.basis)
        for j in range(block.shape[1]):
            col = np.zeros(n)
            col[[tree.index[u] for u in kids]] = block[:, j]
            vecs.append(col)
            gens.append(tree.depth[v] + 1)
            owners.append(v)
    if filtered:
        warnings.warn(f"{filtered} kernel vectors on the frontier were discarded",
                      stacklevel=2)
    return AdjointKernelBasis(np.column_stack(vecs), gens, owners, filtered, ambiguous,
                              RANK_RTOL * scale)


def cauchy_dual(shift: TruncatedShift, interior: bool = True,
                invertibility_tol: float = 1e-12) -> TruncatedShift:
    """Cauchy dual ``S (S*S)^{-1}``.

    For a shift on a tree ``S*S`` is diagonal, so the dual is again a weighted
    shift with weights ``lambda_u / sum_{u' in Chi(v)} lambda_{u'}^2``.  With
    ``interior=True`` the dual is formed on the interior block and its frontier
    columns are zero, matching the truncation convention.  With
    ``interior=False`` the literal truncated matrix is used, which fails as
    soon as a frontier column of ``S`` is zero.
    """
    tree = shift.tree
    col_sq = shift.weights.column_sq_norms()
    check = np.arange(tree.n_vertices) if not interior else shift.interior
    sq = col_sq[check]
    if sq.size and sq.min() <= invertibility_tol:
        bad = int(check[np.argmin(sq)])
        raise CauchyDualError(
            f"S*S is singular: smallest singular value {math.sqrt(max(sq.min(), 0.0)):.3e} "
            f"at vertex {tree.vertices[bad]!r}")
    lam = {}
    for v in tree.vertices:
        kids = tree.chi(v)
        if not kids:
            continue
        c = col_sq[tree.index[v]]
        for u in kids:
            lam[u] = shift.weights[u] / c
    dual_w = WeightSystem(tree, lam, ("cauchy_dual",) + tuple(shift.provenance))
    dual = assemble_shift(dual_w)
    defect = cauchy_identity_defect(shift, dual)
    if defect > 1e-10:
        raise CauchyDualError(f"S'^* S differs from the identity by {defect:.3e}")
    return dual


def cauchy_identity_defect(shift: TruncatedShift, dual: TruncatedShift) -> float:
    """``||(S'^* S - I)||`` on the interior block."""
    idx = shift.interior
    prod = (dual.adjoint @ shift.matrix).toarray()[np.ix_(idx, idx)]
    return operator_norm(prod - np.eye(len(idx)))


def spectral_radius(op) -> float:
    """Largest eigenvalue modulus.

    Triangular input (every truncated tree shift in breadth-first order) is
    read off the diagonal: a dense eigensolver perturbs the eigenvalues of a
    nilpotent ``n x n`` block by roughly ``eps**(1/n)``.
    """
    a = op.toarray() if sp.issparse(op) else np.asarray(op)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShiftError("spectral radius needs a square matrix")
    if a.size == 0:
        return 0.0
    if not np.any(np.triu(a, 1)) or not np.any(np.tril(a, -1)):
        return float(np.max(np.abs(np.diag(a))))
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def hyponormality_defect(shift: TruncatedShift) -> float:
    """Smallest eigenvalue of ``S*S - SS*`` compressed to the interior block.

    A negative value certifies that the shift is not hyponormal.
    """
    s = shift.matrix
    comm = (shift.adjoint @ s - s @ shift.adjoint).toarray()
    idx = shift.interior
    block = comm[np.ix_(idx, idx)]
    return float(np.linalg.eigvalsh(0.5 * (block + block.conj().T)).min())


def concavity_defect(shift: TruncatedShift) -> float:
    """Largest eigenvalue of ``I - 2 T'*T' + T'*^2 T'^2`` for the Cauchy dual.

    ``T'^2`` needs two generations of headroom, so the block is depth
    ``<= N - 2``.  A value ``<= 0`` certifies the inequality.
    """
    dual = cauchy_dual(shift)
    t = dual.matrix
    t2 = t @ t
    op = (sp.identity(t.shape[0]) - 2 * (dual.adjoint @ t)
          + (t2.conj().T @ t2)).toarray()
    idx = shift.block(shift.N - 2)
    if idx.size == 0:
        raise ShiftError("concavity defect needs N >= 2")
    block = op[np.ix_(idx, idx)]
    return float(np.linalg.eigvalsh(0.5 * (block + block.conj().T)).max())


def moment_norm(tree: DirectedTree, a: int, v, n: int, check: bool = True,
                rtol: float = 1e-10) -> float:
    """Closed form of ``||z^n g||^2`` for ``g`` supported in the generation of ``v``.

    The factorial ratio is evaluated with log-gamma.  With ``check=True`` the
    value is compared against ``||B_a^n g||^2`` computed by repeated sparse
    products on the truncation; the comparison is skipped with a warning when
    ``d_v + n`` exceeds the horizon.
    """
    if n < 0:
        raise ShiftError("n must be non-negative")
    d = tree.depth[v]
    value = float(np.exp(log_moment(d, n, a)))
    if not check:
        return value
    if d + n > tree.frontier_depth:
        warnings.warn(f"d_v + n = {d + n} exceeds the horizon {tree.frontier_depth}; "
                      "matrix cross-check skipped", stacklevel=2)
        return value
    measured = moment_norm_by_matrix(assemble_shift(bergman_weights(tree, a)), v, n)
    if abs(measured - value) > rtol * value:
        raise ShiftError(f"moment mismatch at v={v!r}, n={n}: closed form {value!r}, "
                         f"matrix {measured!r}")
    return value


def moment_norm_by_matrix(shift: TruncatedShift, v, n: int, g=None) -> float:
    """``||S^n g||^2`` by repeated application; ``g`` defaults to ``e_v``."""
    tree = shift.tree
    x = np.zeros(tree.n_vertices)
    if g is None:
        x[tree.index[v]] = 1.0
    else:
        gen = tree.generation(tree.depth[v])
        x[[tree.index[u] for u in gen]] = g
        x /= np.linalg.norm(x)
    for _ in range(n):
        x = shift.matrix @ x
    return float(np.vdot(x, x).real)
