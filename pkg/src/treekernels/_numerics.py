"""Small numerical helpers shared across modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

#: singular values below RANK_RTOL * sigma_max are treated as zero
RANK_RTOL = 1e-10


class SeriesCapError(RuntimeError):
    """The adaptive series cap needed for the requested tolerance is too large."""


@dataclass
class NullSpace:
    basis: np.ndarray
    singular_values: np.ndarray
    threshold: float
    ambiguous: bool


def nullspace(a, rtol: float = RANK_RTOL, scale: float | None = None) -> NullSpace:
    """Orthonormal null-space basis of ``a`` by SVD.

    A singular value ``sigma`` counts as zero when ``sigma <= rtol * scale``
    (``scale`` defaults to the largest singular value).  The result is flagged
    ambiguous when any singular value lies within a factor 10 of that
    threshold.
    """
    a = np.atleast_2d(np.asarray(a.toarray() if sp.issparse(a) else a))
    ncols = a.shape[1]
    if a.shape[0] == 0:
        return NullSpace(np.eye(ncols, dtype=a.dtype), np.zeros(0), 0.0, False)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    if scale is None:
        scale = s[0] if s.size else 0.0
    thr = rtol * scale
    rank = int(np.sum(s > thr))
    ambiguous = bool(np.any((s > thr / 10) & (s < thr * 10)))
    basis = vh[rank:].conj().T
    return NullSpace(basis, s, thr, ambiguous)


def canonical_sign(vectors: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Rescale each column so its first non-negligible entry is real positive."""
    out = np.array(vectors, dtype=complex if np.iscomplexobj(vectors) else float)
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > atol)
        if nz.size:
            phase = col[nz[0]] / abs(col[nz[0]])
            out[:, j] = col / phase
    if np.iscomplexobj(out) and np.allclose(out.imag, 0, atol=atol):
        out = out.real.copy()
    return out


def log_binom(n, k):
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(
        np.asarray(n) - np.asarray(k) + 1.0)


def log_root_coefficient(n, a: int):
    """``log C(n + a - 1, n)``."""
    n = np.asarray(n, dtype=float)
    return gammaln(n + a) - gammaln(n + 1.0) - gammaln(float(a))


def log_branch_coefficient(m: int, n, a: int):
    """``log a_{m,n} = log[(m+n+a)! (m+1)! / ((m+a)! (m+n+1)!)]``."""
    n = np.asarray(n, dtype=float)
    return (gammaln(m + n + a + 1.0) + gammaln(m + 2.0)
            - gammaln(m + a + 1.0) - gammaln(m + n + 2.0))


def log_moment(d: int, n, a: int):
    """``log ||z^n g||^2`` for ``g`` in generation ``d`` of a Bergman-type shift."""
    n = np.asarray(n, dtype=float)
    return (gammaln(d + a + 0.0) + gammaln(d + n + 1.0)
            - gammaln(d + n + a + 0.0) - gammaln(d + 1.0))


def series_cap(logc, r: float, tol: float = 1e-12, max_cap: int = 1_000_000) -> int:
    """Smallest ``n`` such that ``sum_{k>n} c_k r^k <= tol``.

    ``logc`` maps an integer array to ``log c_k``; the coefficient ratios
    ``c_{k+1}/c_k`` must be non-increasing in ``k``, which makes the geometric
    tail estimate ``c_n r^n * rho / (1 - rho)`` an upper bound.
    """
    if r < 0 or r >= 1:
        raise ValueError(f"series radius must lie in [0, 1), got {r}")
    if r == 0:
        return 0
    logr = np.log(r)
    start = 0
    chunk = 256
    while start < max_cap:
        n = np.arange(start, start + chunk, dtype=float)
        lc = logc(n)
        lc1 = logc(n + 1)
        rho = np.exp(lc1 - lc + logr)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_tail = lc1 + (n + 1) * logr - np.log1p(-np.minimum(rho, 1 - 1e-300))
        ok = (rho < 1) & (log_tail <= np.log(tol))
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(n[hit[0]])
        start += chunk
        chunk *= 2
    raise SeriesCapError(f"series at radius {r} needs more than {max_cap} terms")


def sum_series(logc, zeta, tol: float = 1e-12, cap: int | None = None):
    """``sum_n c_n zeta^n`` for positive coefficients given in log form.

    Returns ``(value, cap)``.  ``zeta`` may be complex with ``|zeta| < 1``.
    """
    zeta = complex(zeta)
    r = abs(zeta)
    if cap is None:
        cap = series_cap(logc, r, tol)
    n = np.arange(cap + 1, dtype=float)
    if r == 0:
        return complex(np.exp(logc(np.array([0.0]))[0])), cap
    terms = np.exp(logc(n) + n * np.log(r)) * np.exp(1j * n * np.angle(zeta))
    # sum smallest-first for a little extra accuracy
    return complex(np.sum(terms[::-1])), cap


def operator_norm(a) -> float:
    """Largest singular value (dense)."""
    a = a.toarray() if sp.issparse(a) else np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_part(a):
    return 0.5 * (a + a.conj().T)
