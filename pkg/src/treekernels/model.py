"""Function-space picture of a truncated tree shift, computed in l^2 coordinates.

With ``L = T'*`` the left inverse of ``S`` and ``P_E`` the projection onto
``E = ker S*``, the unitary ``U`` sends ``xi`` to the ``E``-valued power series
``sum_m z^m P_E L^m xi``.  Under ``U``:

* ``S^n g`` (``g`` in ``E``) is the monomial ``z^n g``;
* the kernel section ``kappa(., w) g`` is ``sum_n conj(w)^n T'^n g``;
* ``kappa(z, w)`` has entries ``<K_w g_j, K_z g_i>``;
* a polynomial multiplier ``Phi(z) = sum_j C_j z^j`` acts as
  ``sum_j sum_m S^(m+j) Q C_j Q^H L^m``.

On the depth-``N`` truncation all of these are exact for vectors supported
far enough from the frontier; ``compatible_indices`` picks those rows.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .shifts import TruncatedShift, adjoint_kernel, cauchy_dual
from .tree import branching_index


class ModelError(ValueError):
    pass


class ShiftModel:
    """Analytic model of a truncated shift.

    Parameters
    ----------
    shift : TruncatedShift
    frame : ndarray, optional
        Orthonormal columns spanning ``ker S*``; defaults to the
        generation-adapted basis from :func:`adjoint_kernel`.
    """

    def __init__(self, shift: TruncatedShift, frame: np.ndarray | None = None):
        tree = shift.tree
        k_t = branching_index(tree)
        if shift.N < k_t + 1:
            raise ModelError(f"N={shift.N} must exceed the branching index {k_t}")
        self.shift = shift
        self.k_t = k_t
        self.dual = cauchy_dual(shift)
        basis = adjoint_kernel(shift)
        self.frame = basis.vectors if frame is None else np.asarray(frame)
        if frame is None:
            self.generations = list(basis.generations)
        else:
            d = shift.depths
            self.generations = [int(d[np.abs(c) > 1e-14].max()) for c in self.frame.T]
        if self.frame.shape[1] != basis.dim:
            raise ModelError(f"frame has {self.frame.shape[1]} columns, dim E = {basis.dim}")

    @property
    def N(self) -> int:
        return self.shift.N

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @cached_property
    def _S(self):
        return self.shift.matrix

    @cached_property
    def _L(self):
        return self.dual.adjoint

    @cached_property
    def _T(self):
        return self.dual.matrix

    def compatible_indices(self, margin: int) -> np.ndarray:
        """Vertices of depth ``<= N - margin``."""
        return self.shift.block(self.N - margin)

    def multiplier_margin(self, degree: int) -> int:
        """Depth margin on which ``S`` and ``M_Phi`` compose without truncation loss.

        ``M_Phi`` moves depth by between ``-k_T`` and ``deg Phi + k_T``.
        """
        return degree + self.k_t + 1

    def section(self, w: complex, g) -> np.ndarray:
        """l^2 coordinates of ``kappa(., w) g`` for ``g`` given in frame coordinates."""
        v = self.frame @ np.asarray(g, dtype=complex)
        acc = v.copy()
        wc = np.conj(w)
        for _ in range(self.N):
            v = wc * (self._T @ v)
            if not np.any(v):
                break
            acc += v
        return acc

    def sections(self, w: complex) -> np.ndarray:
        """Columns ``kappa(., w) g_i`` for every frame vector."""
        return np.column_stack([self.section(w, e) for e in np.eye(self.dim)])

    def kernel(self, z: complex, w: complex) -> np.ndarray:
        """``kappa(z, w)`` in frame coordinates from inner products of sections.

        Contributions from beyond the horizon are missing, so the error is of
        order ``|z w|^(N - max k_i)``.
        """
        kz = self.sections(z)
        kw = kz if z == w else self.sections(w)
        return kz.conj().T @ kw

    def taylor(self, xi, n_terms: int | None = None) -> np.ndarray:
        """Taylor coefficients ``Q^H L^m xi`` as rows, ``m = 0..n_terms-1``."""
        n_terms = self.N + 1 if n_terms is None else n_terms
        xi = np.asarray(xi, dtype=complex)
        out = np.zeros((n_terms, self.dim), dtype=complex)
        for m in range(n_terms):
            out[m] = self.frame.conj().T @ xi
            xi = self._L @ xi
        return out

    def embed(self, coeffs) -> np.ndarray:
        """l^2 vector of ``sum_m z^m c_m`` (rows ``c_m`` in frame coordinates)."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
        for m, row in enumerate(coeffs):
            for i, c in enumerate(row):
                if c != 0 and m + self.generations[i] > self.N:
                    raise ModelError(f"z^{m} g_{i} lies beyond the horizon N={self.N}")
        xi = np.zeros(self.frame.shape[0], dtype=complex)
        for row in coeffs[::-1]:
            xi = self._S @ xi + self.frame @ row
        return xi

    def evaluate(self, xi, z: complex) -> np.ndarray:
        """``(U xi)(z)`` in frame coordinates."""
        c = self.taylor(xi)
        return np.polynomial.polynomial.polyval(z, c)

    def multiplier_operator(self, coeffs) -> np.ndarray:
        """Compression of ``M_Phi`` to the truncation, ``Phi = sum_j C_j z^j``.

        ``coeffs`` has shape ``(deg + 1, dim, dim)``.
        """
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 2:
            coeffs = coeffs[None]
        Q = self.frame
        S = self._S
        B = np.zeros((Q.shape[0], Q.shape[0]), dtype=complex)
        for C in coeffs[::-1]:
            B = S @ B + Q @ C @ Q.conj().T
        M = B.copy()
        L = self._L
        for _ in range(self.N):
            M = B + S @ (L.T @ M.T).T
        return M
