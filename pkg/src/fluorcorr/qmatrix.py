"""
Dense complex linear algebra used by every Liouvillian computation.

Matrices are plain ``numpy`` complex arrays. Vectorized density matrices use
column stacking, ``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``, which is
what :func:`vec` and :func:`unvec` implement.

Several routines accept an optional ``scale`` vector: a positive diagonal
similarity ``S`` applied as ``S @ m @ inv(S)`` before the decomposition.
Liouvillians with weakly coupled sensors mix entries of order 1 and of order
``epsilon``; removing those powers keeps the eigendecomposition balanced.
Steady states whose entries span many decades are obtained by a refined LU
solve (see :func:`null_vector`). Results are always returned in the original
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DefectiveMatrix, KernelDimensionError, NegativeDelay, NonConvergence, SingularShift

#: Kernel threshold relative to the spectral radius.
TOL_ZERO = 1e-10
#: Largest eigenvector condition number accepted by :func:`eig`.
MAX_CONDITION = 1e12


def kron(*factors: np.ndarray) -> np.ndarray:
    """Tensor product of any number of matrices, left factor outermost."""
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix into a vector."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[0])))
    return np.asarray(v).reshape((d, d), order="F")


def is_hermitian(m: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(np.max(np.abs(m)), 1e-300)
    return bool(np.max(np.abs(m - dag(m))) <= rtol * scale)


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


@dataclass(frozen=True)
class EigenSystem:
    """Biorthonormal eigendecomposition ``m = right @ diag(values) @ left``.

    ``right`` holds eigenvectors as columns, ``left`` as rows, with
    ``left @ right == I``.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.values) @ self.left

    def kernel_index(self, tol: float | None = None) -> int:
        """Index of the unique eigenvalue below ``tol`` (relative to the spectral radius)."""
        mags = np.abs(self.values)
        radius = mags.max()
        thresh = (TOL_ZERO if tol is None else tol) * max(radius, 1.0)
        small = np.flatnonzero(mags < thresh)
        if small.size != 1:
            raise KernelDimensionError(
                f"expected a one-dimensional kernel, found {small.size} eigenvalues below {thresh:.3g}"
            )
        return int(small[0])


def _as_scale(scale, n: int) -> np.ndarray | None:
    if scale is None:
        return None
    s = np.asarray(scale, dtype=float)
    if s.shape != (n,) or np.any(s <= 0):
        raise ValueError("scale must be a positive vector matching the matrix dimension")
    return s


def eig(m: np.ndarray, scale=None) -> EigenSystem:
    """Eigendecomposition with left vectors biorthonormalized to the right ones.

    Left vectors come from inverting the right-vector matrix rather than from
    LAPACK's left solve, which does not pair vectors inside degenerate
    subspaces.

    Raises
    ------
    NonConvergence
        If LAPACK fails to reduce the matrix.
    DefectiveMatrix
        If the eigenvector matrix has condition number above ``MAX_CONDITION``.
    """
    m = np.asarray(m, dtype=complex)
    s = _as_scale(scale, m.shape[0])
    work = m if s is None else (s[:, None] * m) / s[None, :]
    try:
        values, right = sla.eig(work)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise NonConvergence(str(exc)) from exc
    cond = np.linalg.cond(right)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise DefectiveMatrix(f"eigenvector condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")
    left = np.linalg.inv(right)
    if s is not None:
        right = right / s[:, None]
        left = left * s[None, :]
    return EigenSystem(values=values, right=right, left=left)


def null_vector(m: np.ndarray, scale=None, tol: float | None = None, normalize=None,
                refine: int = 4) -> np.ndarray:
    """Kernel vector of ``m``.

    The kernel dimension is decided from the eigenvalues of the equilibrated
    matrix. Without ``normalize`` the vector is the smallest right-singular
    vector, of unit norm. With a row ``normalize`` (for a Liouvillian, the
    vectorized identity) one dependent equation is replaced by
    ``normalize @ v == 1``, the bordered system is solved by LU and improved
    by a few steps of iterative refinement. Refinement makes the solve
    componentwise backward stable, so entries many decades below the largest
    keep their relative accuracy. Either way the result must satisfy
    ``|m v| <= 1e-10 |m| |v|``.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    s = _as_scale(scale, n)
    work = m if s is None else (s[:, None] * m) / s[None, :]
    mags = np.abs(np.linalg.eigvals(work))
    thresh = (TOL_ZERO if tol is None else tol) * max(mags.max(), 1.0)
    n_small = int(np.sum(mags < thresh))
    if n_small != 1:
        raise KernelDimensionError(
            f"expected a one-dimensional kernel, found {n_small} eigenvalues below {thresh:.3g}"
        )
    if normalize is None:
        v = np.linalg.svd(work)[2][-1].conj()
        if s is not None:
            v = v / s
    else:
        row = np.asarray(normalize, dtype=complex)
        k = int(np.argmax(np.abs(row)))
        bordered = m.copy()
        bordered[k] = row
        if s is not None:
            bordered = bordered / s[None, :]
        rhs = np.zeros(n, dtype=complex)
        rhs[k] = 1.0
        lu = sla.lu_factor(bordered, check_finite=False)
        v = sla.lu_solve(lu, rhs)
        for _ in range(refine):
            v = v + sla.lu_solve(lu, rhs - bordered @ v)
        if s is not None:
            v = v / s
    if np.linalg.norm(m @ v) > 1e-10 * max(np.linalg.norm(m, 2), 1.0) * np.linalg.norm(v):
        raise KernelDimensionError("kernel vector residual above 1e-10")
    return v


def solve_shifted(m: np.ndarray, z, b: np.ndarray) -> np.ndarray:
    """Solve ``(m - z I) x = b``.

    ``z`` may be a scalar or a 1-D array of shifts; in the latter case the
    solutions are stacked along the first axis.
    """
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    n = m.shape[0]
    shifted = m[None, :, :] - zs[:, None, None] * np.eye(n)[None, :, :]
    cond = np.linalg.cond(shifted)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
        bad = zs[np.argmax(np.where(np.isfinite(cond), cond, np.inf))]
        raise SingularShift(f"shifted matrix is numerically singular at z={bad}")
    x = np.linalg.solve(shifted, np.broadcast_to(b, (zs.size, n))[..., None])[..., 0]
    return x[0] if np.ndim(z) == 0 else x


def propagate(es: EigenSystem, v: np.ndarray, tau) -> np.ndarray:
    """Apply ``exp(m tau)`` to ``v`` through the eigendecomposition.

    ``tau`` may be a scalar (returns a vector) or a 1-D array (returns a
    matrix with one column per delay).
    """
    taus = np.asarray(tau, dtype=float)
    if np.any(taus < 0):
        raise NegativeDelay("propagation is only defined for tau >= 0")
    coeff = es.left @ np.asarray(v, dtype=complex)
    if taus.ndim == 0:
        return es.right @ (np.exp(es.values * float(taus)) * coeff)
    phases = np.exp(np.outer(es.values, taus))
    return es.right @ (phases * coeff[:, None])
