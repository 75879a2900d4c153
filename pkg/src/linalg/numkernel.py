"""
Dense real linear-algebra kernel.

Every rank decision, pseudoinverse, norm and modulus in schurkit goes through
the SVD computed here, so all downstream predicates share one notion of
numerical rank.
"""

import logging
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
import numpy.typing as npt
from scipy import linalg  # type: ignore

from src.errors import DecompositionError, NotPositiveSemidefiniteError

Mat: TypeAlias = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

# Relative tolerance applied to reconstruction checks of SVD factors
RECON_TOL = 1e-10


@dataclass(frozen=True)
class RankTolerance:
    """Threshold used to decide which singular values count as nonzero."""

    rel: float = 2.0**-52
    abs_floor: float = 1e-12

    def threshold(self, sigma_max: float, shape: tuple[int, int]) -> float:
        """
        Cutoff below which a singular value is treated as zero.

        Args:
            sigma_max: Largest singular value of the matrix
            shape: Matrix shape

        Returns:
            max(rel * sigma_max * max(rows, cols), abs_floor)
        """
        return max(self.rel * sigma_max * max(shape), self.abs_floor)


DEFAULT_TOL = RankTolerance()


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD factors m = u @ diag(sigma) @ vt."""

    u: Mat
    sigma: npt.NDArray[np.float64]
    vt: Mat

    def reconstruct(self) -> Mat:
        """Multiply the factors back together."""
        return (self.u * self.sigma) @ self.vt

    def cutoff(self, tol: RankTolerance = DEFAULT_TOL) -> int:
        """Number of singular values above the rank threshold."""
        if self.sigma.size == 0:
            return 0
        shape = (self.u.shape[0], self.vt.shape[1])
        thr = tol.threshold(float(self.sigma[0]), shape)
        return int(np.count_nonzero(self.sigma > thr))


def as_mat(values: npt.ArrayLike, name: str = "matrix") -> Mat:
    """
    Convert input to a finite 2-D float64 array.

    Args:
        values: Anything numpy can turn into a 2-D array
        name: Label used in error messages

    Returns:
        A float64 copy of the input

    Raises:
        ValueError: If the array is not 2-D or holds NaN/Inf entries
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def svd(m: Mat, full: bool = False) -> SvdFactors:
    """
    Singular value decomposition backed by LAPACK.

    The divide-and-conquer driver is tried first; if it fails to converge the
    slower but more robust gesvd driver is used.

    Args:
        m: Matrix to factor
        full: Return square u and vt instead of the thin factors

    Returns:
        SvdFactors with non-increasing, non-negative sigma

    Raises:
        DecompositionError: If neither LAPACK driver converges
    """
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        u = np.eye(rows) if full else np.zeros((rows, 0))
        vt = np.eye(cols) if full else np.zeros((0, cols))
        return SvdFactors(u=u, sigma=np.zeros(0), vt=vt)

    try:
        u, s, vt = linalg.svd(m, full_matrices=full, lapack_driver="gesdd")
    except linalg.LinAlgError:
        logger.warning("gesdd did not converge on %dx%d input, retrying with gesvd", rows, cols)
        try:
            u, s, vt = linalg.svd(m, full_matrices=full, lapack_driver="gesvd")
        except linalg.LinAlgError as e:
            raise DecompositionError(f"SVD failed on {rows}x{cols} matrix: {e}") from e

    factors = SvdFactors(u=u, sigma=s, vt=vt)
    if not full:
        err = np.linalg.norm(factors.reconstruct() - m)
        if err > RECON_TOL * (1.0 + np.linalg.norm(m)):
            raise DecompositionError(f"SVD reconstruction error {err:.3e} too large")
    return factors


def rank(m: Mat, tol: RankTolerance = DEFAULT_TOL) -> int:
    """Numerical rank: singular values above tol.threshold."""
    return svd(m).cutoff(tol)


def pinv(m: Mat, tol: RankTolerance = DEFAULT_TOL) -> Mat:
    """
    Moore-Penrose pseudoinverse through the SVD.

    Singular values at or below the rank threshold are zeroed instead of
    inverted.

    Args:
        m: Matrix to invert
        tol: Rank tolerance

    Returns:
        The cols x rows pseudoinverse
    """
    f = svd(m)
    r = f.cutoff(tol)
    if r == 0:
        return np.zeros((m.shape[1], m.shape[0]))
    return (f.vt[:r].T / f.sigma[:r]) @ f.u[:, :r].T


def gamma(m: Mat, tol: RankTolerance = DEFAULT_TOL) -> float:
    """
    Reduced minimum modulus: smallest singular value above the rank threshold.

    Returns float("inf") for the zero operator, the infimum over an empty set.
    """
    f = svd(m)
    r = f.cutoff(tol)
    if r == 0:
        return float("inf")
    return float(f.sigma[r - 1])


def op_norm(m: Mat) -> float:
    """Spectral norm; 0 for empty or zero matrices."""
    if m.size == 0:
        return 0.0
    return float(svd(m).sigma[0])


def truncate(m: Mat, tol: RankTolerance = DEFAULT_TOL) -> Mat:
    """Drop the singular values below the rank threshold."""
    f = svd(m)
    r = f.cutoff(tol)
    return (f.u[:, :r] * f.sigma[:r]) @ f.vt[:r]


def modulus(m: Mat, power: float = 1.0, adjoint: bool = False) -> Mat:
    """
    Fractional power of the operator modulus.

    |m|^p = V diag(sigma^p) V^T and |m*|^p = U diag(sigma^p) U^T, built from
    the SVD so m^T m is never formed. Singular values below the rank
    threshold are set to zero before the power is taken.

    Args:
        m: Operator
        power: Exponent p > 0
        adjoint: Use |m*| = (m m^T)^(1/2) instead of |m| = (m^T m)^(1/2)

    Returns:
        Symmetric positive semidefinite matrix
    """
    f = svd(m, full=True)
    k = f.sigma.size
    scaled = np.zeros(k)
    r = f.cutoff()
    scaled[:r] = f.sigma[:r] ** power
    if adjoint:
        basis = f.u[:, :k]
    else:
        basis = f.vt[:k].T
    return (basis * scaled) @ basis.T


def polar(m: Mat) -> tuple[Mat, Mat]:
    """
    Polar decomposition m = u @ |m|.

    u is the partial isometry U_r V_r^T restricted to the numerical range of
    |m|, so it vanishes on N(m).

    Returns:
        Tuple of (u, modulus)
    """
    f = svd(m)
    r = f.cutoff()
    u = f.u[:, :r] @ f.vt[:r]
    return u, modulus(m)


def sqrt_psd(m: Mat, tol: float = 1e-10) -> Mat:
    """
    Unique positive semidefinite square root.

    Args:
        m: Symmetric positive semidefinite matrix
        tol: Symmetry and negativity tolerance, relative to 1 + ||m||_F

    Returns:
        Symmetric PSD matrix s with s @ s close to m

    Raises:
        NotPositiveSemidefiniteError: If m is not symmetric or has a
            clearly negative eigenvalue
        DecompositionError: If the eigensolver fails
    """
    if m.shape[0] != m.shape[1]:
        raise NotPositiveSemidefiniteError(f"Expected square matrix, got {m.shape}")
    if m.size == 0:
        return np.zeros_like(m)
    scale = 1.0 + float(np.linalg.norm(m))
    if np.linalg.norm(m - m.T) > tol * scale:
        raise NotPositiveSemidefiniteError("Matrix is not symmetric")
    try:
        w, v = linalg.eigh((m + m.T) / 2.0)
    except linalg.LinAlgError as e:
        raise DecompositionError(f"eigh failed: {e}") from e
    if w[0] < -tol * scale:
        raise NotPositiveSemidefiniteError(f"Smallest eigenvalue {w[0]:.3e} is negative")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T
