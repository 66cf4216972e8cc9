"""Dense real linear algebra with explicit tolerance semantics.

All operators in this package are plain ``numpy.ndarray`` matrices in
orthonormal feature coordinates.  This module supplies the primitives the
rest of the package is built on: symmetric eigendecomposition with a
deterministic ordering and sign convention, a singular-value-thresholded
pseudo-inverse, numerical range-inclusion testing, and the pseudo-inverse
factorization ``Q = pinv(B) @ A`` of one operator through another.

Rank and inclusion decisions are never silent: every cutoff derives from a
:class:`Tolerance` and every range test reports its residual alongside the
boolean verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonFiniteError,
    NonSymmetricError,
    RangeInclusionError,
)

__all__ = [
    "Tolerance",
    "DEFAULT_TOL",
    "RANGE_RTOL_GUARD",
    "SpectralDecomposition",
    "RangeCheck",
    "sym_eig",
    "pinv",
    "range_included",
    "douglas_factor",
    "douglas_residuals",
    "numerical_rank",
]


@dataclass(frozen=True)
class Tolerance:
    """Relative/absolute thresholds used for every rank and residual decision.

    Parameters
    ----------
    rtol : float or None
        Relative threshold (dimensionless).  ``None`` selects the standard
        shape-dependent default ``max(rows, cols) * machine_epsilon``.
    atol : float
        Absolute threshold, used as a floor when the quantities compared may
        legitimately be zero.
    """

    rtol: float | None = None
    atol: float = 1e-12

    def __post_init__(self) -> None:
        if self.rtol is not None and self.rtol < 0:
            raise ValueError("rtol must be >= 0")
        if self.atol < 0:
            raise ValueError("atol must be >= 0")

    def effective_rtol(self, shape: tuple[int, ...]) -> float:
        if self.rtol is not None:
            return self.rtol
        return max(shape) * float(np.finfo(np.float64).eps)


DEFAULT_TOL = Tolerance()

# Default guard factor for range-inclusion verdicts.  The projection
# residual of a genuinely included range has a floating-point floor of
# roughly eps * cond(B) * ||A||, so deciding at max(shape) * eps alone
# misfires for moderately conditioned B; violations sit many orders of
# magnitude above this widened default.  An explicit Tolerance.rtol
# bypasses the guard.
RANGE_RTOL_GUARD = 128.0


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending.

    Column ``j`` of ``eigenvectors`` is paired with ``eigenvalues[j]``.
    The largest-magnitude component of each eigenvector is positive, and
    ties in eigenvalues keep the solver's original (stable) order, so the
    decomposition is a deterministic function of the input bytes.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class RangeCheck:
    """Outcome of a numerical range-inclusion test.

    ``residual`` is the Frobenius norm of the part of ``A`` outside
    ``ran B``; the test passes when it does not exceed ``threshold``.
    Truthiness follows ``included`` so the result can gate control flow
    while still carrying its numerical evidence.
    """

    included: bool
    residual: float
    threshold: float

    def __bool__(self) -> bool:
        return self.included


def _as_matrix(a: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return m


def sym_eig(matrix: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix with deterministic output.

    Parameters
    ----------
    matrix : ndarray
        Square matrix, symmetric within ``tol.atol`` (entrywise).
    tol : Tolerance
        Supplies the symmetry threshold.

    Returns
    -------
    SpectralDecomposition
        Eigenvalues in non-increasing order with orthonormal eigenvectors.
        Equal eigenvalues keep their original relative order (stable sort)
        and each eigenvector is sign-fixed so that its largest-magnitude
        component is positive.

    Raises
    ------
    NonSymmetricError
        If ``abs(M - M.T)`` exceeds ``tol.atol`` anywhere.
    NonFiniteError
        On NaN or Inf entries.
    """
    m = _as_matrix(matrix, "matrix")
    if m.shape[0] != m.shape[1]:
        raise NonSymmetricError(f"matrix must be square, got shape {m.shape}")
    asym = float(np.max(np.abs(m - m.T), initial=0.0))
    if asym > tol.atol:
        raise NonSymmetricError(
            f"matrix is not symmetric: max |M - M.T| = {asym:.3e} > atol = {tol.atol:.3e}"
        )
    sym = 0.5 * (m + m.T)
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    evecs = evecs[:, order]
    for j in range(evecs.shape[1]):
        k = int(np.argmax(np.abs(evecs[:, j])))
        if evecs[k, j] < 0:
            evecs[:, j] = -evecs[:, j]
    return SpectralDecomposition(eigenvalues=evals, eigenvectors=evecs)


def pinv(matrix: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD with relative thresholding.

    Singular values below ``rtol * sigma_max`` are treated as exactly zero,
    with ``rtol`` defaulting to ``max(rows, cols) * eps``.

    Parameters
    ----------
    matrix : ndarray
        Any real matrix with finite entries.
    tol : Tolerance
        Supplies the singular-value cutoff.

    Returns
    -------
    ndarray
        Pseudo-inverse of shape ``(cols, rows)``.
    """
    m = _as_matrix(matrix, "matrix")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    cutoff = tol.effective_rtol(m.shape) * s[0]
    inv = np.where(s < cutoff, 0.0, np.divide(1.0, s, where=s > 0.0))
    return (vt.T * inv) @ u.T


def numerical_rank(matrix: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> int:
    """Number of singular values strictly above ``rtol * sigma_max``."""
    m = _as_matrix(matrix, "matrix")
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.effective_rtol(m.shape) * s[0]))


def range_included(
    a: np.ndarray, b: np.ndarray, tol: Tolerance = DEFAULT_TOL
) -> RangeCheck:
    """Test whether ``ran A`` is numerically contained in ``ran B``.

    The verdict is decided by the projection residual
    ``|| (I - B @ pinv(B)) @ A ||_F`` rather than a rank comparison, which
    keeps it robust for near-degenerate spectra.  The test passes when the
    residual is at most ``rtol * max(||A||_F, atol)``; when no explicit
    ``rtol`` is given, the shape-based default is widened by
    :data:`RANGE_RTOL_GUARD` to stay above the rounding floor of the
    projector itself.

    Parameters
    ----------
    a, b : ndarray
        Matrices with the same number of rows (vectors are treated as
        single columns).
    tol : Tolerance
        Supplies both the projection threshold and the pseudo-inverse
        cutoff used to build the projector onto ``ran B``.

    Returns
    -------
    RangeCheck
        Boolean verdict plus the residual and the threshold it was
        compared against.
    """
    am = _as_matrix(a, "A")
    bm = _as_matrix(b, "B")
    if am.shape[0] != bm.shape[0]:
        raise DimensionMismatchError(
            f"A and B must have equal row counts, got {am.shape[0]} and {bm.shape[0]}"
        )
    projector = bm @ pinv(bm, tol)
    residual = float(np.linalg.norm(am - projector @ am))
    a_norm = float(np.linalg.norm(am))
    if tol.rtol is not None:
        rtol = tol.rtol
    else:
        rtol = RANGE_RTOL_GUARD * tol.effective_rtol(bm.shape)
    threshold = rtol * max(a_norm, tol.atol)
    return RangeCheck(included=residual <= threshold, residual=residual, threshold=threshold)


def douglas_factor(
    a: np.ndarray, b: np.ndarray, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Factor ``A`` through ``B`` as ``A = B @ Q`` with ``Q = pinv(B) @ A``.

    Requires ``ran A <= ran B``.  The returned ``Q`` is the unique factor
    satisfying ``B @ Q = A``, ``ker Q = ker A`` and ``ran Q`` contained in
    the row space of ``B``; :func:`douglas_residuals` reports how well a
    computed factor meets these three conditions.

    Raises
    ------
    RangeInclusionError
        When the range-inclusion precondition fails beyond tolerance.
    """
    check = range_included(a, b, tol)
    if not check:
        raise RangeInclusionError(
            "ran(A) is not contained in ran(B): "
            f"residual {check.residual:.3e} > threshold {check.threshold:.3e}"
        )
    return pinv(b, tol) @ _as_matrix(a, "A")


def douglas_residuals(
    a: np.ndarray, b: np.ndarray, q: np.ndarray, tol: Tolerance = DEFAULT_TOL
) -> dict[str, float]:
    """Residuals of the three conditions characterizing the factor ``Q``.

    Returns a dict with keys ``factorization`` (``||B Q - A||_F``),
    ``kernel`` (the larger of ``||Q N_A||_F`` and ``||A N_Q||_F`` for
    orthonormal nullspace bases ``N_A`` of ``A`` and ``N_Q`` of ``Q``; both
    directions together verify ``ker Q = ker A``), and ``row_space``
    (``||(I - pinv(B) B) Q||_F``, the part of ``ran Q`` outside the row
    space of ``B``).
    """
    am = _as_matrix(a, "A")
    bm = _as_matrix(b, "B")
    qm = _as_matrix(q, "Q")
    residuals = {"factorization": float(np.linalg.norm(bm @ qm - am))}
    residuals["kernel"] = max(
        _nullspace_image_norm(am, qm, tol), _nullspace_image_norm(qm, am, tol)
    )
    row_projector = pinv(bm, tol) @ bm
    residuals["row_space"] = float(np.linalg.norm(qm - row_projector @ qm))
    return residuals


def _nullspace_image_norm(of: np.ndarray, under: np.ndarray, tol: Tolerance) -> float:
    """||under @ N||_F for an orthonormal basis N of the nullspace of ``of``."""
    _, s, vt = np.linalg.svd(of)
    cutoff = tol.effective_rtol(of.shape) * (s[0] if s.size and s[0] > 0 else 1.0)
    null_basis = vt[np.sum(s > cutoff) :].T
    if null_basis.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(under @ null_basis))
