"""Finite joint distributions, brute-force conditional oracles, and exact
embedding of their moments into feature coordinates.

A :class:`FiniteJoint` is a probability table over finite label sets, the
ground truth every embedding formula in this package is tested against.
Conditioning it is elementary row normalization; embedding it is a handful
of weighted sums.  Everything downstream (operator fits, Gaussian
conditioning, empirical estimators) must reproduce what these oracles
compute directly.

Conventions: ``p`` has shape ``(m, q)`` with rows indexed by X-labels;
off-support X-labels get zero vectors/matrices for all per-x outputs and
are excluded from error aggregation; expectations over x always use the
marginal weights ``p_X``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .kernels import FeatureBasis, Kernel, feature_coordinates, gram
from .linalg import DEFAULT_TOL, Tolerance

__all__ = [
    "FiniteJoint",
    "Moments",
    "ConditionalOracle",
    "EmbeddedJoint",
    "conditional_table",
    "conditional_oracle",
    "oracle_cme",
    "oracle_conditional_cov",
    "embed_moments",
    "embed_joint",
    "f_g",
    "mmd",
    "constant_function_coordinates",
]

_TABLE_TOL = 1e-12


@dataclass(frozen=True)
class FiniteJoint:
    """A probability table over finite label sets X x Y.

    ``p[i, j]`` is the probability of the pair ``(x_i, y_j)``.  Labels carry
    real embeddings so continuous kernels apply; by default label ``i``
    embeds to ``float(i)``.
    """

    p: np.ndarray
    x_embeddings: np.ndarray
    y_embeddings: np.ndarray
    x_labels: tuple[str, ...]
    y_labels: tuple[str, ...]

    @classmethod
    def create(
        cls,
        p,
        x_embeddings=None,
        y_embeddings=None,
        x_labels=None,
        y_labels=None,
    ) -> "FiniteJoint":
        """Validate and build a joint. Raises ValidationError on a negative
        entry, a total differing from 1 by more than 1e-12, or an empty
        X-marginal."""
        table = np.asarray(p, dtype=np.float64)
        if table.ndim != 2 or table.size == 0:
            raise ValidationError(f"p must be a non-empty 2-D table, got shape {table.shape}")
        if not np.all(np.isfinite(table)):
            raise ValidationError("p contains NaN or Inf")
        if np.any(table < 0):
            raise ValidationError(f"p contains a negative entry: min = {table.min()!r}")
        total = float(table.sum())
        if abs(total - 1.0) > _TABLE_TOL:
            raise ValidationError(f"p must sum to 1 within {_TABLE_TOL}, got {total!r}")
        m, q = table.shape
        if not np.any(table.sum(axis=1) > 0):
            raise ValidationError("at least one x must have positive marginal")
        xe = np.arange(m, dtype=np.float64) if x_embeddings is None else np.asarray(
            x_embeddings, dtype=np.float64
        )
        ye = np.arange(q, dtype=np.float64) if y_embeddings is None else np.asarray(
            y_embeddings, dtype=np.float64
        )
        if xe.shape[0] != m or ye.shape[0] != q:
            raise ValidationError("embeddings must match the table dimensions")
        xl = tuple(f"x{i}" for i in range(m)) if x_labels is None else tuple(map(str, x_labels))
        yl = tuple(f"y{j}" for j in range(q)) if y_labels is None else tuple(map(str, y_labels))
        if len(xl) != m or len(yl) != q:
            raise ValidationError("labels must match the table dimensions")
        return cls(p=table, x_embeddings=xe, y_embeddings=ye, x_labels=xl, y_labels=yl)

    @property
    def m(self) -> int:
        return self.p.shape[0]

    @property
    def q(self) -> int:
        return self.p.shape[1]

    @property
    def p_x(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def support_x(self) -> np.ndarray:
        return self.p_x > 0.0


def conditional_table(joint: FiniteJoint) -> np.ndarray:
    """Row-normalized conditional table ``P(y | x)``, shape ``(m, q)``.

    Rows of off-support x are zero; ``joint.support_x`` flags them.
    """
    px = joint.p_x
    table = np.zeros_like(joint.p)
    on = joint.support_x
    table[on] = joint.p[on] / px[on, None]
    return table


@dataclass(frozen=True)
class Moments:
    """Means and (cross-)covariance blocks in feature coordinates.

    ``cov_xy`` maps G-coordinates to H-coordinates (shape ``(r_X, r_Y)``);
    its transpose is the ``cov_yx`` block.  The ``u``-prefixed attributes
    are the uncentred counterparts, related by
    ``cov_x = ucov_x - outer(mean_x, mean_x)`` and likewise for the other
    blocks.
    """

    mean_x: np.ndarray
    mean_y: np.ndarray
    cov_x: np.ndarray
    cov_y: np.ndarray
    cov_xy: np.ndarray
    ucov_x: np.ndarray
    ucov_y: np.ndarray
    ucov_xy: np.ndarray
    basis_x: FeatureBasis
    basis_y: FeatureBasis

    @property
    def cov_yx(self) -> np.ndarray:
        return self.cov_xy.T

    @property
    def ucov_yx(self) -> np.ndarray:
        return self.ucov_xy.T

    def block_cov(self) -> np.ndarray:
        """Full centred block matrix [[C_Y, C_YX], [C_XY, C_X]]."""
        return np.block([[self.cov_y, self.cov_yx], [self.cov_xy, self.cov_x]])

    def block_ucov(self) -> np.ndarray:
        return np.block([[self.ucov_y, self.ucov_yx], [self.ucov_xy, self.ucov_x]])


def embed_moments(
    joint: FiniteJoint, basis_x: FeatureBasis, basis_y: FeatureBasis
) -> Moments:
    """Exact moments of the embedded pair in feature coordinates.

    ``mean_x = sum_x p_X(x) phi(x)``, ``ucov_xy = sum_{x,y} p(x,y)
    phi(x) psi(y).T``, and the centred blocks subtract the outer products
    of the means.
    """
    if basis_x.size != joint.m or basis_y.size != joint.q:
        raise DimensionMismatchError(
            "feature bases must be built from the joint's label sets: "
            f"got {basis_x.size} x-features for m={joint.m}, "
            f"{basis_y.size} y-features for q={joint.q}"
        )
    phi = basis_x.coordinates
    psi = basis_y.coordinates
    px, py = joint.p_x, joint.p_y
    mean_x = phi @ px
    mean_y = psi @ py
    ucov_x = (phi * px) @ phi.T
    ucov_y = (psi * py) @ psi.T
    ucov_xy = phi @ joint.p @ psi.T
    cov_x = ucov_x - np.outer(mean_x, mean_x)
    cov_y = ucov_y - np.outer(mean_y, mean_y)
    cov_xy = ucov_xy - np.outer(mean_x, mean_y)
    return Moments(
        mean_x=mean_x,
        mean_y=mean_y,
        cov_x=0.5 * (cov_x + cov_x.T),
        cov_y=0.5 * (cov_y + cov_y.T),
        cov_xy=cov_xy,
        ucov_x=0.5 * (ucov_x + ucov_x.T),
        ucov_y=0.5 * (ucov_y + ucov_y.T),
        ucov_xy=ucov_xy,
        basis_x=basis_x,
        basis_y=basis_y,
    )


@dataclass(frozen=True)
class ConditionalOracle:
    """Brute-force conditional quantities for every X-label.

    ``means[i]`` is the embedded conditional mean for ``x_i`` (zero off
    support), ``covariances[i]`` the conditional covariance, and
    ``expected_cov`` their ``p_X``-weighted average.  ``weights`` carries
    the marginal used for all error aggregation.
    """

    table: np.ndarray
    on_support: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    expected_cov: np.ndarray


def conditional_oracle(joint: FiniteJoint, basis_y: FeatureBasis) -> ConditionalOracle:
    """Build the full conditional oracle for a joint in one pass."""
    if basis_y.size != joint.q:
        raise DimensionMismatchError("basis_y must be built from the joint's y-labels")
    table = conditional_table(joint)
    psi = basis_y.coordinates
    r = basis_y.rank
    means = table @ psi.T
    covariances = np.zeros((joint.m, r, r))
    for i in np.flatnonzero(joint.support_x):
        centred = psi - means[i][:, None]
        covariances[i] = (centred * table[i]) @ centred.T
    expected = np.tensordot(joint.p_x, covariances, axes=(0, 0))
    return ConditionalOracle(
        table=table,
        on_support=joint.support_x,
        weights=joint.p_x,
        means=means,
        covariances=covariances,
        expected_cov=0.5 * (expected + expected.T),
    )


def oracle_cme(joint: FiniteJoint, basis_y: FeatureBasis) -> np.ndarray:
    """Embedded conditional means ``mu_{Y|X=x}`` for all x, shape
    ``(m, r_Y)``; zero rows off support."""
    return conditional_oracle(joint, basis_y).means


def oracle_conditional_cov(
    joint: FiniteJoint, basis_y: FeatureBasis
) -> tuple[np.ndarray, np.ndarray]:
    """Per-x conditional covariances and their ``p_X``-weighted mean."""
    oracle = conditional_oracle(joint, basis_y)
    return oracle.covariances, oracle.expected_cov


def f_g(joint: FiniteJoint, basis_y: FeatureBasis, g) -> np.ndarray:
    """Value table of ``x -> <g, mu_{Y|X=x}>`` over the X-labels.

    Equals the conditional expectation of the G-function represented by
    ``g``; zero off support.  Satisfies the law of total expectation
    ``sum_x p_X(x) f_g(x) = <g, mu_Y>``.
    """
    gv = np.asarray(g, dtype=np.float64)
    if gv.shape != (basis_y.rank,):
        raise DimensionMismatchError(
            f"g must be a vector of length {basis_y.rank}, got shape {gv.shape}"
        )
    return conditional_oracle(joint, basis_y).means @ gv


def mmd(a, b) -> float:
    """RKHS distance of two embedded elements given in the same orthonormal
    feature coordinates: the Euclidean norm of their difference."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise DimensionMismatchError(f"shape mismatch: {av.shape} vs {bv.shape}")
    return float(np.linalg.norm(av - bv))


def constant_function_coordinates(
    basis: FeatureBasis, weights, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Feature coordinates of the function that is 1 on the support of
    ``weights``, obtained by solving ``G alpha = 1`` there (least squares).

    Only meaningful when the constant function actually lies in the span;
    the caller is expected to check the residual of ``G alpha = 1`` if in
    doubt.
    """
    support = np.asarray(weights, dtype=np.float64) > 0.0
    sub = basis.gram[np.ix_(support, support)]
    alpha_s, *_ = np.linalg.lstsq(sub, np.ones(int(support.sum())), rcond=None)
    alpha = np.zeros(basis.size)
    alpha[support] = alpha_s
    return basis.coordinates @ alpha


@dataclass(frozen=True)
class EmbeddedJoint:
    """A finite joint together with its kernels, feature bases, exact
    moments, and brute-force conditional oracle.

    Convenience bundle: every verification routine in the package consumes
    some subset of these fields.
    """

    joint: FiniteJoint
    kernel_x: Kernel
    kernel_y: Kernel
    basis_x: FeatureBasis
    basis_y: FeatureBasis
    moments: Moments
    oracle: ConditionalOracle

    def feature_x(self, index: int) -> np.ndarray:
        return self.basis_x.vector(index)


def embed_joint(
    joint: FiniteJoint,
    kernel_x: Kernel,
    kernel_y: Kernel,
    tol: Tolerance = DEFAULT_TOL,
) -> EmbeddedJoint:
    """Build Gram matrices, feature bases, moments, and the oracle for a
    joint under the given kernels."""
    gx = gram(kernel_x, joint.x_embeddings, tol)
    gy = gram(kernel_y, joint.y_embeddings, tol)
    basis_x = feature_coordinates(gx, tol, points=joint.x_embeddings)
    basis_y = feature_coordinates(gy, tol, points=joint.y_embeddings)
    moments = embed_moments(joint, basis_x, basis_y)
    oracle = conditional_oracle(joint, basis_y)
    return EmbeddedJoint(
        joint=joint,
        kernel_x=kernel_x,
        kernel_y=kernel_y,
        basis_x=basis_x,
        basis_y=basis_y,
        moments=moments,
        oracle=oracle,
    )
