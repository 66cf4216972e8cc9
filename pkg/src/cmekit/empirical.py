"""Empirical moment estimation from i.i.d. samples of a finite joint,
regularized and truncated Gram-form estimators, convergence studies
against the population oracle, and the whitened random-matrix diagnostics.

Two independent computation routes exist for the regularized estimator:
an operator form in feature coordinates (small, O(r^3)) and a Gram form
solving ``(K + J eps I) beta = k_x`` in sample space (O(J^3)).  Their
agreement is the central internal consistency check of this module; sweeps
use the operator form for tractability and the agreement is verified on
separate seeded triples.

The whitening decomposition expresses the truncated empirical covariance
as ``D^{1/2} S_J D^{1/2}`` in the population eigenbasis (``D`` the leading
population eigenvalues), so the extreme eigenvalues of the whitened sample
covariance ``S_J`` can be monitored against their ``(1 -+ sqrt(gamma))^2``
asymptotics and the lower bound ``lambda_min >= sigma_n lambda_min(S_J)``
checked directly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .cme import TruncatedCme, fit_truncated
from .discrete import EmbeddedJoint, FiniteJoint, Moments, embed_moments, mmd
from .errors import (
    DimensionMismatchError,
    InternalConsistencyError,
    RankOutOfBoundsError,
    SingularSpectrumError,
    ValidationError,
)
from .kernels import FeatureBasis
from .linalg import DEFAULT_TOL, Tolerance, numerical_rank, sym_eig

__all__ = [
    "SampleSet",
    "EmpiricalMoments",
    "EstimatorConfig",
    "RegularizedEmpiricalCme",
    "StudyRow",
    "WhitenedCovariance",
    "draw_samples",
    "empirical_moments",
    "empirical_cme_operator",
    "regularized_cme",
    "regularized_cme_gram",
    "regularized_agreement",
    "naive_empirical_cme",
    "truncated_empirical_cme",
    "convergence_study",
    "whitened_covariance",
    "spectrum_experiment",
    "default_epsilon",
    "default_truncation_rank",
]

GENERATOR_ID = "numpy.random.default_rng(PCG64)"


@dataclass(frozen=True)
class SampleSet:
    """Paired label indices drawn from a finite joint, with the seed that
    produced them recorded for reproducibility."""

    joint: FiniteJoint
    x_indices: np.ndarray
    y_indices: np.ndarray
    seed: int | None = None

    @property
    def size(self) -> int:
        return int(self.x_indices.shape[0])

    def save_csv(self, path) -> None:
        """Write the samples as ``x_label,y_label`` rows plus a sidecar
        ``<name>.manifest.json`` recording seed and generator."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x_label", "y_label"])
            for xi, yi in zip(self.x_indices, self.y_indices):
                writer.writerow([self.joint.x_labels[xi], self.joint.y_labels[yi]])
        manifest = {
            "generator": GENERATOR_ID,
            "sample_count": self.size,
            "seed": self.seed,
        }
        path.with_suffix(path.suffix + ".manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )

    @classmethod
    def load_csv(cls, path, joint: FiniteJoint) -> "SampleSet":
        path = Path(path)
        x_map = {label: i for i, label in enumerate(joint.x_labels)}
        y_map = {label: j for j, label in enumerate(joint.y_labels)}
        xs, ys = [], []
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["x_label", "y_label"]:
                raise ValidationError(f"unexpected sample CSV header: {header!r}")
            for row in reader:
                if len(row) != 2:
                    raise ValidationError(f"malformed sample row: {row!r}")
                if row[0] not in x_map or row[1] not in y_map:
                    raise ValidationError(f"sample row uses unknown label: {row!r}")
                xs.append(x_map[row[0]])
                ys.append(y_map[row[1]])
        if not xs:
            raise ValidationError("sample CSV contains no rows")
        seed = None
        manifest_path = path.with_suffix(path.suffix + ".manifest.json")
        if manifest_path.exists():
            seed = json.loads(manifest_path.read_text()).get("seed")
        return cls(
            joint=joint,
            x_indices=np.asarray(xs, dtype=np.intp),
            y_indices=np.asarray(ys, dtype=np.intp),
            seed=seed,
        )


def draw_samples(joint: FiniteJoint, count: int, seed: int) -> SampleSet:
    """Draw ``count`` i.i.d. pairs from the joint with a seeded generator."""
    if count < 1:
        raise ValidationError(f"sample count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    flat = joint.p.ravel()
    cells = rng.choice(flat.size, size=count, p=flat)
    x_idx, y_idx = np.unravel_index(cells, joint.p.shape)
    return SampleSet(
        joint=joint,
        x_indices=np.asarray(x_idx, dtype=np.intp),
        y_indices=np.asarray(y_idx, dtype=np.intp),
        seed=seed,
    )


@dataclass
class EmpiricalMoments:
    """Plug-in moment estimates in feature coordinates, plus the sample
    Gram matrices (built lazily; they are J x J)."""

    moments: Moments
    samples: SampleSet

    @cached_property
    def gram_x(self) -> np.ndarray:
        ix = self.samples.x_indices
        return self.moments.basis_x.gram[np.ix_(ix, ix)]

    @cached_property
    def gram_y(self) -> np.ndarray:
        iy = self.samples.y_indices
        return self.moments.basis_y.gram[np.ix_(iy, iy)]


def empirical_moments(
    samples: SampleSet, basis_x: FeatureBasis, basis_y: FeatureBasis
) -> EmpiricalMoments:
    """Empirical means and (cross-)covariances of the embedded samples.

    All blocks are single-pass plug-in averages: the centred blocks
    subtract the empirical means, so a single sample yields zero centred
    covariance and duplicating every pair leaves all moments unchanged.
    """
    joint = samples.joint
    if basis_x.size != joint.m or basis_y.size != joint.q:
        raise DimensionMismatchError("feature bases must match the joint's label sets")
    J = samples.size
    phis = basis_x.coordinates[:, samples.x_indices]
    psis = basis_y.coordinates[:, samples.y_indices]
    mean_x = phis.mean(axis=1)
    mean_y = psis.mean(axis=1)
    phic = phis - mean_x[:, None]
    psic = psis - mean_y[:, None]
    cov_x = (phic @ phic.T) / J
    cov_y = (psic @ psic.T) / J
    cov_xy = (phic @ psic.T) / J
    ucov_x = (phis @ phis.T) / J
    ucov_y = (psis @ psis.T) / J
    ucov_xy = (phis @ psis.T) / J
    moments = Moments(
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
    return EmpiricalMoments(moments=moments, samples=samples)


def default_epsilon(count: int) -> float:
    """Default regularization schedule ``eps(J) = J^{-1/2}``."""
    return float(count) ** -0.5


def default_truncation_rank(count: int) -> int:
    """Default truncation schedule ``n(J) = ceil(J^{1/3})``."""
    return int(math.ceil(float(count) ** (1.0 / 3.0)))


@dataclass(frozen=True)
class EstimatorConfig:
    """Which empirical estimator to run and how its parameter scales with
    the sample count.

    ``kind`` is "regularized", "truncated", or "naive".  A fixed
    ``epsilon`` / ``rank`` overrides the default schedule; an explicit
    ``schedule`` map ``J -> value`` overrides both.
    """

    kind: str
    epsilon: float | None = None
    rank: int | None = None
    schedule: dict | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("regularized", "truncated", "naive"):
            raise ValidationError(f"unknown estimator kind {self.kind!r}")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.rank is not None and self.rank < 1:
            raise ValidationError("rank must be >= 1")

    def value_for(self, count: int) -> float:
        if self.schedule is not None and count in self.schedule:
            return self.schedule[count]
        if self.kind == "regularized":
            return self.epsilon if self.epsilon is not None else default_epsilon(count)
        if self.kind == "truncated":
            return self.rank if self.rank is not None else default_truncation_rank(count)
        return float("nan")


@dataclass(frozen=True)
class RegularizedEmpiricalCme:
    """Ridge-regularized empirical CME operator
    ``phi(x) -> uC_YX_hat (uC_X_hat + eps I)^{-1} phi(x)``."""

    matrix: np.ndarray
    epsilon: float

    def predict(self, phi_x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(phi_x, dtype=np.float64)


def empirical_cme_operator(
    emp: EmpiricalMoments,
    kind: str,
    value: float | None = None,
    tol: Tolerance = DEFAULT_TOL,
):
    """Build the empirical estimator named by ``kind`` as a predict-able
    operator.

    "naive" is the full-rank pseudo-inverse estimator, whose
    range-inclusion precondition holds by construction for every sample
    set; "truncated" restricts to the leading ``value`` eigendirections of
    the empirical centred covariance (``1 <= value <= rank``); and
    "regularized" is the ridge operator with ``eps = value``.
    """
    m = emp.moments
    if kind == "regularized":
        eps = float(value)
        if eps <= 0:
            raise ValidationError("epsilon must be positive")
        ridge = m.ucov_x + eps * np.eye(m.ucov_x.shape[0])
        matrix = np.linalg.solve(ridge, m.ucov_xy).T
        return RegularizedEmpiricalCme(matrix=matrix, epsilon=eps)
    rank_cx = numerical_rank(m.cov_x, tol)
    if kind == "naive":
        n = max(rank_cx, 1)
    elif kind == "truncated":
        n = int(value)
        if not 1 <= n <= max(rank_cx, 1):
            raise RankOutOfBoundsError(
                f"truncation rank must satisfy 1 <= n <= rank(C_X_hat) = {rank_cx}, got {n}"
            )
    else:
        raise ValidationError(f"unknown estimator kind {kind!r}")
    return fit_truncated(m, n, variant="centered", tol=tol)


def naive_empirical_cme(
    samples: SampleSet,
    basis_x: FeatureBasis,
    basis_y: FeatureBasis,
    x_index: int,
    tol: Tolerance = DEFAULT_TOL,
) -> np.ndarray:
    """Full-rank empirical CME prediction at the label ``x_index``."""
    emp = empirical_moments(samples, basis_x, basis_y)
    op = empirical_cme_operator(emp, "naive", tol=tol)
    return op.predict(basis_x.vector(x_index))


def truncated_empirical_cme(
    samples: SampleSet,
    basis_x: FeatureBasis,
    basis_y: FeatureBasis,
    rank: int,
    x_index: int,
    tol: Tolerance = DEFAULT_TOL,
) -> np.ndarray:
    """Rank-``n`` truncated empirical CME prediction at ``x_index``; at
    full rank this recovers the naive estimator."""
    emp = empirical_moments(samples, basis_x, basis_y)
    op = empirical_cme_operator(emp, "truncated", rank, tol=tol)
    return op.predict(basis_x.vector(x_index))


def regularized_cme(
    samples: SampleSet,
    basis_x: FeatureBasis,
    basis_y: FeatureBasis,
    epsilon: float,
    x_index: int,
    cross_check: bool = True,
    check_tol: float = 1e-8,
) -> np.ndarray:
    """Regularized empirical CME prediction at the label ``x_index``.

    With ``cross_check`` (the default) the prediction is computed both in
    feature coordinates and in Gram form and the two routes must agree
    within ``check_tol``; sweeps disable the check and rely on the
    separately verified agreement, since the Gram route factors a J x J
    matrix.
    """
    emp = empirical_moments(samples, basis_x, basis_y)
    op = empirical_cme_operator(emp, "regularized", epsilon)
    prediction = op.predict(basis_x.vector(x_index))
    if cross_check:
        via_gram = regularized_cme_gram(samples, basis_x, basis_y, epsilon, [x_index])[0]
        gap = float(np.linalg.norm(prediction - via_gram))
        if gap > check_tol:
            raise InternalConsistencyError(
                f"operator-form and Gram-form predictions disagree: {gap:.3e} > {check_tol:.3e}"
            )
    return prediction


def regularized_cme_gram(
    samples: SampleSet,
    basis_x: FeatureBasis,
    basis_y: FeatureBasis,
    epsilon: float,
    x_indices,
) -> np.ndarray:
    """Gram-form regularized predictions at several labels at once.

    Solves ``(K + J eps I) beta = k_x`` with the sample Gram ``K`` and
    returns ``sum_j beta_j psi(y_j)`` per query, stacked as rows.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    emp = empirical_moments(samples, basis_x, basis_y)
    J = samples.size
    k_cols = basis_x.gram[np.ix_(samples.x_indices, np.asarray(x_indices, dtype=np.intp))]
    betas = np.linalg.solve(emp.gram_x + J * epsilon * np.eye(J), k_cols)
    psis = basis_y.coordinates[:, samples.y_indices]
    return (psis @ betas).T


def regularized_agreement(
    samples: SampleSet,
    basis_x: FeatureBasis,
    basis_y: FeatureBasis,
    epsilon: float,
    x_indices,
) -> float:
    """Largest distance between the operator-form and Gram-form
    regularized predictions over the given query labels."""
    emp = empirical_moments(samples, basis_x, basis_y)
    op = empirical_cme_operator(emp, "regularized", epsilon)
    via_gram = regularized_cme_gram(samples, basis_x, basis_y, epsilon, x_indices)
    worst = 0.0
    for row, x_index in enumerate(np.asarray(x_indices, dtype=np.intp)):
        direct = op.predict(basis_x.vector(int(x_index)))
        worst = max(worst, float(np.linalg.norm(direct - via_gram[row])))
    return worst


@dataclass(frozen=True)
class StudyRow:
    """One grid point of a convergence study."""

    sample_count: int
    seed: int
    error: float
    schedule_value: float


def convergence_study(
    embedded: EmbeddedJoint,
    config: EstimatorConfig,
    sample_counts,
    seeds,
    tol: Tolerance = DEFAULT_TOL,
) -> list[StudyRow]:
    """Population-oracle error of an empirical estimator over a
    (sample count, seed) grid.

    The error at each grid point is
    ``sum_x p_X(x) * mmd(estimate(x), oracle(x))^2`` over on-support x.
    Truncation schedules are clipped to the empirical covariance rank
    (finite feature spaces saturate), and the clipped value is what the
    row reports.  Rows come out sorted by (J, seed).
    """
    oracle = embedded.oracle
    basis_x, basis_y = embedded.basis_x, embedded.basis_y
    support = np.flatnonzero(oracle.on_support)
    rows = []
    for count in sorted(int(j) for j in sample_counts):
        for seed in sorted(int(s) for s in seeds):
            samples = draw_samples(embedded.joint, count, seed)
            emp = empirical_moments(samples, basis_x, basis_y)
            value = config.value_for(count)
            if config.kind == "truncated":
                value = min(int(value), max(numerical_rank(emp.moments.cov_x, tol), 1))
            op = empirical_cme_operator(emp, config.kind, value, tol=tol)
            err = 0.0
            for i in support:
                delta = mmd(op.predict(basis_x.vector(int(i))), oracle.means[i])
                err += float(oracle.weights[i]) * delta**2
            rows.append(
                StudyRow(
                    sample_count=count,
                    seed=seed,
                    error=err,
                    schedule_value=float(value),
                )
            )
    return rows


@dataclass(frozen=True)
class WhitenedCovariance:
    """Whitened sample covariance in the population eigenbasis, with the
    diagnostics the random-matrix limits are monitored through."""

    s_j: np.ndarray
    lambda_min: float
    lambda_max: float
    bound_residual: float
    factorization_residual: float
    distance_to_identity: float


def whitened_covariance(
    samples: SampleSet,
    moments: Moments,
    rank: int,
    tol: Tolerance = DEFAULT_TOL,
) -> WhitenedCovariance:
    """Whiten the empirical covariance with the leading population
    eigenpairs.

    Projects the centred sample features (centred at the *population*
    mean) onto the leading ``rank`` eigenvectors of the population
    covariance and rescales each score by ``1/sqrt(sigma_i)``; ``S_J`` is
    the sample covariance of these scores.  Verifies the factorization
    ``C_hat^(n) = D^{1/2} S_J D^{1/2}`` and the eigenvalue lower bound
    ``lambda_min(C_hat^(n)) >= sigma_n * lambda_min(S_J)``.

    Raises
    ------
    SingularSpectrumError
        If ``sigma_rank`` is at or below the rank cutoff of the population
        spectrum.
    """
    eig = sym_eig(moments.cov_x, tol)
    sigma = eig.eigenvalues
    if rank < 1 or rank > sigma.size:
        raise RankOutOfBoundsError(f"rank must satisfy 1 <= n <= {sigma.size}, got {rank}")
    cutoff = tol.effective_rtol(moments.cov_x.shape) * max(float(sigma[0]), 0.0)
    if sigma[rank - 1] <= cutoff:
        raise SingularSpectrumError(
            f"population eigenvalue sigma_{rank} = {sigma[rank - 1]:.3e} is numerically zero"
        )
    w = eig.eigenvectors[:, :rank]
    centred = (
        moments.basis_x.coordinates[:, samples.x_indices] - moments.mean_x[:, None]
    )
    scores = w.T @ centred
    xi = scores / np.sqrt(sigma[:rank])[:, None]
    J = samples.size
    s_j = (xi @ xi.T) / J
    s_j = 0.5 * (s_j + s_j.T)
    emp_cov_n = (scores @ scores.T) / J
    emp_cov_n = 0.5 * (emp_cov_n + emp_cov_n.T)
    d_half = np.sqrt(sigma[:rank])
    factorization_residual = float(
        np.linalg.norm(emp_cov_n - (d_half[:, None] * s_j) * d_half[None, :])
    )
    s_evals = np.linalg.eigvalsh(s_j)
    emp_evals = np.linalg.eigvalsh(emp_cov_n)
    bound_residual = float(emp_evals[0] - sigma[rank - 1] * s_evals[0])
    return WhitenedCovariance(
        s_j=s_j,
        lambda_min=float(s_evals[0]),
        lambda_max=float(s_evals[-1]),
        bound_residual=bound_residual,
        factorization_residual=factorization_residual,
        distance_to_identity=float(np.linalg.norm(s_j - np.eye(rank))),
    )


def spectrum_experiment(
    n: int, count: int, seed: int, distribution: str = "gaussian"
) -> tuple[float, float]:
    """Extreme eigenvalues of the n x n sample covariance
    ``S_J = A A.T / J`` for an i.i.d. mean-zero unit-variance array ``A``.

    Supported entry distributions: "gaussian" (standard normal) and
    "rademacher" (+-1).  Requires ``n < J``.
    """
    if not 1 <= n < count:
        raise ValidationError(f"need 1 <= n < J, got n={n}, J={count}")
    rng = np.random.default_rng(seed)
    if distribution == "gaussian":
        a = rng.standard_normal((n, count))
    elif distribution == "rademacher":
        a = rng.integers(0, 2, size=(n, count)).astype(np.float64) * 2.0 - 1.0
    else:
        raise ValidationError(f"unknown distribution {distribution!r}")
    s = (a @ a.T) / count
    evals = np.linalg.eigvalsh(0.5 * (s + s.T))
    return float(evals[0]), float(evals[-1])
