"""Built-in seeded corpus of embedded joints used by the verification
suites and the CLI.

Each generator is a named family parameterized only by a seed, so
acceptance checks can reference corpus ids instead of shipped data files.
X embeddings are well-separated scalars and probability tables are mixed
with a uniform floor, keeping conditionals and covariance spectra away
from degeneracy; the structural properties each family is meant to
exercise (independence, full rank, determinism, rank deficiency, a single
atom) are exact by construction.
"""

from __future__ import annotations

import numpy as np

from .discrete import EmbeddedJoint, FiniteJoint, embed_joint
from .errors import ValidationError
from .kernels import Kernel
from .linalg import DEFAULT_TOL, Tolerance

__all__ = ["CORPUS_NAMES", "DEFAULT_CORPUS_SEED", "generate", "corpus_stream"]

CORPUS_NAMES = (
    "independence",
    "fullrank-random",
    "deterministic-map",
    "rank-deficient-kernel",
    "pointmass",
)

DEFAULT_CORPUS_SEED = 1729

_GAUSSIAN = Kernel("gaussian", lengthscale=1.0)


def _scalar_embeddings(rng: np.random.Generator, size: int) -> np.ndarray:
    """Distinct scalars spaced at least ~1.7 lengthscales apart, so the
    gaussian Gram stays well away from numerical rank deficiency."""
    return 2.0 * np.arange(size) + rng.uniform(0.0, 0.3, size=size)


def _floored_probabilities(rng: np.random.Generator, size: int) -> np.ndarray:
    """Dirichlet weights mixed half-and-half with uniform: random but
    bounded away from zero (>= 1/(2*size))."""
    return 0.5 * rng.dirichlet(np.ones(size)) + 0.5 / size


def _sizes(rng: np.random.Generator, low: int = 2, high: int = 8) -> tuple[int, int]:
    return int(rng.integers(low, high + 1)), int(rng.integers(low, high + 1))


def generate(
    name: str, seed: int = DEFAULT_CORPUS_SEED, tol: Tolerance = DEFAULT_TOL
) -> EmbeddedJoint:
    """Build one corpus entry.

    Families
    --------
    independence
        Product table with gaussian kernels; cross-covariance is exactly
        zero and the marginal Y-embedding has norm well above 0.1.
    fullrank-random
        Fully supported random table, gaussian kernels on separated
        scalars: strictly positive-definite Grams, so every structural
        assumption holds.
    deterministic-map
        Y is a seeded permutation of X; conditionals are point masses.
    rank-deficient-kernel
        Fully supported random table but an affine (degree-1 polynomial)
        X-kernel: the X-feature span has rank 2 and contains the
        constants, so the pointwise embedding identity genuinely fails
        while the weak one survives.
    pointmass
        All mass on a single cell of a 2 x 2 table; the second X-label is
        off support.
    """
    rng = np.random.default_rng(seed)
    if name == "independence":
        m, q = _sizes(rng)
        table = np.outer(_floored_probabilities(rng, m), _floored_probabilities(rng, q))
        joint = FiniteJoint.create(
            table,
            x_embeddings=_scalar_embeddings(rng, m),
            y_embeddings=_scalar_embeddings(rng, q),
        )
        return embed_joint(joint, _GAUSSIAN, _GAUSSIAN, tol)
    if name == "fullrank-random":
        m, q = _sizes(rng)
        table = _floored_probabilities(rng, m * q).reshape(m, q)
        joint = FiniteJoint.create(
            table,
            x_embeddings=_scalar_embeddings(rng, m),
            y_embeddings=_scalar_embeddings(rng, q),
        )
        return embed_joint(joint, _GAUSSIAN, _GAUSSIAN, tol)
    if name == "deterministic-map":
        m = int(rng.integers(2, 9))
        perm = rng.permutation(m)
        marginal = _floored_probabilities(rng, m)
        table = np.zeros((m, m))
        table[np.arange(m), perm] = marginal
        joint = FiniteJoint.create(
            table,
            x_embeddings=_scalar_embeddings(rng, m),
            y_embeddings=_scalar_embeddings(rng, m),
        )
        return embed_joint(joint, _GAUSSIAN, _GAUSSIAN, tol)
    if name == "rank-deficient-kernel":
        m = int(rng.integers(4, 9))
        q = int(rng.integers(3, 9))
        table = _floored_probabilities(rng, m * q).reshape(m, q)
        joint = FiniteJoint.create(
            table,
            x_embeddings=_scalar_embeddings(rng, m),
            y_embeddings=_scalar_embeddings(rng, q),
        )
        affine = Kernel("polynomial", degree=1, offset=1.0)
        return embed_joint(joint, affine, _GAUSSIAN, tol)
    if name == "pointmass":
        table = np.zeros((2, 2))
        table[0, 0] = 1.0
        joint = FiniteJoint.create(
            table,
            x_embeddings=_scalar_embeddings(rng, 2),
            y_embeddings=_scalar_embeddings(rng, 2),
        )
        return embed_joint(joint, _GAUSSIAN, _GAUSSIAN, tol)
    raise ValidationError(f"unknown corpus id {name!r}; expected one of {CORPUS_NAMES}")


def corpus_stream(
    name: str, count: int, base_seed: int = DEFAULT_CORPUS_SEED, tol: Tolerance = DEFAULT_TOL
):
    """Yield ``count`` corpus entries with consecutive seeds."""
    for offset in range(count):
        yield generate(name, base_seed + offset, tol)
