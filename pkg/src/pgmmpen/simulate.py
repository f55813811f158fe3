"""Seeded generators for the simulation designs used in the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataMatrix


@dataclass(frozen=True)
class ScenarioSpec:
    """Three-component high-dimensional benchmark scenario.

    ``scale`` optionally multiplies ``p`` for desk-scale replicas of the
    full-size design.
    """

    n: int
    p: int = 200
    ratios: tuple[int, int, int] = (4, 3, 3)
    seed: int = 0
    scale: float | None = None

    @property
    def effective_p(self) -> int:
        if self.scale is None:
            return self.p
        return max(2, int(round(self.p * self.scale)))


def allocate_sizes(n: int, ratios) -> tuple[int, ...]:
    """Largest-remainder apportionment of n observations to the given ratios."""
    ratios = tuple(int(r) for r in ratios)
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive integers, got {ratios}")
    if n < len(ratios):
        raise ValueError(f"need n >= number of components, got n={n}")
    total = sum(ratios)
    quotas = [n * r / total for r in ratios]
    sizes = [math.floor(q) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    for idx in sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))[: n - sum(sizes)]:
        sizes[idx] += 1
    return tuple(sizes)


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """Matrix with (i, j) entry rho^|i-j|; positive-definite for |rho| < 1."""
    if not abs(rho) < 1:
        raise ValueError(f"need |rho| < 1, got {rho}")
    idx = np.arange(p)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def generate_paper_mixture(spec: ScenarioSpec) -> DataMatrix:
    """Three Gaussian components: isotropic, diagonal, and AR(1)-full covariance.

    Component means are -5.5, 2, and 3 times the all-ones vector.  The
    diagonal component's variances are drawn once per seed from [0.5, 1.5];
    sampling uses exact Cholesky factors of the target covariances.
    """
    p = spec.effective_p
    sizes = allocate_sizes(spec.n, spec.ratios)
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), p, spec.n]))

    means = [np.full(p, -5.5), np.full(p, 2.0), np.full(p, 3.0)]
    diag_vars = rng.uniform(0.5, 1.5, size=p)
    chols = [
        np.eye(p),
        np.diag(np.sqrt(diag_vars)),
        np.linalg.cholesky(ar1_covariance(p, 0.9)),
    ]

    blocks, labels = [], []
    for g, size in enumerate(sizes):
        z = rng.standard_normal((size, p))
        blocks.append(means[g] + z @ chols[g].T)
        labels.append(np.full(size, g, dtype=int))
    return DataMatrix(values=np.vstack(blocks), labels=np.concatenate(labels))


def generate_sparse_mixture(n: int, p: int, G: int, zero_fraction: float,
                            separation: float, seed: int) -> tuple[DataMatrix, np.ndarray]:
    """Identity-covariance mixture whose component means contain exact zeros.

    Each mean gets ceil(zero_fraction * p) zeros at seeded positions; the
    remaining entries are +/- separation with seeded signs.  Returns the data
    (with labels) together with the true G x p mean matrix so sparsity
    recovery can be scored.
    """
    if not 0.0 <= zero_fraction < 1.0:
        raise ValueError("zero_fraction must lie in [0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), n, p, G]))
    n_zero = math.ceil(zero_fraction * p)

    means = np.empty((G, p))
    for g in range(G):
        signs = rng.choice([-1.0, 1.0], size=p)
        means[g] = signs * separation
        if n_zero:
            means[g, rng.choice(p, size=n_zero, replace=False)] = 0.0

    sizes = allocate_sizes(n, (1,) * G)
    blocks, labels = [], []
    for g, size in enumerate(sizes):
        blocks.append(means[g] + rng.standard_normal((size, p)))
        labels.append(np.full(size, g, dtype=int))
    data = DataMatrix(values=np.vstack(blocks), labels=np.concatenate(labels))
    return data, means
