"""Mixture data types, factor-structured Gaussian densities, and log-likelihoods.

All density work happens in log space.  Covariances are never materialized as
p x p matrices: inverses and determinants go through the factored identities

    (LL' + Psi)^-1 = Psi^-1 - Psi^-1 L (I_q + L' Psi^-1 L)^-1 L' Psi^-1
    log|LL' + Psi| = log|I_q + L' Psi^-1 L| + sum_j log psi_j

so one density evaluation costs O(p q^2) instead of O(p^3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .exceptions import NumericalError
from .structures import CovarianceStructure

# Lower bound applied to every diagonal noise entry; keeps Sigma_g
# nonsingular when a component collapses onto a subspace.
PSI_FLOOR = 1e-6

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DataMatrix:
    """n x p observation matrix with optional 0-based ground-truth labels."""

    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"data must be a non-empty 2-d matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite entries")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (values.shape[0],):
                raise ValueError(
                    f"labels must have length n={values.shape[0]}, got shape {labels.shape}"
                )
            if labels.min() < 0:
                raise ValueError("labels must be 0-based nonnegative integers")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MixtureParams:
    """Full parameter set of a G-component factor-structured Gaussian mixture.

    ``loadings`` is (G, p, q) and ``noise`` is (G, p); structures with shared
    slices store identical copies in every slice so downstream code never
    branches on the constraint pattern.
    """

    weights: np.ndarray
    means: np.ndarray
    loadings: np.ndarray
    noise: np.ndarray
    structure: CovarianceStructure

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "loadings", np.asarray(self.loadings, dtype=float))
        object.__setattr__(self, "noise", np.asarray(self.noise, dtype=float))

    @property
    def G(self) -> int:
        return self.weights.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    @property
    def q(self) -> int:
        return self.loadings.shape[2]


def validate_params(params: MixtureParams) -> None:
    """Raise ValueError if the parameter set violates its invariants."""
    G, p = params.means.shape
    if params.weights.shape != (G,):
        raise ValueError("weights and means disagree on the number of components")
    if abs(params.weights.sum() - 1.0) > 1e-12 or np.any(params.weights <= 0):
        raise ValueError("weights must be strictly positive and sum to 1 within 1e-12")
    if params.loadings.shape[:2] != (G, p) or params.noise.shape != (G, p):
        raise ValueError("loadings/noise shapes do not match (G, p)")
    if params.q >= p:
        raise ValueError(f"need q < p, got q={params.q}, p={p}")
    if np.any(params.noise < PSI_FLOOR):
        raise ValueError(f"noise entries must be >= {PSI_FLOOR}")


def log_density_batch(X: np.ndarray, mean: np.ndarray, loadings: np.ndarray,
                      noise: np.ndarray, component: int | None = None) -> np.ndarray:
    """Log N(x | mean, LL' + Psi) for every row of X, via the factored identities.

    ``component`` only labels error messages when a q x q solve blows up.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    noise = np.asarray(noise, dtype=float)
    loadings = np.asarray(loadings, dtype=float)
    p = X.shape[1]
    if np.any(noise <= 0):
        raise ValueError("noise entries must be strictly positive")

    if loadings.shape[0] != p:
        raise ValueError(f"loadings must have p={p} rows, got {loadings.shape}")
    diff = X - np.asarray(mean, dtype=float)
    scaled = diff / noise                                # rows of Psi^-1 (x - mu)
    a = loadings / noise[:, None]                        # Psi^-1 L
    m_small = loadings.T @ a
    m_small[np.diag_indices_from(m_small)] += 1.0        # I_q + L' Psi^-1 L
    try:
        chol = linalg.cho_factor(m_small, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"q x q capacitance solve failed for component {component}: {exc}",
            component=component,
        ) from exc
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0]))) + np.sum(np.log(noise))

    t = diff @ a                                         # (n, q)
    quad = np.einsum("ij,ij->i", diff, scaled) - np.einsum(
        "ij,ij->i", t, linalg.cho_solve(chol, t.T).T
    )
    out = -0.5 * (p * LOG_2PI + logdet + quad)
    if not np.all(np.isfinite(out)):
        raise NumericalError(
            f"non-finite log-density in component {component}", component=component
        )
    return out


def log_component_density(x: np.ndarray, mean: np.ndarray, loadings: np.ndarray,
                          noise: np.ndarray) -> float:
    """Log-density of a single observation under one factor-structured Gaussian."""
    return float(log_density_batch(np.asarray(x, dtype=float)[None, :], mean, loadings, noise)[0])


def log_joint(data: DataMatrix, params: MixtureParams) -> np.ndarray:
    """(n, G) matrix of log pi_g + log N(x_i | mu_g, Sigma_g).

    Batched over components: the n x p differences for all G components are
    formed at once and the p x q products go through one stacked matmul, so
    only the tiny q x q factorizations stay in a Python loop.
    """
    if data.p != params.p:
        raise ValueError(f"data has p={data.p} but params have p={params.p}")
    X = data.values
    G, p, q = params.loadings.shape
    diff = X[None, :, :] - params.means[:, None, :]            # (G, n, p)
    scaled = diff / params.noise[:, None, :]
    a = params.loadings / params.noise[:, :, None]             # (G, p, q) Psi^-1 L
    m_small = np.matmul(np.transpose(params.loadings, (0, 2, 1)), a)
    m_small[:, np.arange(q), np.arange(q)] += 1.0
    t = np.matmul(diff, a)                                     # (G, n, q)

    quad = np.einsum("gnp,gnp->gn", diff, scaled)
    out = np.empty((data.n, G))
    log_w = np.log(params.weights)
    log_noise = np.sum(np.log(params.noise), axis=1)
    for g in range(G):
        try:
            chol = linalg.cho_factor(m_small[g], lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError(
                f"q x q capacitance solve failed for component {g}: {exc}",
                component=g,
            ) from exc
        logdet = 2.0 * np.sum(np.log(np.diag(chol[0]))) + log_noise[g]
        qform = quad[g] - np.einsum("nq,nq->n", t[g], linalg.cho_solve(chol, t[g].T).T)
        out[:, g] = log_w[g] - 0.5 * (p * LOG_2PI + logdet + qform)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))
        raise NumericalError(
            f"non-finite log-density in component {bad[0, 1]}",
            component=int(bad[0, 1]),
        )
    return out


def mixture_loglik(data: DataMatrix, params: MixtureParams) -> float:
    """Observed-data log-likelihood, accumulated with log-sum-exp per row."""
    lj = log_joint(data, params)
    return float(logsumexp(lj, axis=1).sum())


def responsibilities(data: DataMatrix, params: MixtureParams) -> np.ndarray:
    """Posterior component membership probabilities, row-stochastic (n, G)."""
    resp, _ = e_step(data, params)
    return resp


def e_step(data: DataMatrix, params: MixtureParams) -> tuple[np.ndarray, float]:
    """Responsibilities plus the log-likelihood, from one pass over the data."""
    lj = log_joint(data, params)
    norm = logsumexp(lj, axis=1)
    bad = np.flatnonzero(~np.isfinite(norm))
    if bad.size:
        raise NumericalError(
            f"all components underflowed for observation {bad[0]}", row=int(bad[0])
        )
    resp = np.exp(lj - norm[:, None])
    return resp, float(norm.sum())


def penalty_value(params: MixtureParams, lambda_n: float, weights: np.ndarray,
                  n: int) -> float:
    """Penalty term n * lambda_n * sum_g pi_g sum_j w_gj |mu_gj|."""
    per_component = np.sum(weights * np.abs(params.means), axis=1)
    return float(n * lambda_n * np.dot(params.weights, per_component))


def penalized_loglik(data: DataMatrix, params: MixtureParams, penalty) -> float:
    """Log-likelihood minus the weighted L1 mean penalty."""
    if penalty.weights.shape != params.means.shape:
        raise ValueError(
            f"penalty weights shape {penalty.weights.shape} does not cover means "
            f"shape {params.means.shape}"
        )
    return mixture_loglik(data, params) - penalty_value(
        params, penalty.lambda_n, penalty.weights, data.n
    )
