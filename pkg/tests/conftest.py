import numpy as np
import pytest

from pgmmpen.core import PSI_FLOOR, DataMatrix, MixtureParams
from pgmmpen.structures import structure


def random_params(rng, G, p, q, code="UUU", zero_fraction=0.0):
    """Structure-conforming random parameters for oracle checks."""
    struct = structure(code)
    weights = rng.dirichlet(np.full(G, 5.0))
    means = rng.normal(0.0, 2.0, size=(G, p))
    if zero_fraction > 0:
        mask = rng.random((G, p)) < zero_fraction
        means[mask] = 0.0
    n_load = 1 if struct.loadings_shared else G
    load = rng.normal(0.0, 1.0, size=(n_load, p, q))
    loadings = np.tile(load[0], (G, 1, 1)) if struct.loadings_shared else load
    n_noise = 1 if struct.noise_shared else G
    noise = rng.uniform(0.3, 2.0, size=(n_noise, p))
    if struct.noise_isotropic:
        noise = np.tile(noise.mean(axis=1)[:, None], (1, p))
    noise = np.tile(noise[0], (G, 1)) if struct.noise_shared else noise
    noise = np.maximum(noise, PSI_FLOOR)
    return MixtureParams(weights, means, loadings, noise, struct)


def dense_log_density(x, mean, loadings, noise):
    """Reference log-density via the explicit p x p covariance."""
    sigma = loadings @ loadings.T + np.diag(noise)
    d = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    p = d.shape[0]
    _, logdet = np.linalg.slogdet(sigma)
    quad = d @ np.linalg.solve(sigma, d)
    return -0.5 * (p * np.log(2 * np.pi) + logdet + quad)


def dense_mixture_loglik(data, params):
    """Reference observed-data log-likelihood via dense per-point sums."""
    total = 0.0
    for x in data.values:
        acc = 0.0
        for g in range(params.G):
            acc += params.weights[g] * np.exp(
                dense_log_density(x, params.means[g], params.loadings[g], params.noise[g])
            )
        total += np.log(acc)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def two_cluster_data(rng, n=120, p=4, delta=4.0):
    half = n // 2
    X = np.vstack([
        rng.normal(-delta, 1.0, size=(half, p)),
        rng.normal(delta, 1.0, size=(n - half, p)),
    ])
    labels = np.repeat([0, 1], [half, n - half])
    return DataMatrix(values=X, labels=labels)
