"""Two-stage alternating expectation-conditional maximization.

Stage 1 updates the mixing proportions and (optionally penalized) means with
the component labels as the missing data; stage 2 updates the loadings and
noise with labels and latent factors missing.  Each cycle therefore runs two
E-steps.  The recorded objective is the observed-data log-likelihood, minus
the weighted L1 mean penalty on penalized runs, and the loop stops once the
Aitken-accelerated asymptotic estimate of the objective is within tolerance
of the current value.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from sklearn.cluster import kmeans_plusplus

from .core import (
    DataMatrix,
    MixtureParams,
    e_step,
    penalty_value,
)
from .covariance import initial_covariance, update_covariance, weighted_scatter
from .exceptions import (
    EmptyComponentError,
    FitError,
    InitializationError,
    NumericalError,
)
from .penalty import PenaltySpec, compute_weights, lambda_schedule, soft_threshold_means
from .structures import CovarianceStructure, structure

INIT_STRATEGIES = ("random", "kmeans")


@dataclass(frozen=True)
class FitConfig:
    """Settings for one AECM fit at a fixed model configuration."""

    G: int
    q: int
    structure: CovarianceStructure
    max_iterations: int = 1000
    tolerance: float = 1e-2
    n_starts: int = 20
    seed: int = 0
    init: str = "kmeans"
    penalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "structure", structure(self.structure))
        if self.G < 1 or self.q < 1:
            raise ValueError(f"need G >= 1 and q >= 1, got G={self.G}, q={self.q}")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.init not in INIT_STRATEGIES:
            raise ValueError(f"init must be one of {INIT_STRATEGIES}, got {self.init!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class FitResult:
    """Converged parameters plus the diagnostics the selection criteria need."""

    params: MixtureParams
    resp: np.ndarray
    loglik: float
    penalized_loglik: float
    loglik_trace: np.ndarray
    nonzero_mask: np.ndarray
    converged: bool
    iterations: int
    pilot_means: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.resp.shape[0]


def _start_seed(seed: int, start: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, start]))


def initialize_responsibilities(data: DataMatrix, G: int, strategy: str,
                                seed: int) -> np.ndarray:
    """Seeded starting responsibilities: flat-Dirichlet rows or hard k-means++ rows.

    A draw whose smallest component holds under 1% of its expected share is
    resampled, at most 10 times.
    """
    if G < 1:
        raise ValueError("G must be >= 1")
    n = data.n
    if G == 1:
        return np.ones((n, 1))
    floor = 0.01 * n / G
    rng = _start_seed(seed, 0)
    for _ in range(10):
        if strategy == "random":
            resp = rng.dirichlet(np.ones(G), size=n)
        elif strategy == "kmeans":
            state = int(rng.integers(0, 2**31 - 1))
            centers, _ = kmeans_plusplus(data.values, n_clusters=G, random_state=state)
            d2 = ((data.values[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            resp = np.zeros((n, G))
            resp[np.arange(n), np.argmin(d2, axis=1)] = 1.0
        else:
            raise ValueError(f"unknown init strategy {strategy!r}")
        if resp.sum(axis=0).min() >= floor:
            return resp
    raise InitializationError(
        f"failed to draw responsibilities with every component above {floor:.3g} "
        f"total mass in 10 attempts (G={G}, n={n})"
    )


def aitken_converged(trace, tolerance: float) -> bool:
    """Convergence check on the last three objective values.

    With increments d1 = l(m) - l(m-1) and d2 = l(m+1) - l(m), the
    acceleration ratio a = d2/d1 projects the limit l(m) + d2/(1-a); the run
    has converged when that projection exceeds l(m+1) by less than the
    tolerance (and not from below).
    """
    if len(trace) < 3:
        raise ValueError("need at least 3 objective values")
    l0, l1, l2 = trace[-3], trace[-2], trace[-1]
    d1, d2 = l1 - l0, l2 - l1
    if d1 == 0.0:
        return d2 == 0.0
    a = d2 / d1
    if a >= 1.0:
        return False
    gap = (l1 + d2 / (1.0 - a)) - l2
    return 0.0 <= gap < tolerance


def _stage1_moments(data: DataMatrix, resp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    counts = resp.sum(axis=0)
    for g, c in enumerate(counts):
        if c < 1.0:
            raise EmptyComponentError(g, c)
    weights = counts / data.n
    means = (resp.T @ data.values) / counts[:, None]
    return weights, means


def _single_start(data: DataMatrix, config: FitConfig, penalty: PenaltySpec | None,
                  start: int) -> FitResult:
    rng_seed = np.random.SeedSequence([int(config.seed) & 0xFFFFFFFFFFFFFFFF, start])
    resp = initialize_responsibilities(
        data, config.G, config.init, seed=int(rng_seed.generate_state(1)[0])
    )

    weights, means = _stage1_moments(data, resp)
    scatter = weighted_scatter(data, resp, means)
    loadings, noise = initial_covariance(config.structure, scatter, config.q)
    params = MixtureParams(weights, means, loadings, noise, config.structure)

    trace: list[float] = []
    converged = False
    loglik = -np.inf
    for _ in range(config.max_iterations):
        # Stage 1: proportions and (penalized) means from the current resp.
        weights, mu_tilde = _stage1_moments(data, resp)
        if config.penalized:
            means = soft_threshold_means(mu_tilde, params, penalty)
        else:
            means = mu_tilde
        params = replace(params, weights=weights, means=means)

        # Stage 2: loadings and noise from a fresh E-step.
        resp, _ = e_step(data, params)
        scatter = weighted_scatter(data, resp, params.means)
        loadings, noise = update_covariance(config.structure, scatter, params)
        params = replace(params, loadings=loadings, noise=noise)

        # E-step at the updated parameters doubles as the objective evaluation.
        resp, loglik = e_step(data, params)
        if config.penalized:
            trace.append(loglik - penalty_value(params, penalty.lambda_n,
                                                penalty.weights, data.n))
        else:
            trace.append(loglik)
        if len(trace) >= 3 and aitken_converged(trace, config.tolerance):
            converged = True
            break

    pen_loglik = trace[-1] if config.penalized else loglik
    return FitResult(
        params=params,
        resp=resp,
        loglik=loglik,
        penalized_loglik=pen_loglik,
        loglik_trace=np.asarray(trace),
        nonzero_mask=params.means != 0.0,
        converged=converged,
        iterations=len(trace),
    )


def run_aecm(data: DataMatrix, config: FitConfig,
             penalty: PenaltySpec | None = None) -> FitResult:
    """Multi-start AECM fit; returns the start with the highest final objective.

    Starts that collapse a component or hit a numerical failure are abandoned;
    if every start fails a FitError carrying the per-start reasons is raised.
    """
    if config.q >= data.p:
        raise ValueError(f"need q < p, got q={config.q}, p={data.p}")
    if config.penalized:
        if penalty is None:
            raise ValueError("penalized fits require a PenaltySpec")
        if penalty.weights.shape != (config.G, data.p):
            raise ValueError(
                f"penalty weights must be shaped (G, p)=({config.G}, {data.p}), "
                f"got {penalty.weights.shape}"
            )

    best: FitResult | None = None
    failures: list[str] = []
    for start in range(config.n_starts):
        try:
            fit = _single_start(data, config, penalty, start)
        except (EmptyComponentError, NumericalError, InitializationError) as exc:
            failures.append(f"start {start}: {exc}")
            continue
        if best is None or fit.loglik_trace[-1] > best.loglik_trace[-1]:
            best = fit
    if best is None:
        raise FitError(
            f"all {config.n_starts} starts failed for G={config.G}, q={config.q}, "
            f"structure={config.structure.code}",
            diagnostics=failures,
        )
    return best


def run_pilot_penalized(data: DataMatrix, config: FitConfig, gamma: float, c: float,
                        weight_cap: float = 1e8, kappa: float | None = None,
                        pilot: FitResult | None = None) -> tuple[FitResult, FitResult, PenaltySpec]:
    """Unpenalized pilot fit, weights from its means, then the penalized fit.

    Both runs draw their starts from the same seed so labelings stay aligned.
    A precomputed pilot can be passed in when several penalized runs share it.
    """
    if pilot is None:
        pilot = run_aecm(data, replace(config, penalized=False), None)
    # c == 0 switches the penalty off entirely (the schedule itself needs c > 0).
    if c == 0:
        lam = 0.0
    elif gamma == 0.0:
        # Plain-LASSO flavour is a deliberate choice here; the schedule's
        # rate warning is aimed at direct callers.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            lam = lambda_schedule(data.n, data.p, gamma, c, kappa=kappa)
    else:
        lam = lambda_schedule(data.n, data.p, gamma, c, kappa=kappa)
    spec = PenaltySpec(
        lambda_n=lam,
        gamma=gamma,
        weights=compute_weights(pilot.params.means, gamma, weight_cap),
        kappa=kappa if kappa is not None else max(0.0, np.log(data.p) / np.log(data.n)),
        weight_cap=weight_cap,
    )
    fit = run_aecm(data, replace(config, penalized=True), spec)
    fit = replace(fit, pilot_means=pilot.params.means)
    return pilot, fit, spec
