"""Model-selection criteria: BIC, AIC, CAIC, and the penalized pair.

All criteria are oriented so that larger is better.  The penalized criteria
use the log-likelihood (not the penalized objective) evaluated at the
penalized estimate, count only nonzero parameters in the BIC-style term, and
subtract a weighted correction accumulated over the nonzero mean entries:

    2 logL - rho_tilde log n
      - (2 n lambda_n / G) sum_g sum_{j nonzero} w_gj [ |m| + v_j/|m| - sign(m) ]

with m the estimated mean entry and v_j the corresponding diagonal of the
inverse unit information (the component covariance diagonal).  The adaptive
version uses the pilot-based weights; the plain version forces all weights
to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aecm import FitResult
from .penalty import PenaltySpec, information_diag
from .structures import param_count


@dataclass(frozen=True)
class CriterionReport:
    """All five criteria for one fitted configuration."""

    bic: float
    aic: float
    caic: float
    lpbic: float
    alpbic: float
    rho: int
    rho_tilde: int
    per_component_nonzeros: tuple[int, ...]


def bic(loglik: float, rho: int, n: int) -> float:
    if n < 2:
        raise ValueError("need n >= 2")
    return 2.0 * loglik - rho * math.log(n)


def aic(loglik: float, rho: int) -> float:
    return 2.0 * loglik - 2.0 * rho


def caic(loglik: float, rho: int, n: int) -> float:
    if n < 2:
        raise ValueError("need n >= 2")
    return 2.0 * loglik - rho * (math.log(n) + 1.0)


def _penalized_criterion(fit: FitResult, penalty: PenaltySpec, info_diag: np.ndarray,
                         weights: np.ndarray, sign_mode: str) -> float:
    params = fit.params
    mask = fit.nonzero_mask
    if not np.array_equal(mask, params.means != 0.0):
        raise ValueError("nonzero mask is inconsistent with the fitted means")
    info_diag = np.asarray(info_diag, dtype=float)
    if info_diag.shape != params.means.shape:
        raise ValueError("information diagonal must be shaped (G, p)")
    if sign_mode not in ("signed", "unit"):
        raise ValueError(f"sign_mode must be 'signed' or 'unit', got {sign_mode!r}")

    n = fit.n
    G = params.G
    rho = param_count(params.structure, params.p, params.q, G).total
    rho_tilde = rho - int(np.count_nonzero(~mask))

    terms = []
    for g in range(G):
        m = params.means[g][mask[g]]
        if m.size == 0:
            continue
        v = info_diag[g][mask[g]]
        w = weights[g][mask[g]]
        sign_term = np.sign(m) if sign_mode == "signed" else np.ones_like(m)
        terms.extend(w * (np.abs(m) + v / np.abs(m) - sign_term))
    # fsum gives the exactly rounded total, so relabeling components cannot
    # change the criterion even in the last bit
    correction = (2.0 * n * penalty.lambda_n / G) * math.fsum(terms)
    return 2.0 * fit.loglik - rho_tilde * math.log(n) - correction


def alpbic(fit: FitResult, penalty: PenaltySpec, info_diag: np.ndarray,
           sign_mode: str = "signed") -> float:
    """Adaptively weighted penalized criterion at the penalized estimate.

    ``sign_mode='unit'`` replaces the sign(m) term by 1 for every nonzero
    entry (so negative means are not charged extra); the default keeps the
    signed form.
    """
    return _penalized_criterion(fit, penalty, info_diag, penalty.weights, sign_mode)


def lpbic(fit: FitResult, penalty: PenaltySpec, info_diag: np.ndarray,
          sign_mode: str = "signed") -> float:
    """Unweighted (all weights one) penalized criterion."""
    return _penalized_criterion(
        fit, penalty, info_diag, np.ones_like(penalty.weights), sign_mode
    )


def build_report(pilot: FitResult, alpbic_fit: FitResult, alpbic_spec: PenaltySpec,
                 lpbic_fit: FitResult, lpbic_spec: PenaltySpec, n: int) -> CriterionReport:
    """Score one configuration: classic criteria on the pilot, penalized on their fits."""
    params = pilot.params
    rho = param_count(params.structure, params.p, params.q, params.G).total
    mask = alpbic_fit.nonzero_mask
    return CriterionReport(
        bic=bic(pilot.loglik, rho, n),
        aic=aic(pilot.loglik, rho),
        caic=caic(pilot.loglik, rho, n),
        lpbic=lpbic(lpbic_fit, lpbic_spec, information_diag(lpbic_fit.params)),
        alpbic=alpbic(alpbic_fit, alpbic_spec, information_diag(alpbic_fit.params)),
        rho=rho,
        rho_tilde=rho - int(np.count_nonzero(~mask)),
        per_component_nonzeros=tuple(int(v) for v in mask.sum(axis=1)),
    )
