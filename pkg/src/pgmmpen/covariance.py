"""Conditional-maximization updates for loadings and noise under all 8 structures.

Stage 2 of the alternating algorithm works from per-component weighted scatter
matrices.  With the q x p regression matrix ``R_g = L_g' (L_g L_g' + Psi_g)^-1``
and the posterior factor second moment ``T_g = I_q - R_g L_g + R_g S_g R_g'``,
the unconstrained maximizer is ``L_g_new = S_g R_g' T_g^-1`` followed by
``Psi_g_new = diag(S_g - 2 L_new R_g S_g + L_new T_g L_new')``.  Shared-slice
constraints pool the sufficient statistics; the pooling is exact for each
pattern:

* shared loadings + shared noise: pooled scatter ``sum_g (n_g/n) S_g``;
* shared loadings + free noise: the stationarity equation couples components
  through the noise, so rows of the shared loading matrix solve
  ``sum_g (n_g/psi_gi) [S_g R_g']_i = L_i sum_g (n_g/psi_gi) T_g``;
* shared noise: ``Psi = sum_g (n_g/n) diag(...)``;
* isotropic noise: the diagonal is averaged over coordinates.

Every update is the exact maximizer of the stage-2 expected complete-data
log-likelihood within its constraint class, so the objective never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import PSI_FLOOR, DataMatrix, MixtureParams
from .exceptions import EmptyComponentError, NumericalError
from .structures import CovarianceStructure


@dataclass(frozen=True)
class ComponentScatter:
    """Per-component weighted scatter matrices S_g and responsibility totals n_g."""

    matrices: np.ndarray  # (G, p, p)
    counts: np.ndarray    # (G,)

    @property
    def G(self) -> int:
        return self.counts.shape[0]

    @property
    def p(self) -> int:
        return self.matrices.shape[1]


def weighted_scatter(data: DataMatrix, resp: np.ndarray, means: np.ndarray) -> ComponentScatter:
    """S_g = (1/n_g) sum_i z_ig (x_i - mu_g)(x_i - mu_g)' for every component.

    Raises EmptyComponentError as soon as some n_g < 1; the caller's restart
    policy handles it.
    """
    X = data.values
    n, p = X.shape
    G = means.shape[0]
    if resp.shape != (n, G) or means.shape[1] != p:
        raise ValueError("responsibilities/means shapes do not match the data")
    counts = resp.sum(axis=0)
    matrices = np.empty((G, p, p))
    for g in range(G):
        if counts[g] < 1.0:
            raise EmptyComponentError(g, counts[g])
        diff = X - means[g]
        weighted = diff * resp[:, g][:, None]
        s = diff.T @ weighted / counts[g]
        matrices[g] = 0.5 * (s + s.T)  # kill round-off asymmetry
    return ComponentScatter(matrices=matrices, counts=counts)


def _regression_matrix(loadings: np.ndarray, noise: np.ndarray, g: int) -> np.ndarray:
    """R = L' (LL' + Psi)^-1 via the capacitance solve: R = (I + L'Psi^-1 L)^-1 L'Psi^-1."""
    a = loadings / noise[:, None]
    m_small = loadings.T @ a
    m_small[np.diag_indices_from(m_small)] += 1.0
    try:
        return linalg.solve(m_small, a.T, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"capacitance matrix singular in component {g}", component=g
        ) from exc


def _solve_loadings(b: np.ndarray, t: np.ndarray, g: int) -> np.ndarray:
    """Solve L T = B for L (p x q), i.e. L = B T^-1."""
    try:
        return linalg.solve(t.T, b.T).T
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"posterior factor moment singular in component {g}", component=g
        ) from exc


def update_covariance(struct: CovarianceStructure, scatter: ComponentScatter,
                      current: MixtureParams) -> tuple[np.ndarray, np.ndarray]:
    """One CM update of (loadings, noise) under the given constraint pattern.

    Returns (G, p, q) loadings and (G, p) noise; shared slices are exact
    copies and isotropic noise is exactly constant.  The noise floor is
    applied last.
    """
    G, p, q = current.loadings.shape
    if scatter.G != G or scatter.p != p:
        raise ValueError("scatter does not match the current parameter shapes")
    S = scatter.matrices
    frac = scatter.counts / scatter.counts.sum()

    R = np.empty((G, q, p))
    B = np.empty((G, p, q))   # B_g = S_g R_g'
    T = np.empty((G, q, q))   # T_g = I - R_g L_g + R_g S_g R_g'
    for g in range(G):
        R[g] = _regression_matrix(current.loadings[g], current.noise[g], g)
        B[g] = S[g] @ R[g].T
        T[g] = np.eye(q) - R[g] @ current.loadings[g] + R[g] @ B[g]

    loadings = np.empty((G, p, q))
    if not struct.loadings_shared:
        for g in range(G):
            loadings[g] = _solve_loadings(B[g], T[g], g)
    elif struct.noise_shared:
        # Shared R and pooled scatter make a single free-slice update exact.
        s_bar = np.tensordot(frac, S, axes=1)
        b_bar = s_bar @ R[0].T
        t_bar = np.eye(q) - R[0] @ current.loadings[0] + R[0] @ b_bar
        loadings[:] = _solve_loadings(b_bar, t_bar, 0)
    elif struct.noise_isotropic:
        w = frac / current.noise[:, 0]
        shared = _solve_loadings(
            np.tensordot(w, B, axes=1), np.tensordot(w, T, axes=1), 0
        )
        loadings[:] = shared
    else:
        # Per-row weights n_g / psi_gi decouple the rows of the shared slice.
        w = frac[:, None] / current.noise            # (G, p)
        rhs = np.einsum("gp,gpq->pq", w, B)          # (p, q)
        lhs = np.einsum("gp,gkl->pkl", w, T)         # (p, q, q)
        try:
            shared = np.linalg.solve(np.transpose(lhs, (0, 2, 1)), rhs[:, :, None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NumericalError("row-wise loading solve singular") from exc
        loadings[:] = shared

    # diag(S - 2 L R S + L T L') per component, with the new loadings.
    diag = np.empty((G, p))
    for g in range(G):
        ln = loadings[g]
        diag[g] = (
            np.diagonal(S[g])
            - 2.0 * np.einsum("pq,pq->p", ln, B[g])
            + np.einsum("pq,pq->p", ln @ T[g], ln)
        )
    if struct.noise_shared:
        diag = np.tile(frac @ diag, (G, 1))
    if struct.noise_isotropic:
        diag = np.tile(diag.mean(axis=1)[:, None], (1, p))
    noise = np.maximum(diag, PSI_FLOOR)
    return loadings, noise


def initial_covariance(struct: CovarianceStructure, scatter: ComponentScatter,
                       q: int) -> tuple[np.ndarray, np.ndarray]:
    """Spectral starting point: top-q eigenpairs of the pooled scatter.

    The loading columns are eigenvectors scaled by the square roots of their
    eigenvalues; the noise starts from the residual diagonal.  All components
    share the starting slices regardless of structure.
    """
    G, p = scatter.G, scatter.p
    frac = scatter.counts / scatter.counts.sum()
    pooled = np.tensordot(frac, scatter.matrices, axes=1)
    eigvals, eigvecs = np.linalg.eigh(pooled)
    top = np.argsort(eigvals)[::-1][:q]
    lam = eigvecs[:, top] * np.sqrt(np.maximum(eigvals[top], 0.0))
    resid = np.maximum(np.diagonal(pooled) - np.sum(lam * lam, axis=1), PSI_FLOOR)
    if struct.noise_isotropic:
        resid = np.full(p, resid.mean())
    loadings = np.tile(lam, (G, 1, 1))
    noise = np.tile(resid, (G, 1))
    return loadings, noise
