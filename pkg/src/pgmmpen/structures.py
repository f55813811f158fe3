"""Covariance constraint structures and free-parameter counting.

Each component covariance is factored as ``Sigma_g = Lambda_g Lambda_g' + Psi_g``
with ``Lambda_g`` a p x q loading matrix and ``Psi_g`` diagonal.  A structure is
named by three letters: whether the loadings are constrained equal across
components, whether the noise matrix is constrained equal across components,
and whether the noise is isotropic (a multiple of the identity).
"""

from __future__ import annotations

from dataclasses import dataclass

STRUCTURE_CODES = ("CCC", "CCU", "CUC", "CUU", "UCC", "UCU", "UUC", "UUU")


@dataclass(frozen=True)
class CovarianceStructure:
    """One of the eight three-letter covariance constraint patterns."""

    code: str

    def __post_init__(self):
        if self.code not in STRUCTURE_CODES:
            raise ValueError(
                f"unknown covariance structure {self.code!r}; "
                f"expected one of {STRUCTURE_CODES}"
            )

    @property
    def loadings_shared(self) -> bool:
        return self.code[0] == "C"

    @property
    def noise_shared(self) -> bool:
        return self.code[1] == "C"

    @property
    def noise_isotropic(self) -> bool:
        return self.code[2] == "C"


def structure(code: str | CovarianceStructure) -> CovarianceStructure:
    """Coerce a three-letter code into a CovarianceStructure."""
    if isinstance(code, CovarianceStructure):
        return code
    return CovarianceStructure(str(code).upper())


@dataclass(frozen=True)
class ParamCount:
    """Free-parameter breakdown for one model configuration."""

    total: int
    mean_params: int
    weight_params: int
    covariance_params: int


def param_count(struct: str | CovarianceStructure, p: int, q: int, G: int) -> ParamCount:
    """Count free parameters for a G-component model on p variables, q factors.

    A free loading slice contributes ``p*q - q*(q-1)/2`` (a q x q rotation of
    the factors leaves the covariance unchanged); the noise contributes 1, p,
    G, or G*p depending on the shared/isotropic letters.
    """
    struct = structure(struct)
    if G < 1:
        raise ValueError(f"G must be >= 1, got {G}")
    if q < 1 or q >= p:
        raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")

    per_slice = p * q - q * (q - 1) // 2
    loadings = per_slice if struct.loadings_shared else G * per_slice
    if struct.noise_shared:
        noise = 1 if struct.noise_isotropic else p
    else:
        noise = G if struct.noise_isotropic else G * p

    mean_params = G * p
    weight_params = G - 1
    covariance_params = loadings + noise
    return ParamCount(
        total=mean_params + weight_params + covariance_params,
        mean_params=mean_params,
        weight_params=weight_params,
        covariance_params=covariance_params,
    )
