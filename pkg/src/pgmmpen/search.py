"""Grid search over (G, q, structure) and the replicated selection study.

Cells are independent work items: each cell runs an unpenalized pilot (which
scores BIC/AIC/CAIC and supplies the adaptive weights), then one penalized fit
per tuning constant for each of the two penalty flavours, keeping the constant
each criterion likes best.  Per-cell seeds are stable hashes of the base seed
and the cell key, so serial and parallel execution produce identical reports.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .aecm import FitConfig, FitResult, run_aecm, run_pilot_penalized
from .core import DataMatrix
from .criteria import CriterionReport, alpbic, build_report, lpbic
from .exceptions import FitError, PgmmError, SearchError
from .metrics import adjusted_rand_index, map_labels
from .penalty import information_diag
from .simulate import ScenarioSpec, generate_paper_mixture
from .structures import CovarianceStructure, structure

CRITERIA = ("alpbic", "lpbic", "bic", "aic", "caic")

DEFAULT_C_GRID = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class SearchGrid:
    """Model grid plus the shared fit and penalty controls."""

    G_values: tuple[int, ...]
    q_values: tuple[int, ...]
    structures: tuple[CovarianceStructure, ...]
    n_starts: int = 20
    max_iterations: int = 1000
    tolerance: float = 1e-2
    init: str = "kmeans"
    seed: int = 0
    gamma_adaptive: float = 1.0
    gamma_plain: float = 0.0
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    weight_cap: float = 1e8
    kappa: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "G_values", tuple(sorted(set(int(g) for g in self.G_values))))
        object.__setattr__(self, "q_values", tuple(sorted(set(int(q) for q in self.q_values))))
        object.__setattr__(
            self, "structures", tuple(structure(s) for s in self.structures)
        )
        object.__setattr__(self, "c_grid", tuple(float(c) for c in self.c_grid))
        if not (self.G_values and self.q_values and self.structures and self.c_grid):
            raise ValueError("grid sets must be non-empty")

    def cells(self):
        for G in self.G_values:
            for q in self.q_values:
                for s in self.structures:
                    yield G, q, s


@dataclass(frozen=True)
class CellResult:
    """Outcome of one grid cell; ``error`` is set when the cell failed."""

    G: int
    q: int
    structure_code: str
    seed: int
    report: CriterionReport | None = None
    pilot: FitResult | None = None
    adaptive_fit: FitResult | None = None
    plain_fit: FitResult | None = None
    best_c: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def criterion_value(self, name: str) -> float:
        return getattr(self.report, name)

    def fit_for(self, name: str) -> FitResult:
        """The fit whose parameters a given criterion actually scored."""
        if name == "alpbic":
            return self.adaptive_fit
        if name == "lpbic":
            return self.plain_fit
        return self.pilot


@dataclass(frozen=True)
class SearchReport:
    cells: tuple[CellResult, ...]
    best_per_criterion: dict
    ari_per_criterion: dict | None

    def best_cell(self, name: str) -> CellResult:
        return self.cells[self.best_per_criterion[name]]


def cell_seed(base_seed: int, G: int, q: int, code: str) -> int:
    """Stable 63-bit per-cell seed from the base seed and cell key."""
    key = f"{base_seed}|{G}|{q}|{code}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def _fit_cell(data: DataMatrix, grid: SearchGrid, G: int, q: int,
              struct: CovarianceStructure) -> CellResult:
    seed = cell_seed(grid.seed, G, q, struct.code)
    base = CellResult(G=G, q=q, structure_code=struct.code, seed=seed)
    config = FitConfig(
        G=G, q=q, structure=struct,
        max_iterations=grid.max_iterations, tolerance=grid.tolerance,
        n_starts=grid.n_starts, seed=seed, init=grid.init, penalized=False,
    )
    try:
        pilot = run_aecm(data, config, None)
        chosen = {}
        best_c = {}
        for name, gamma, scorer in (
            ("alpbic", grid.gamma_adaptive, alpbic),
            ("lpbic", grid.gamma_plain, lpbic),
        ):
            best_val, best_fit, best_spec, best_const = -np.inf, None, None, None
            for c in grid.c_grid:
                _, fit, spec = run_pilot_penalized(
                    data, config, gamma, c,
                    weight_cap=grid.weight_cap, kappa=grid.kappa, pilot=pilot,
                )
                value = scorer(fit, spec, information_diag(fit.params))
                if value > best_val:
                    best_val, best_fit, best_spec, best_const = value, fit, spec, c
            chosen[name] = (best_fit, best_spec)
            best_c[name] = best_const
        report = build_report(
            pilot, chosen["alpbic"][0], chosen["alpbic"][1],
            chosen["lpbic"][0], chosen["lpbic"][1], data.n,
        )
    except (FitError, PgmmError, ValueError) as exc:
        return replace(base, error=str(exc))
    return replace(
        base,
        report=report,
        pilot=pilot,
        adaptive_fit=chosen["alpbic"][0],
        plain_fit=chosen["lpbic"][0],
        best_c=best_c,
    )


def _fit_cell_args(args) -> CellResult:
    return _fit_cell(*args)


def _select_best(cells) -> dict:
    best = {}
    for name in CRITERIA:
        candidates = [
            ((-c.criterion_value(name), c.report.rho, c.G, c.q, c.structure_code), i)
            for i, c in enumerate(cells)
            if c.ok
        ]
        if candidates:
            best[name] = min(candidates)[1]
    return best


def run_search(data: DataMatrix, grid: SearchGrid, threads: int = 1) -> SearchReport:
    """Fit and score every cell; raise SearchError if none succeeds."""
    keys = list(grid.cells())
    if threads > 1:
        work = [(data, grid, G, q, s) for G, q, s in keys]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cells = tuple(pool.map(_fit_cell_args, work))
    else:
        cells = tuple(_fit_cell(data, grid, G, q, s) for G, q, s in keys)

    best = _select_best(cells)
    if not best:
        raise SearchError(
            "every grid cell failed: " + "; ".join(c.error or "?" for c in cells)
        )

    ari = None
    if data.labels is not None:
        ari = {
            name: adjusted_rand_index(
                data.labels, map_labels(cells[idx].fit_for(name).resp)
            )
            for name, idx in best.items()
        }
    return SearchReport(cells=cells, best_per_criterion=best, ari_per_criterion=ari)


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    seed: int
    selections: dict          # criterion -> (G, q, structure_code, value)
    ari: dict | None
    error: str | None = None


@dataclass(frozen=True)
class ReplicateSummary:
    """Aggregates of a replicated selection study."""

    records: tuple[ReplicateRecord, ...]
    true_G: int
    correct_g: dict           # criterion -> count of replicates selecting true_G
    q_counts: dict            # criterion -> {q: count}
    mean_ari: dict            # criterion -> mean ARI over successful replicates


def summarize_records(records, true_G: int) -> ReplicateSummary:
    """Recount selections and average agreement from per-replicate records."""
    correct = {name: 0 for name in CRITERIA}
    q_counts = {name: {} for name in CRITERIA}
    aris = {name: [] for name in CRITERIA}
    for rec in records:
        if rec.error is not None:
            continue
        for name, (G, q, _, _) in rec.selections.items():
            if G == true_G:
                correct[name] += 1
            q_counts[name][q] = q_counts[name].get(q, 0) + 1
            if rec.ari is not None:
                aris[name].append(rec.ari[name])
    mean_ari = {
        name: (float(np.mean(v)) if v else float("nan")) for name, v in aris.items()
    }
    return ReplicateSummary(
        records=tuple(records),
        true_G=true_G,
        correct_g=correct,
        q_counts=q_counts,
        mean_ari=mean_ari,
    )


def replicate_study(scenario: ScenarioSpec, replicates: int, grid: SearchGrid,
                    threads: int = 1, true_G: int = 3) -> ReplicateSummary:
    """Repeat generate-and-search; aggregate correct-G counts, q picks, mean ARI."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    records = []
    for r in range(replicates):
        rep_seed = cell_seed(scenario.seed, r, 0, "replicate")
        data = generate_paper_mixture(replace(scenario, seed=rep_seed))
        rep_grid = replace(grid, seed=cell_seed(grid.seed, r, 1, "replicate"))
        try:
            report = run_search(data, rep_grid, threads=threads)
        except SearchError as exc:
            records.append(ReplicateRecord(r, rep_seed, {}, None, error=str(exc)))
            continue
        selections = {
            name: (
                report.best_cell(name).G,
                report.best_cell(name).q,
                report.best_cell(name).structure_code,
                report.best_cell(name).criterion_value(name),
            )
            for name in report.best_per_criterion
        }
        records.append(
            ReplicateRecord(r, rep_seed, selections, report.ari_per_criterion)
        )
    return summarize_records(records, true_G)
