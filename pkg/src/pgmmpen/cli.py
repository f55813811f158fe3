"""Command-line interface: simulate, fit, search, replicate, ari.

Reports are JSON with sorted keys so reruns diff cleanly; every report embeds
the fully resolved configuration, the seeds in play, the library version, and
the elapsed wall-clock seconds (the only field allowed to differ between
identical reruns).  Data CSVs are headerless by default, one observation per
row, 17 significant digits.  Exit codes: 0 success, 1 usage or parse error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .aecm import FitConfig, run_aecm, run_pilot_penalized
from .core import DataMatrix
from .criteria import build_report
from .exceptions import PgmmError
from .metrics import adjusted_rand_index, map_labels
from .search import (
    CRITERIA,
    SearchGrid,
    replicate_study,
    run_search,
)
from .simulate import ScenarioSpec, allocate_sizes, generate_paper_mixture, generate_sparse_mixture
from .structures import STRUCTURE_CODES, structure

THREADS_ENV = "PGMMPEN_THREADS"

PAPER_SETTINGS = tuple(
    (n, ratios)
    for n in (40, 100, 200, 500)
    for ratios in ((4, 3, 3), (3, 4, 3), (3, 3, 4))
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}") from None


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):  # before int: bool subclasses int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_report(path, payload):
    text = json.dumps(_jsonify(payload), sort_keys=True, indent=2) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _resolve(args, defaults):
    """Merge precedence: built-in defaults < config file < explicit flags."""
    explicit = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise SystemExit(f"error: unknown config keys {sorted(unknown)}")
        resolved.update(file_values)
    resolved.update(explicit)
    return resolved


def _parse_int_list(text):
    return tuple(int(v) for v in str(text).split(","))


def _parse_float_list(text):
    return tuple(float(v) for v in str(text).split(","))


def _parse_ratios(text):
    parts = tuple(int(v) for v in str(text).split(":"))
    if len(parts) != 3:
        raise SystemExit(f"error: ratios must be three colon-separated integers, got {text!r}")
    return parts


def _parse_structures(text):
    if str(text).lower() == "all":
        return STRUCTURE_CODES
    return tuple(str(text).upper().split(","))


def _load_matrix(path, header=False):
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"error: cannot parse {path}: {exc}") from None
    return values


def _load_labels(path):
    try:
        return np.loadtxt(path, dtype=int, ndmin=1)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"error: cannot parse labels {path}: {exc}") from None


def _standardize(values):
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std[std == 0.0] = 1.0
    return (values - mean) / std


def _fit_summary(fit):
    return {
        "loglik": fit.loglik,
        "penalized_loglik": fit.penalized_loglik,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "nonzero_means": int(fit.nonzero_mask.sum()),
    }


# ---------------------------------------------------------------------------
# simulate

SIMULATE_DEFAULTS = {
    "scenario": "paper",
    "n": 100,
    "p": 200,
    "ratios": (4, 3, 3),
    "scale": None,
    "G": 2,
    "zero_fraction": 0.5,
    "separation": 3.0,
    "seed": 0,
    "out": "simulated",
}


def cmd_simulate(args):
    cfg = _resolve(args, SIMULATE_DEFAULTS)
    start = time.perf_counter()
    if cfg["scenario"] == "paper":
        spec = ScenarioSpec(n=cfg["n"], p=cfg["p"], ratios=tuple(cfg["ratios"]),
                            seed=cfg["seed"], scale=cfg["scale"])
        data = generate_paper_mixture(spec)
        extra = {"sizes": allocate_sizes(cfg["n"], cfg["ratios"]),
                 "effective_p": spec.effective_p}
    else:
        data, true_means = generate_sparse_mixture(
            cfg["n"], cfg["p"], cfg["G"], cfg["zero_fraction"], cfg["separation"],
            cfg["seed"],
        )
        extra = {"true_means": true_means}

    prefix = cfg["out"]
    data_path = f"{prefix}_data.csv"
    labels_path = f"{prefix}_labels.csv"
    meta_path = f"{prefix}_provenance.json"
    try:
        np.savetxt(data_path, data.values, delimiter=",", fmt="%.17g")
        np.savetxt(labels_path, data.labels, fmt="%d")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    _write_report(meta_path, {
        "command": "simulate",
        "config": cfg,
        "n": data.n,
        "p": data.p,
        "files": {"data": data_path, "labels": labels_path},
        "version": __version__,
        "wall_clock_seconds": time.perf_counter() - start,
        **extra,
    })
    return 0


# ---------------------------------------------------------------------------
# fit

FIT_DEFAULTS = {
    "data": None,
    "labels": None,
    "header": False,
    "standardize": False,
    "G": 1,
    "q": 1,
    "structure": "UUU",
    "starts": 20,
    "max_iter": 1000,
    "tol": 1e-2,
    "seed": 0,
    "init": "kmeans",
    "penalty": "on",
    "lambda_c": 1.0,
    "gamma": 1.0,
    "kappa": None,
    "weight_cap": 1e8,
    "out": "-",
}


def cmd_fit(args):
    cfg = _resolve(args, FIT_DEFAULTS)
    if not cfg["data"]:
        raise SystemExit("error: --data is required")
    start = time.perf_counter()
    values = _load_matrix(cfg["data"], header=cfg["header"])
    if cfg["standardize"]:
        values = _standardize(values)
    labels = _load_labels(cfg["labels"]) if cfg["labels"] else None
    data = DataMatrix(values=values, labels=labels)

    config = FitConfig(
        G=cfg["G"], q=cfg["q"], structure=structure(cfg["structure"]),
        max_iterations=cfg["max_iter"], tolerance=cfg["tol"],
        n_starts=cfg["starts"], seed=cfg["seed"], init=cfg["init"],
        penalized=False,
    )
    payload = {
        "command": "fit",
        "config": cfg,
        "n": data.n,
        "p": data.p,
        "version": __version__,
    }
    try:
        if cfg["penalty"] == "on":
            pilot, fit, spec = run_pilot_penalized(
                data, config, cfg["gamma"], cfg["lambda_c"],
                weight_cap=cfg["weight_cap"], kappa=cfg["kappa"],
            )
            _, plain_fit, plain_spec = run_pilot_penalized(
                data, config, 0.0, cfg["lambda_c"],
                weight_cap=cfg["weight_cap"], kappa=cfg["kappa"], pilot=pilot,
            )
            report = build_report(pilot, fit, spec, plain_fit, plain_spec, data.n)
            payload["lambda"] = {"adaptive": spec.lambda_n, "plain": plain_spec.lambda_n,
                                 "kappa": spec.kappa}
            payload["fits"] = {
                "pilot": _fit_summary(pilot),
                "adaptive": _fit_summary(fit),
                "plain": _fit_summary(plain_fit),
            }
            scored = fit
        else:
            from .penalty import PenaltySpec

            fit = run_aecm(data, config, None)
            zero = PenaltySpec(0.0, cfg["gamma"], np.ones_like(fit.params.means))
            report = build_report(fit, fit, zero, fit, zero, data.n)
            payload["fits"] = {"pilot": _fit_summary(fit)}
            scored = fit
    except PgmmError as exc:
        payload["error"] = str(exc)
        _write_report(cfg["out"], payload)
        return 2

    payload["criteria"] = {name: getattr(report, name) for name in CRITERIA}
    payload["rho"] = report.rho
    payload["rho_tilde"] = report.rho_tilde
    payload["per_component_nonzeros"] = list(report.per_component_nonzeros)
    if labels is not None:
        payload["ari"] = adjusted_rand_index(labels, map_labels(scored.resp))
    payload["wall_clock_seconds"] = time.perf_counter() - start
    _write_report(cfg["out"], payload)
    return 0


# ---------------------------------------------------------------------------
# search

SEARCH_DEFAULTS = {
    "data": None,
    "labels": None,
    "header": False,
    "standardize": False,
    "G_values": (1, 2, 3),
    "q_values": (1, 2),
    "structures": STRUCTURE_CODES,
    "starts": 20,
    "max_iter": 1000,
    "tol": 1e-2,
    "seed": 0,
    "init": "kmeans",
    "c_grid": (0.5, 1.0, 2.0),
    "gamma": 1.0,
    "kappa": None,
    "weight_cap": 1e8,
    "threads": None,
    "out": "-",
    "cells_csv": None,
}


def _grid_from_config(cfg) -> SearchGrid:
    return SearchGrid(
        G_values=tuple(cfg["G_values"]),
        q_values=tuple(cfg["q_values"]),
        structures=tuple(structure(s) for s in cfg["structures"]),
        n_starts=cfg["starts"],
        max_iterations=cfg["max_iter"],
        tolerance=cfg["tol"],
        init=cfg["init"],
        seed=cfg["seed"],
        gamma_adaptive=cfg["gamma"],
        c_grid=tuple(cfg["c_grid"]),
        weight_cap=cfg["weight_cap"],
        kappa=cfg["kappa"],
    )


def _threads(cfg):
    if cfg.get("threads"):
        return int(cfg["threads"])
    return int(os.environ.get(THREADS_ENV, "1"))


def _cell_payload(cell):
    entry = {
        "G": cell.G,
        "q": cell.q,
        "structure": cell.structure_code,
        "seed": cell.seed,
    }
    if not cell.ok:
        entry["error"] = cell.error
        return entry
    entry.update({
        "criteria": {name: cell.criterion_value(name) for name in CRITERIA},
        "rho": cell.report.rho,
        "rho_tilde": cell.report.rho_tilde,
        "per_component_nonzeros": list(cell.report.per_component_nonzeros),
        "best_c": cell.best_c,
        "pilot": _fit_summary(cell.pilot),
        "adaptive": _fit_summary(cell.adaptive_fit),
        "plain": _fit_summary(cell.plain_fit),
    })
    return entry


def _search_payload(report):
    best = {}
    for name, idx in report.best_per_criterion.items():
        cell = report.cells[idx]
        best[name] = {
            "G": cell.G,
            "q": cell.q,
            "structure": cell.structure_code,
            "value": cell.criterion_value(name),
        }
    payload = {
        "cells": [_cell_payload(c) for c in report.cells],
        "best_per_criterion": best,
    }
    if report.ari_per_criterion is not None:
        payload["ari_per_criterion"] = report.ari_per_criterion
    return payload


def cmd_search(args):
    cfg = _resolve(args, SEARCH_DEFAULTS)
    if not cfg["data"]:
        raise SystemExit("error: --data is required")
    start = time.perf_counter()
    values = _load_matrix(cfg["data"], header=cfg["header"])
    if cfg["standardize"]:
        values = _standardize(values)
    labels = _load_labels(cfg["labels"]) if cfg["labels"] else None
    data = DataMatrix(values=values, labels=labels)

    payload = {
        "command": "search",
        "config": cfg,
        "n": data.n,
        "p": data.p,
        "version": __version__,
    }
    try:
        report = run_search(data, _grid_from_config(cfg), threads=_threads(cfg))
    except PgmmError as exc:
        payload["error"] = str(exc)
        _write_report(cfg["out"], payload)
        return 2

    payload.update(_search_payload(report))
    payload["wall_clock_seconds"] = time.perf_counter() - start
    _write_report(cfg["out"], payload)

    if cfg["cells_csv"]:
        rows = ["G,q,structure," + ",".join(CRITERIA) + ",rho,rho_tilde,error"]
        for cell in report.cells:
            fields = [str(cell.G), str(cell.q), cell.structure_code]
            if cell.ok:
                fields += [f"{cell.criterion_value(n):.17g}" for n in CRITERIA]
                fields += [str(cell.report.rho), str(cell.report.rho_tilde), ""]
            else:
                fields += [""] * (len(CRITERIA) + 2)
                fields.append(str(cell.error).replace(",", ";"))
            rows.append(",".join(fields))
        with open(cfg["cells_csv"], "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
    return 0


# ---------------------------------------------------------------------------
# replicate

REPLICATE_DEFAULTS = {
    "replicates": 5,
    "n": 100,
    "p": 200,
    "ratios": (4, 3, 3),
    "scale": None,
    "paper_settings": False,
    "true_G": 3,
    "G_values": (1, 2, 3, 4),
    "q_values": (1, 2, 3, 4, 5),
    "structures": ("CCC", "CUC", "CUU", "CCU"),
    "starts": 20,
    "max_iter": 1000,
    "tol": 1e-2,
    "seed": 0,
    "init": "kmeans",
    "c_grid": (0.5, 1.0, 2.0),
    "gamma": 1.0,
    "kappa": None,
    "weight_cap": 1e8,
    "threads": None,
    "out": "-",
}


def _summary_payload(summary):
    return {
        "correct_G": summary.correct_g,
        "true_G": summary.true_G,
        "q_counts": {name: dict(sorted(v.items())) for name, v in summary.q_counts.items()},
        "mean_ari": summary.mean_ari,
        "replicates": [
            {
                "replicate": rec.replicate,
                "seed": rec.seed,
                "error": rec.error,
                "selections": {
                    name: {"G": G, "q": q, "structure": code, "value": value}
                    for name, (G, q, code, value) in rec.selections.items()
                },
                "ari": rec.ari,
            }
            for rec in summary.records
        ],
    }


def cmd_replicate(args):
    cfg = _resolve(args, REPLICATE_DEFAULTS)
    start = time.perf_counter()
    grid = _grid_from_config(cfg)
    threads = _threads(cfg)
    settings = (
        PAPER_SETTINGS if cfg["paper_settings"] else ((cfg["n"], tuple(cfg["ratios"])),)
    )
    payload = {
        "command": "replicate",
        "config": cfg,
        "version": __version__,
        "settings": {},
    }
    status = 0
    for n, ratios in settings:
        key = f"n={n},ratios={ratios[0]}:{ratios[1]}:{ratios[2]}"
        scenario = ScenarioSpec(n=n, p=cfg["p"], ratios=ratios, seed=cfg["seed"],
                                scale=cfg["scale"])
        try:
            summary = replicate_study(scenario, cfg["replicates"], grid,
                                      threads=threads, true_G=cfg["true_G"])
        except PgmmError as exc:
            payload["settings"][key] = {"error": str(exc)}
            status = 2
            continue
        payload["settings"][key] = _summary_payload(summary)
    payload["wall_clock_seconds"] = time.perf_counter() - start
    _write_report(cfg["out"], payload)
    return status


# ---------------------------------------------------------------------------
# ari

def cmd_ari(args):
    a = _load_labels(args.labels_a)
    b = _load_labels(args.labels_b)
    try:
        value = adjusted_rand_index(a, b)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}") from None
    print(f"{value:.6f}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="pgmmpen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    sim = sub.add_parser("simulate", help="generate a benchmark data set")
    sim.add_argument("--paper", dest="scenario", action="store_const", const="paper",
                     default=S, help="three-component benchmark scenario")
    sim.add_argument("--sparse", dest="scenario", action="store_const", const="sparse",
                     help="sparse-means scenario with identity covariance")
    sim.add_argument("--n", type=int, default=S)
    sim.add_argument("--p", type=int, default=S)
    sim.add_argument("--ratios", type=_parse_ratios, default=S, metavar="A:B:C")
    sim.add_argument("--scale", type=float, default=S)
    sim.add_argument("--G", type=int, default=S, help="components (sparse scenario)")
    sim.add_argument("--zero-fraction", dest="zero_fraction", type=float, default=S)
    sim.add_argument("--separation", type=float, default=S)
    sim.add_argument("--seed", type=int, default=S)
    sim.add_argument("--out", default=S, help="output file prefix")
    sim.add_argument("--config", default=None, help="JSON config file")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit one model configuration")
    fit.add_argument("--data", default=S)
    fit.add_argument("--labels", default=S)
    fit.add_argument("--header", action="store_true", default=S)
    fit.add_argument("--standardize", action="store_true", default=S)
    fit.add_argument("--G", type=int, default=S)
    fit.add_argument("--q", type=int, default=S)
    fit.add_argument("--structure", default=S, choices=STRUCTURE_CODES)
    fit.add_argument("--starts", type=int, default=S)
    fit.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    fit.add_argument("--tol", type=float, default=S)
    fit.add_argument("--seed", type=int, default=S)
    fit.add_argument("--init", default=S, choices=("kmeans", "random"))
    fit.add_argument("--penalty", default=S, choices=("on", "off"))
    fit.add_argument("--lambda-c", dest="lambda_c", type=float, default=S)
    fit.add_argument("--gamma", type=float, default=S)
    fit.add_argument("--kappa", type=float, default=S)
    fit.add_argument("--weight-cap", dest="weight_cap", type=float, default=S)
    fit.add_argument("--out", default=S)
    fit.add_argument("--config", default=None)
    fit.set_defaults(func=cmd_fit)

    search = sub.add_parser("search", help="grid search over (G, q, structure)")
    search.add_argument("--data", default=S)
    search.add_argument("--labels", default=S)
    search.add_argument("--header", action="store_true", default=S)
    search.add_argument("--standardize", action="store_true", default=S)
    search.add_argument("--G-values", dest="G_values", type=_parse_int_list, default=S)
    search.add_argument("--q-values", dest="q_values", type=_parse_int_list, default=S)
    search.add_argument("--structures", type=_parse_structures, default=S,
                        help="comma-separated codes or 'all'")
    search.add_argument("--starts", type=int, default=S)
    search.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    search.add_argument("--tol", type=float, default=S)
    search.add_argument("--seed", type=int, default=S)
    search.add_argument("--init", default=S, choices=("kmeans", "random"))
    search.add_argument("--c-grid", dest="c_grid", type=_parse_float_list, default=S)
    search.add_argument("--gamma", type=float, default=S)
    search.add_argument("--kappa", type=float, default=S)
    search.add_argument("--weight-cap", dest="weight_cap", type=float, default=S)
    search.add_argument("--threads", type=int, default=S)
    search.add_argument("--out", default=S)
    search.add_argument("--cells-csv", dest="cells_csv", default=S)
    search.add_argument("--config", default=None)
    search.set_defaults(func=cmd_search)

    rep = sub.add_parser("replicate", help="replicated simulate-and-search study")
    rep.add_argument("--replicates", type=int, default=S)
    rep.add_argument("--n", type=int, default=S)
    rep.add_argument("--p", type=int, default=S)
    rep.add_argument("--ratios", type=_parse_ratios, default=S, metavar="A:B:C")
    rep.add_argument("--scale", type=float, default=S)
    rep.add_argument("--paper-settings", dest="paper_settings", action="store_true",
                     default=S, help="run all 12 (n, ratio) settings")
    rep.add_argument("--true-G", dest="true_G", type=int, default=S)
    rep.add_argument("--G-values", dest="G_values", type=_parse_int_list, default=S)
    rep.add_argument("--q-values", dest="q_values", type=_parse_int_list, default=S)
    rep.add_argument("--structures", type=_parse_structures, default=S)
    rep.add_argument("--starts", type=int, default=S)
    rep.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    rep.add_argument("--tol", type=float, default=S)
    rep.add_argument("--seed", type=int, default=S)
    rep.add_argument("--init", default=S, choices=("kmeans", "random"))
    rep.add_argument("--c-grid", dest="c_grid", type=_parse_float_list, default=S)
    rep.add_argument("--gamma", type=float, default=S)
    rep.add_argument("--kappa", type=float, default=S)
    rep.add_argument("--weight-cap", dest="weight_cap", type=float, default=S)
    rep.add_argument("--threads", type=int, default=S)
    rep.add_argument("--out", default=S)
    rep.add_argument("--config", default=None)
    rep.set_defaults(func=cmd_replicate)

    ari = sub.add_parser("ari", help="adjusted Rand index of two label files")
    ari.add_argument("labels_a")
    ari.add_argument("labels_b")
    ari.set_defaults(func=cmd_ari)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return exc.code if exc.code is not None else 0


if __name__ == "__main__":
    sys.exit(main())
