"""Experiment harness: method-by-order grids with exact-distribution metrics.

run_experiment drives every configured (method, order-kind) cell for M
samples each, with a fresh dimension and generation order per sample.
Because the per-sample random streams are keyed by (order kind, sample
index) and never by method, every method inside one cell row sees the
same dimensions, orders, and propagation uniforms; single-particle SMC
cells therefore reproduce the corresponding sequential cells bit for bit.

Metrics are computed against the exact tabular distributions: total
variation between the empirical histogram and the target, validity
fraction (graph domains), uniqueness fraction, evaluation counters, and
ESS summaries for the particle methods. Counter closed forms are asserted
after every run: D model evaluations for the sequential samplers (N times
that for the particle ones) and the per-candidate discriminator budget,
with zero-probability candidates allowed as a deficit. A failing cell is
recorded with its error and the run continues.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import (
    FitSource,
    GraphDomainConfig,
    RunConfig,
    SequenceDomainConfig,
    TableSource,
    ValiditySource,
)
from .core import EvalCounters, GenerationOrder, MaskedSample
from .discriminator import (
    ConstantDiscriminator,
    CorruptedDiscriminator,
    OptimalDiscriminator,
    constant_schedule,
    final_step_exact,
)
from .graphs import (
    DimensionDistribution,
    GraphLayout,
    OrderKind,
    fit_valid_graphs,
    graph_from_json,
    graph_validity,
    sample_order,
)
from .models import MAX_STATES, TabularJoint, fit_tabular, perturb
from .rng import DIMENSION, FIT, ORDER, KeyedRng
from .samplers import ardg_sample, ardm_sample
from .smc import bsdg_sample, fadg_sample

__all__ = [
    "EvalCounters",
    "empirical_distribution",
    "tv_distance",
    "Problem",
    "build_problem",
    "CellResult",
    "RunReport",
    "run_experiment",
]


def empirical_distribution(samples, categories=None) -> np.ndarray:
    """Normalized histogram of complete samples over their product space."""
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    if categories is None:
        categories = samples[0].categories
    categories = tuple(int(c) for c in categories)
    if math.prod(categories) > MAX_STATES:
        raise ValueError(
            f"product space has {math.prod(categories)} states, cap is {MAX_STATES}"
        )
    counts = np.zeros(categories)
    for s in samples:
        if not isinstance(s, MaskedSample) or not s.is_complete:
            raise ValueError("histogram needs complete samples")
        if s.categories != categories:
            raise ValueError("samples disagree on categories")
        counts[s.values] += 1.0
    return counts / len(samples)


def tv_distance(empirical, exact) -> float:
    """Total variation: half the L1 gap between two distributions."""
    if isinstance(exact, TabularJoint):
        exact = exact.table
    p = np.asarray(empirical, dtype=np.float64)
    q = np.asarray(exact, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return kernels.tv_distance_flat(p.ravel(), q.ravel())


def _make_discriminator(cfg, p_data, p_model):
    if cfg.kind == "constant":
        return ConstantDiscriminator(cfg.logit)
    base = OptimalDiscriminator(p_data, p_model)
    if cfg.kind == "optimal":
        return base
    schedule = final_step_exact if cfg.schedule == "final_step_exact" else constant_schedule
    return CorruptedDiscriminator(base, cfg.epsilon, schedule)


@dataclass
class Problem:
    """Everything run_experiment needs, keyed by node count.

    Sequence domains use the single key 0. full_support[n] records whether
    p_model covers the whole product space, which decides whether the
    discriminator-counter closed form is an equality or an upper bound.
    """

    kind: str
    dim_dist: DimensionDistribution | None
    layouts: dict[int, GraphLayout]
    p_data: dict[int, TabularJoint]
    p_model: dict[int, TabularJoint]
    disc: dict[int, object]
    full_support: dict[int, bool]

    def keys(self):
        return sorted(self.p_data)


def _load_json(path):
    import json

    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_jsonl(path):
    import json

    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _sequence_p_data(config: RunConfig) -> TabularJoint:
    source = config.data_source
    categories = config.domain.categories
    if isinstance(source, TableSource):
        doc = (
            _load_json(source.path)
            if source.path is not None
            else {"categories": list(source.categories), "probs": list(source.probs)}
        )
        joint = TabularJoint.from_json(doc)
        if joint.categories != categories:
            raise ValueError(
                "table categories do not match the domain categories"
            )
        return joint
    if isinstance(source, FitSource):
        rows = _load_jsonl(source.path)
        samples = [
            MaskedSample(categories, tuple(int(v) for v in row["values"]))
            for row in rows
        ]
        return fit_tabular(samples, source.smoothing, categories)
    raise ValueError("sequence domains need a table or fit source")


def _graph_p_data(config: RunConfig, root: KeyedRng) -> dict[int, TabularJoint]:
    domain: GraphDomainConfig = config.domain
    source = config.data_source
    layouts = {
        n: GraphLayout(n, domain.node_categories, domain.edge_categories)
        for n, _ in domain.node_count_probs
    }
    if isinstance(source, ValiditySource):
        return {
            n: fit_valid_graphs(
                layouts[n], source.num_samples, root.stream(FIT, n), source.smoothing
            )
            for n in layouts
        }
    if isinstance(source, FitSource):
        rows = _load_jsonl(source.path)
        by_n: dict[int, list[MaskedSample]] = {n: [] for n in layouts}
        for row in rows:
            sample, layout = graph_from_json(
                row, domain.node_categories, domain.edge_categories
            )
            if layout.n in by_n:
                by_n[layout.n].append(sample)
        out = {}
        for n, layout in layouts.items():
            if not by_n[n] and source.smoothing == 0.0:
                raise ValueError(
                    f"no samples with {n} nodes and smoothing is 0"
                )
            out[n] = fit_tabular(by_n[n], source.smoothing, layout.categories)
        return out
    # table source: only meaningful for a single node count
    if len(layouts) != 1:
        raise ValueError("a table source needs a single-node-count graph domain")
    (n,) = layouts
    doc = (
        _load_json(source.path)
        if source.path is not None
        else {"categories": list(source.categories), "probs": list(source.probs)}
    )
    joint = TabularJoint.from_json(doc)
    if joint.categories != layouts[n].categories:
        raise ValueError("table categories do not match the graph layout")
    return {n: joint}


def build_problem(config: RunConfig) -> Problem:
    """Materialize distributions and discriminators for every node count."""
    root = KeyedRng(config.seed)
    if isinstance(config.domain, SequenceDomainConfig):
        p_data = {0: _sequence_p_data(config)}
        layouts = {}
        dim_dist = None
    else:
        p_data = _graph_p_data(config, root)
        layouts = {
            n: GraphLayout(
                n, config.domain.node_categories, config.domain.edge_categories
            )
            for n in p_data
        }
        dim_dist = DimensionDistribution.from_mapping(
            dict(config.domain.node_count_probs)
        )
    p_model = {
        n: perturb(
            joint, config.perturbation.temperature, config.perturbation.uniform_mix
        )
        for n, joint in p_data.items()
    }
    disc = {
        n: _make_discriminator(config.discriminator, p_data[n], p_model[n])
        for n in p_data
    }
    full_support = {
        n: bool(np.all(joint.table > 0.0)) for n, joint in p_model.items()
    }
    return Problem(
        kind="sequence" if isinstance(config.domain, SequenceDomainConfig) else "graph",
        dim_dist=dim_dist,
        layouts=layouts,
        p_data=p_data,
        p_model=p_model,
        disc=disc,
        full_support=full_support,
    )


def _expected_disc_budget(model: TabularJoint, order: GenerationOrder) -> int:
    """Sum of category counts along the order (the full-support budget)."""
    return sum(model.categories[pos] for pos in order)


def _check_counters(
    method: str,
    counters: EvalCounters,
    model: TabularJoint,
    order: GenerationOrder,
    n_particles: int,
    full_support: bool,
) -> None:
    d = model.dimension
    budget = _expected_disc_budget(model, order)
    if method == "ardm":
        expect_model, expect_disc, exact_disc = d, 0, True
    elif method == "ardg":
        expect_model, expect_disc, exact_disc = d, budget, full_support
    elif method == "bsdg":
        expect_model = n_particles * d
        expect_disc, exact_disc = n_particles * d, True
    else:
        expect_model = n_particles * d
        expect_disc, exact_disc = n_particles * budget, full_support
    if counters.model_evals != expect_model:
        raise RuntimeError(
            f"{method}: {counters.model_evals} model evals, expected {expect_model}"
        )
    if exact_disc:
        if counters.disc_evals != expect_disc:
            raise RuntimeError(
                f"{method}: {counters.disc_evals} disc evals, expected {expect_disc}"
            )
    elif counters.disc_evals > expect_disc:
        raise RuntimeError(
            f"{method}: {counters.disc_evals} disc evals exceed budget {expect_disc}"
        )


@dataclass
class CellResult:
    method: str
    order_kind: str
    n_particles: int
    num_samples: int
    seed: int
    status: str = "ok"
    error: str | None = None
    metrics: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "order_kind": self.order_kind,
            "n_particles": self.n_particles,
            "num_samples": self.num_samples,
            "seed": self.seed,
            "status": self.status,
            "error": self.error,
            "metrics": dict(self.metrics),
            "wall_clock_seconds": self.wall_clock_seconds,
        }


@dataclass
class RunReport:
    config: dict
    seed: int
    backend: str
    cells: list[CellResult]
    wall_clock_seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "backend": self.backend,
            "cells": [c.to_json() for c in self.cells],
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    def csv_rows(self):
        """Flat rows: method, order, N, metric, value, samples, seed."""
        rows = [("method", "order", "n_particles", "metric", "value", "samples", "seed")]
        for c in self.cells:
            base = (c.method, c.order_kind, c.n_particles)
            tail = (c.num_samples, c.seed)
            if c.status != "ok":
                rows.append(base + ("failed", 1.0) + tail)
                continue
            for name, value in c.metrics.items():
                if value is None:
                    continue
                rows.append(base + (name, value) + tail)
        return rows


def _run_one(method, problem, config, order_kind_idx, sample_idx, root):
    """One (dimension, order, sample) draw; returns (n, run, smc_diag)."""
    srng = root.child(order_kind_idx, sample_idx)
    if problem.kind == "graph":
        n = problem.dim_dist.sample(srng.stream(DIMENSION))
        layout = problem.layouts[n]
        order = sample_order(
            layout, OrderKind(config.order_kinds[order_kind_idx]), srng.stream(ORDER)
        )
    else:
        n = 0
        d = problem.p_model[0].dimension
        perm = srng.stream(ORDER).permutation(d)
        order = GenerationOrder(tuple(int(p) for p in perm))
    model = problem.p_model[n]
    disc = problem.disc[n]
    if method == "ardm":
        run = ardm_sample(model, order, srng)
        counters, diag = run.counters, None
    elif method == "ardg":
        run = ardg_sample(model, disc, order, srng)
        counters, diag = run.counters, None
    elif method == "bsdg":
        run = bsdg_sample(
            model, disc, order, config.num_particles, config.ess_threshold, srng
        )
        counters, diag = run.diagnostics.counters, run.diagnostics
    elif method == "fadg":
        run = fadg_sample(
            model, disc, order, config.num_particles, config.ess_threshold, srng
        )
        counters, diag = run.diagnostics.counters, run.diagnostics
    else:
        raise ValueError(f"unknown method {method!r}")
    n_particles = config.num_particles if method in ("bsdg", "fadg") else 1
    _check_counters(
        method, counters, model, order, n_particles, problem.full_support[n]
    )
    return n, run.sample, counters, diag


def _cell_metrics(problem, config, samples_by_n, counters, diags):
    total = sum(len(v) for v in samples_by_n.values())
    metrics: dict = {}
    # mixture TV over (dimension, value) space
    tv = 0.0
    for n in problem.keys():
        drawn = samples_by_n.get(n, [])
        p_n = 1.0 if problem.kind == "sequence" else problem.dim_dist.prob_of(n)
        exact = problem.p_data[n].table
        if drawn:
            hist = empirical_distribution(drawn, problem.p_data[n].categories)
            tv += 0.5 * float(np.abs(hist * (len(drawn) / total) - p_n * exact).sum())
        else:
            tv += 0.5 * float(p_n)
    metrics["tv_distance"] = tv
    if problem.kind == "graph":
        valid = sum(
            graph_validity(s, problem.layouts[n]).valid
            for n, drawn in samples_by_n.items()
            for s in drawn
        )
        metrics["validity"] = valid / total
    distinct = {
        (n, s.values) for n, drawn in samples_by_n.items() for s in drawn
    }
    metrics["uniqueness"] = len(distinct) / total
    metrics["model_evals"] = counters.model_evals
    metrics["disc_evals"] = counters.disc_evals
    if diags:
        ess_all = [e for d in diags for e in d.ess_trace]
        events = sum(sum(d.resampled) for d in diags)
        checks = sum(len(d.resampled) for d in diags)
        metrics["ess_mean"] = float(np.mean(ess_all))
        metrics["ess_min"] = float(np.min(ess_all))
        metrics["resample_rate"] = events / checks if checks else 0.0
    return metrics


def _run_cell(problem, config, method, order_kind_idx, root) -> CellResult:
    cell = CellResult(
        method=method,
        order_kind=config.order_kinds[order_kind_idx],
        n_particles=config.num_particles if method in ("bsdg", "fadg") else 1,
        num_samples=config.num_samples,
        seed=config.seed,
    )
    started = time.perf_counter()
    try:
        samples_by_n: dict[int, list[MaskedSample]] = {}
        counters = EvalCounters()
        diags = []
        for m in range(config.num_samples):
            n, sample, run_counters, diag = _run_one(
                method, problem, config, order_kind_idx, m, root
            )
            samples_by_n.setdefault(n, []).append(sample)
            counters.merge(run_counters)
            if diag is not None:
                diags.append(diag)
        if config.num_samples > 0:
            cell.metrics = _cell_metrics(problem, config, samples_by_n, counters, diags)
    except Exception as err:  # noqa: BLE001 - cell failures are data
        cell.status = "failed"
        cell.error = f"{type(err).__name__}: {err}"
    cell.wall_clock_seconds = time.perf_counter() - started
    return cell


def run_experiment(config: RunConfig, problem: Problem | None = None) -> RunReport:
    """Run the full method-by-order grid described by the config.

    The report is a pure function of (config, seed, backend): rerunning
    reproduces it bit for bit apart from the wall-clock fields.
    """
    started = time.perf_counter()
    if problem is None:
        problem = build_problem(config)
    root = KeyedRng(config.seed)
    jobs = [
        (method, idx)
        for method in config.methods
        for idx in range(len(config.order_kinds))
    ]
    threads = config.resolved_threads()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(
                pool.map(
                    lambda job: _run_cell(problem, config, job[0], job[1], root), jobs
                )
            )
    else:
        cells = [_run_cell(problem, config, method, idx, root) for method, idx in jobs]
    return RunReport(
        config=config.to_dict(),
        seed=config.seed,
        backend=kernels.get_backend(),
        cells=cells,
        wall_clock_seconds=time.perf_counter() - started,
    )
