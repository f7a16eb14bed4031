"""Experiment orchestration: generate, encode, decode, classify, summarize.

A run iterates measurement periods.  Each period's generated events are
filtered through the limiter state built from the previous period's
reports, encoded into a snapshot, decoded against the router-collected
candidate host list, and joined with ground truth.  When both sketch
kinds are requested they consume the same generated traffic so their
accuracy is directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .pipeline import (
    HostReport,
    RateLimiterState,
    SketchSnapshot,
    attach_ground_truth,
    candidate_hosts,
    classify_and_limit,
    nmc_decode,
    router_encode,
)
from .traffic import EventBatch, GroundTruth, Population


@dataclass
class PeriodResult:
    period: int
    snapshot: SketchSnapshot
    hosts: np.ndarray
    reports: list[HostReport]
    suppressed: int
    events: EventBatch | None = None  # kept only when event dumps are on


@dataclass
class KindResult:
    kind: str
    periods: list[PeriodResult] = field(default_factory=list)

    def summary_rows(self, truths: list[GroundTruth]) -> list[dict]:
        return [
            summarize_period(p, truths[i], kind=self.kind)
            for i, p in enumerate(self.periods)
        ]


def summarize_period(result: PeriodResult, truth: GroundTruth, kind: str = "") -> dict:
    """Aggregate accuracy and separation metrics for one period."""
    by_src = truth.by_src()
    worm_rel, normal_abs = [], []
    worm_limited = normal_limited = worms_seen = normals_seen = 0
    saturated = 0
    for rep in result.reports:
        entry = by_src.get(rep.src)
        if entry is None:
            continue
        k_true, label = entry[2], entry[3]
        err = abs(rep.k_hat - k_true)
        if label == "worm":
            worms_seen += 1
            worm_limited += rep.limited
            if k_true > 0:
                worm_rel.append(err / k_true)
        else:
            normals_seen += 1
            normal_limited += rep.limited
            normal_abs.append(err)
        saturated += rep.saturated_syn or rep.saturated_ack
    n_hosts = len(result.reports)
    population = int(truth.src.size)
    return {
        "kind": kind,
        "period": result.period,
        "hosts": n_hosts,
        "bits_per_host": (
            result.snapshot.per_direction_bits / population if population else 0.0
        ),
        "worm_hosts": worms_seen,
        "worm_mean_rel_error": float(np.mean(worm_rel)) if worm_rel else 0.0,
        "normal_mean_abs_error": float(np.mean(normal_abs)) if normal_abs else 0.0,
        "worms_limited": worm_limited,
        "normals_unrestricted_frac": (
            (normals_seen - normal_limited) / normals_seen if normals_seen else 1.0
        ),
        "saturated_hosts": saturated,
        "suppressed_events": result.suppressed,
    }


SUMMARY_COLUMNS = [
    "kind", "period", "hosts", "bits_per_host", "worm_hosts",
    "worm_mean_rel_error", "normal_mean_abs_error", "worms_limited",
    "normals_unrestricted_frac", "saturated_hosts", "suppressed_events",
]


def write_summary_csv(rows: list[dict], fh) -> None:
    fh.write(",".join(SUMMARY_COLUMNS) + "\n")
    for row in rows:
        cells = []
        for col in SUMMARY_COLUMNS:
            value = row[col]
            cells.append(f"{value:.6f}" if isinstance(value, float) else str(value))
        fh.write(",".join(cells) + "\n")


def run_simulation(
    config: RunConfig, keep_events: bool = False
) -> tuple[dict[str, KindResult], list[GroundTruth]]:
    """Run the full pipeline for every requested sketch kind.

    Returns per-kind period results plus the shared ground truths.
    """
    population = Population(config.population_spec())
    params = {
        "bitmap": config.bitmap_params,
        "dsra": config.register_params,
    }
    kinds = config.sketch_kinds()
    results = {kind: KindResult(kind) for kind in kinds}
    limiters = {
        kind: RateLimiterState(config.limiter_capacity, config.limiter_refill)
        for kind in kinds
    }
    previous: dict[str, list[HostReport]] = {kind: [] for kind in kinds}
    truths: list[GroundTruth] = []
    for period in range(config.periods):
        events, truth = population.generate_period(period)
        truths.append(truth)
        truth_map = truth.by_src()
        for kind in kinds:
            allowed, suppressed = classify_and_limit(
                previous[kind], limiters[kind], events
            )
            snapshot = router_encode(params[kind](), allowed)
            hosts = candidate_hosts(allowed)
            reports = nmc_decode(snapshot, hosts, config.threshold_per_period)
            attach_ground_truth(reports, truth_map)
            previous[kind] = reports
            results[kind].periods.append(
                PeriodResult(
                    period, snapshot, hosts, reports, suppressed,
                    events=allowed if keep_events else None,
                )
            )
    return results, truths


def scale_to_budget(config: RunConfig, budget_bits: int) -> RunConfig:
    """Same run at a different per-direction memory budget.

    The bitmap gets budget_bits bits; the register array gets
    budget_bits / reg_width registers; widths stay put.
    """
    from dataclasses import replace

    return replace(
        config,
        bitmap_bits=int(budget_bits),
        register_count=int(budget_bits) // config.reg_width,
    )


def run_compare(config: RunConfig, budgets_bits: list[int]) -> list[dict]:
    """Both sketch kinds at each memory budget over identical traffic."""
    from dataclasses import replace

    rows: list[dict] = []
    for budget in budgets_bits:
        scaled = replace(scale_to_budget(config, budget), sketch="both")
        results, truths = run_simulation(scaled)
        for kind in ("bitmap", "dsra"):
            for i, period_result in enumerate(results[kind].periods):
                row = summarize_period(period_result, truths[i], kind=kind)
                row["budget_bits"] = budget
                rows.append(row)
    return rows


COMPARE_COLUMNS = ["budget_bits"] + SUMMARY_COLUMNS


def write_compare_csv(rows: list[dict], fh) -> None:
    fh.write(",".join(COMPARE_COLUMNS) + "\n")
    for row in rows:
        cells = []
        for col in COMPARE_COLUMNS:
            value = row[col]
            cells.append(f"{value:.6f}" if isinstance(value, float) else str(value))
        fh.write(",".join(cells) + "\n")
