"""Experiment harness: seeded instance generation, deviation injection,
mechanism execution, and report assembly.

All randomness flows through named, per-(seed, round) streams so reports
are byte-identical across reruns and independent of scheduling.  Wall
clock is deliberately kept out of serialized reports for the same
reason.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import auction, estimators, notifier, quality
from .errors import ConfigError
from .graph import SocialGraph, build_graph, load_edge_list
from .notifier import Numeric, as_fraction
from .report import MechanismReport

TIER1 = ("tenm", "ntbfm", "psm")
TIER2_QUALITY = ("ectai", "avr")
TIER2_AUCTION = ("wipd", "greedy")
MECHANISMS = TIER1 + TIER2_QUALITY + TIER2_AUCTION


def stream(*key) -> random.Random:
    """Named deterministic RNG stream (string seeds hash via sha512)."""
    return random.Random(":".join(str(k) for k in key))


@dataclass
class ExperimentConfig:
    mechanism: str
    graph_path: str | None = None
    synthetic_n: int = 50
    edge_prob: float = 0.3
    cost_lo: int = 20
    cost_hi: int = 50
    budget: Numeric = 1000
    delta: Numeric = 2
    epsilon: Numeric = 1
    seed: int = 0
    rounds: int = 5
    deviation_frac: float = 0.0
    deviation_delta: int = 5
    deviation_factor: Numeric = Fraction(6, 5)
    dist: str = "uniform"
    mu: float = 0.6
    sigma: float = 0.3
    f: int = 3
    g: int = 3
    num_tasks: int = 6
    num_bidders: int = 3
    val_lo: int = 30
    val_hi: int = 45

    def validate(self) -> None:
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"unknown mechanism {self.mechanism!r}")
        if self.cost_lo > self.cost_hi or self.cost_lo < 1:
            raise ConfigError("cost range must satisfy 1 <= lo <= hi")
        if self.val_lo > self.val_hi or self.val_lo < 1:
            raise ConfigError("valuation range must satisfy 1 <= lo <= hi")
        if not 0.0 <= self.deviation_frac <= 1.0:
            raise ConfigError("deviation fraction must lie in [0, 1]")
        if self.rounds < 1:
            raise ConfigError("rounds must be positive")
        if self.dist not in ("uniform", "normal"):
            raise ConfigError(f"unknown distribution {self.dist!r}")
        for name in ("synthetic_n", "f", "g", "num_tasks", "num_bidders",
                     "deviation_delta"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if as_fraction(self.budget) <= 0:
            raise ConfigError("budget must be positive")
        if as_fraction(self.epsilon) <= 0:
            raise ConfigError("epsilon must be positive")

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["budget"] = str(as_fraction(self.budget))
        out["delta"] = str(as_fraction(self.delta))
        out["epsilon"] = str(as_fraction(self.epsilon))
        out["deviation_factor"] = str(as_fraction(self.deviation_factor))
        return out


def synthetic_graph(n: int, edge_prob: float, seed: int) -> SocialGraph:
    rng = stream("graph", seed)
    edges = [
        (i, j) for i in range(n) for j in range(i + 1, n)
        if rng.random() < edge_prob
    ]
    return build_graph(n, edges)


def load_config_graph(config: ExperimentConfig) -> SocialGraph:
    if config.graph_path is not None:
        return load_edge_list(config.graph_path)
    return synthetic_graph(config.synthetic_n, config.edge_prob, config.seed)


def pick_deviators(ids: Sequence[int], frac: float, rng: random.Random) -> list[int]:
    count = math.ceil(frac * len(ids))
    return sorted(rng.sample(list(ids), count)) if count else []


def uniform_costs(ids: Sequence[int], lo: int, hi: int, rng: random.Random) -> dict[int, int]:
    return {i: rng.randint(lo, hi) for i in ids}


# --- tier-1 rounds --------------------------------------------------------

def _run_tier1_round(config: ExperimentConfig, graph: SocialGraph, r: int) -> dict:
    rng = stream("round", config.seed, r)
    true_costs = uniform_costs(range(graph.n), config.cost_lo, config.cost_hi, rng)
    deviators = pick_deviators(range(graph.n), config.deviation_frac, rng)
    reported = dict(true_costs)
    for d in deviators:
        reported[d] = max(1, reported[d] - config.deviation_delta)

    if config.mechanism == "tenm":
        outcome = notifier.tenm_run(graph, reported, config.budget, config.delta)
    elif config.mechanism == "ntbfm":
        outcome = notifier.ntbfm(graph, reported, config.budget)
    else:
        outcome = notifier.psm(reported, config.budget, graph)

    total_utility = sum(
        (notifier.notifier_utility(true_costs[i], outcome.payments[i], True)
         for i in outcome.selected),
        Fraction(0),
    )
    deviator_utility = sum(
        (notifier.notifier_utility(true_costs[i], outcome.payments[i], True)
         for i in outcome.selected if i in deviators),
        Fraction(0),
    )
    return {
        "winners": len(outcome.selected),
        "selected": list(outcome.selected),
        "deviators": deviators,
        "notified": len(outcome.notified),
        "total_payment": outcome.total_payment,
        "total_utility": total_utility,
        "deviator_utility": deviator_utility,
        "budget_feasible": outcome.total_payment <= outcome.budget,
    }


# --- quality rounds -------------------------------------------------------

def _peak_distribution(config: ExperimentConfig):
    if config.dist == "normal":
        return quality.NormalPeaks(config.mu, config.sigma)
    return quality.UniformPeaks()


def _quality_fixture(config: ExperimentConfig, devices: list[int], r: int):
    """Pre-draw batch composition, positions, true peaks, and reports.

    Deviating reviewers report the position of their favorite panel
    device (the one nearest their true peak) instead of the peak itself.
    """
    source = _peak_distribution(config)
    deviators = set(
        pick_deviators(devices, config.deviation_frac, stream("deviators", config.seed, r))
    )
    scripts: list[quality.BatchScript] = []
    reports: dict[tuple[int, int], float] = {}
    true_peaks: dict[tuple[int, int], float] = {}
    unranked = sorted(devices)
    batch = 0
    while unranked:
        rng = stream("qbatch", config.seed, r, batch)
        eta = sorted(rng.sample(unranked, min(config.f, len(unranked))))
        pool = [d for d in devices if d not in eta]
        if len(pool) < config.g:
            raise ConfigError(f"f + g = {config.f + config.g} exceeds the {len(devices)} available devices")
        reviewers = sorted(rng.sample(pool, config.g))
        positions = {d: rng.random() for d in eta}
        for rev in reviewers:
            alpha = source.sample(batch, rev, rng)
            true_peaks[(batch, rev)] = alpha
            if rev in deviators:
                favorite = min(eta, key=lambda d: (abs(positions[d] - alpha), d))
                reports[(batch, rev)] = positions[favorite]
            else:
                reports[(batch, rev)] = alpha
        scripts.append(quality.BatchScript(tuple(eta), tuple(reviewers), positions))
        unranked = [d for d in unranked if d not in eta]
        batch += 1
    return scripts, quality.ScriptedPeaks(reports), true_peaks, sorted(deviators)


def _run_quality_round(config: ExperimentConfig, devices: list[int], r: int) -> dict:
    scripts, peaks, true_peaks, deviators = _quality_fixture(config, devices, r)
    runner = quality.ectai_run if config.mechanism == "ectai" else quality.avr_run
    ranking = runner(devices, config.f, config.g, peaks, seed=config.seed, script=scripts)

    regrets = []
    deviator_regrets = []
    for record in ranking.batches:
        for rev in record.reports:
            regret = abs(true_peaks[(record.index, rev)] - record.aggregate)
            (deviator_regrets if rev in deviators else regrets).append(regret)
    return {
        "ordered": list(ranking.ordered),
        "batches": len(ranking.batches),
        "deviators": deviators,
        "mean_regret": sum(regrets) / len(regrets) if regrets else 0.0,
        "mean_deviator_regret": (
            sum(deviator_regrets) / len(deviator_regrets) if deviator_regrets else 0.0
        ),
        "budget_feasible": True,
    }


# --- auction rounds -------------------------------------------------------

def _auction_valuations(config: ExperimentConfig, r: int):
    rng = stream("round", config.seed, r)
    true_vals = {
        d: {t: rng.randint(config.val_lo, config.val_hi) for t in range(config.num_tasks)}
        for d in range(config.num_bidders)
    }
    deviators = pick_deviators(range(config.num_bidders), config.deviation_frac, rng)
    factor = as_fraction(config.deviation_factor)
    reported = {
        d: auction.AdditiveValuation(vals).scaled(factor if d in deviators else 1)
        for d, vals in true_vals.items()
    }
    return true_vals, reported, deviators


def _run_wipd_round(config: ExperimentConfig, r: int) -> dict:
    true_vals, reported, deviators = _auction_valuations(config, r)
    oracle = auction.BruteForceOracle(reported, policy="paper-literal")
    outcome = auction.wipd_run(
        config.num_tasks, list(reported), oracle, config.epsilon
    )
    truth = {d: auction.AdditiveValuation(v) for d, v in true_vals.items()}
    total_utility = sum(
        (auction.device_utility(outcome.payments[d], truth[d].value(bundle), True)
         for d, bundle in outcome.allocation.items() if bundle),
        Fraction(0),
    )
    return {
        "allocation": {d: sorted(b) for d, b in outcome.allocation.items()},
        "deviators": deviators,
        "rounds_to_settle": outcome.rounds,
        "total_payment": sum(outcome.payments.values(), Fraction(0)),
        "total_utility": total_utility,
        "budget_feasible": True,
    }


def _run_greedy_round(config: ExperimentConfig, r: int) -> dict:
    rng = stream("round", config.seed, r)
    m = config.num_tasks
    requests: dict[int, tuple[frozenset[int], int]] = {}
    true_value: dict[int, int] = {}
    for d in range(config.num_bidders):
        size = rng.randint(1, max(1, m // 2))
        bundle = frozenset(rng.sample(range(m), size))
        true_value[d] = rng.randint(config.val_lo, config.val_hi)
        requests[d] = (bundle, true_value[d])
    deviators = pick_deviators(range(config.num_bidders), config.deviation_frac, rng)
    factor = as_fraction(config.deviation_factor)
    reported = {
        d: (bundle, as_fraction(bid) * (factor if d in deviators else 1))
        for d, (bundle, bid) in requests.items()
    }
    outcome = auction.greedy_baseline(reported, num_tasks=m)
    total_utility = sum(
        (outcome.payments[d] - true_value[d] for d in outcome.allocation),
        Fraction(0),
    )
    deviator_utility = sum(
        (outcome.payments[d] - true_value[d] for d in outcome.allocation
         if d in deviators),
        Fraction(0),
    )
    return {
        "winners": sorted(outcome.allocation),
        "deviators": deviators,
        "total_payment": sum(outcome.payments.values(), Fraction(0)),
        "total_utility": total_utility,
        "deviator_utility": deviator_utility,
        "budget_feasible": True,
    }


# --- entry point ----------------------------------------------------------

def run_experiment(config: ExperimentConfig) -> MechanismReport:
    config.validate()
    report = MechanismReport(
        mechanism=config.mechanism, config=config.to_dict(), seed=config.seed
    )

    if config.mechanism in TIER1:
        graph = load_config_graph(config)
        for r in range(1, config.rounds + 1):
            report.add_round(r, **_run_tier1_round(config, graph, r))
    elif config.mechanism in TIER2_QUALITY:
        graph = load_config_graph(config)
        devices = list(range(graph.n))
        for r in range(1, config.rounds + 1):
            report.add_round(r, **_run_quality_round(config, devices, r))
    elif config.mechanism == "wipd":
        for r in range(1, config.rounds + 1):
            report.add_round(r, **_run_wipd_round(config, r))
    else:
        for r in range(1, config.rounds + 1):
            report.add_round(r, **_run_greedy_round(config, r))

    report.budget_feasible = all(
        bool(r.metrics.get("budget_feasible", True)) for r in report.rounds
    )
    return report


# --- manipulability witness searches --------------------------------------

def find_ntbfm_witness(
    instances: int = 200, seed: int = 0, n_max: int = 10,
    budget: int = 120, cost_grid: tuple[int, int] = (1, 60),
) -> dict | None:
    """First (instance, device, report) where a device strictly profits
    under NTBFM by misreporting its cost."""
    lo, hi = cost_grid
    for inst in range(instances):
        rng = stream("ntbfm-witness", seed, inst)
        n = rng.randint(3, n_max)
        graph = synthetic_graph(n, 0.4, seed * 100_003 + inst)
        true_costs = uniform_costs(range(n), lo, hi, rng)
        truthful = notifier.ntbfm(graph, true_costs, budget)
        for device in range(n):
            base = notifier.notifier_utility(
                true_costs[device],
                truthful.payments.get(device, 0),
                device in truthful.payments,
            )
            for report in range(lo, hi + 1):
                if report == true_costs[device]:
                    continue
                costs = dict(true_costs)
                costs[device] = report
                outcome = notifier.ntbfm(graph, costs, budget)
                gained = notifier.notifier_utility(
                    true_costs[device],
                    outcome.payments.get(device, 0),
                    device in outcome.payments,
                )
                if gained > base:
                    return {
                        "instance": inst, "device": device,
                        "true_cost": true_costs[device], "report": report,
                        "truthful_utility": str(base), "deviation_utility": str(gained),
                    }
    return None


def find_greedy_witness(
    instances: int = 200, seed: int = 0, num_tasks: int = 6,
    bid_grid: tuple[int, int] = (1, 60),
) -> dict | None:
    """First strictly profitable bid deviation under the GREEDY baseline."""
    lo, hi = bid_grid
    for inst in range(instances):
        rng = stream("greedy-witness", seed, inst)
        bidders = rng.randint(2, 4)
        requests = {}
        for d in range(bidders):
            size = rng.randint(1, max(1, num_tasks // 2))
            bundle = frozenset(rng.sample(range(num_tasks), size))
            requests[d] = (bundle, rng.randint(lo, hi))
        for device in range(bidders):
            bundle, true_bid = requests[device]
            for report in range(lo, hi + 1):
                if report == true_bid:
                    continue
                trial = dict(requests)
                trial[device] = (bundle, report)
                outcome = auction.greedy_baseline(trial, num_tasks=num_tasks)
                if device in outcome.allocation:
                    gain = outcome.payments[device] - true_bid
                    if gain > 0:
                        return {
                            "instance": inst, "device": device,
                            "true_value": true_bid, "report": report,
                            "deviation_utility": str(gain),
                        }
    return None


def find_avr_witness(
    profiles: int = 200, seed: int = 0, panel_size: int = 5, step: float = 0.01
) -> dict | None:
    """First reviewer profile where a misreport moves the AVR mean
    strictly closer to the deviator's true peak."""
    grid = [round(k * step, 10) for k in range(int(round(1 / step)) + 1)]
    for inst in range(profiles):
        rng = stream("avr-witness", seed, inst)
        peaks = [rng.random() for _ in range(panel_size)]
        base_mean = quality.mean_of(peaks)
        for i, true_peak in enumerate(peaks):
            base_gap = abs(base_mean - true_peak)
            for report in grid:
                trial = list(peaks)
                trial[i] = report
                gap = abs(quality.mean_of(trial) - true_peak)
                if gap < base_gap - 1e-12:
                    return {
                        "profile": inst, "reviewer": i,
                        "true_peak": true_peak, "report": report,
                        "truthful_gap": base_gap, "deviation_gap": gap,
                    }
    return None
