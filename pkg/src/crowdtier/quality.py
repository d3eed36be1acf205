"""Tier-2 quality identification: batch devices onto the [0,1] scale,
collect reviewer peak reports, and pick each batch's winner by the report
median (or the mean, for the AVR baseline).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import ConfigError, DomainError


def median_of(reports: Sequence[float]) -> float:
    """Median with the mechanism's indexing: odd count takes the middle
    order statistic, even count averages the two middle ones."""
    if not reports:
        raise DomainError("median of empty report list")
    ordered = sorted(reports)
    n = len(ordered)
    if n % 2 == 1:
        return ordered[(n + 1) // 2 - 1]
    return (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0


def mean_of(reports: Sequence[float]) -> float:
    if not reports:
        raise DomainError("mean of empty report list")
    return sum(reports) / len(reports)


def select_quality(panel: Sequence[tuple[int, float]], aggregate: float) -> int:
    """Panel device whose position is nearest the aggregate peak value.

    Ties break to the lowest device id.
    """
    if not panel:
        raise DomainError("empty panel")
    return min(panel, key=lambda e: (abs(e[1] - aggregate), e[0]))[0]


def reviewer_regret(true_alpha: float, aggregate: float) -> float:
    """Distance between a reviewer's true peak and the batch aggregate."""
    if not (0.0 <= true_alpha <= 1.0 and 0.0 <= aggregate <= 1.0):
        raise DomainError("peak values live on [0, 1]")
    return abs(true_alpha - aggregate)


# --- reviewer report providers -------------------------------------------

class UniformPeaks:
    """Reviewer peaks drawn uniformly from [0, 1]."""

    def sample(self, batch: int, reviewer: int, rng: random.Random) -> float:
        return rng.random()


class NormalPeaks:
    """Reviewer peaks from a clamped normal distribution.

    Samples outside [0, 1] are clamped rather than resampled so that the
    draw count per batch stays fixed and runs remain seed-reproducible.
    """

    def __init__(self, mu: float = 0.6, sigma: float = 0.3):
        self.mu = mu
        self.sigma = sigma

    def sample(self, batch: int, reviewer: int, rng: random.Random) -> float:
        return min(1.0, max(0.0, rng.gauss(self.mu, self.sigma)))


class ScriptedPeaks:
    """Replay fixed reports keyed by (batch, reviewer).

    The CSV format is ``batch,reviewer,alpha`` with an optional header.
    """

    def __init__(self, reports: dict[tuple[int, int], float]):
        self.reports = dict(reports)

    @classmethod
    def from_csv(cls, text: str) -> "ScriptedPeaks":
        reports: dict[tuple[int, int], float] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.lower().startswith("batch"):
                continue
            b, r, a = line.split(",")
            reports[(int(b), int(r))] = float(a)
        return cls(reports)

    def sample(self, batch: int, reviewer: int, rng: random.Random) -> float:
        try:
            return self.reports[(batch, reviewer)]
        except KeyError:
            raise DomainError(f"no scripted report for batch {batch}, reviewer {reviewer}") from None


@dataclass(frozen=True)
class BatchScript:
    """Fixed batch composition for replay fixtures: who is ranked, who
    reviews, and where the ranked devices sit on the scale."""

    eta: tuple[int, ...]
    reviewers: tuple[int, ...]
    positions: dict[int, float]


@dataclass
class BatchRecord:
    index: int
    panel: list[tuple[int, float]]
    reports: dict[int, float]
    aggregate: float
    winner: int


@dataclass
class QualityRanking:
    """Per-batch audit trail plus the winners in batch order."""

    ordered: list[int] = field(default_factory=list)
    batches: list[BatchRecord] = field(default_factory=list)
    elapsed_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "ordered": self.ordered,
            "batches": [
                {
                    "index": b.index,
                    "panel": [[d, p] for d, p in b.panel],
                    "reports": {str(r): a for r, a in sorted(b.reports.items())},
                    "aggregate": b.aggregate,
                    "winner": b.winner,
                }
                for b in self.batches
            ],
        }


def _batch_rng(seed: int, batch: int) -> random.Random:
    # Separate stream per batch so batch composition cannot perturb
    # later batches' draws.
    return random.Random((seed + 1) * 1_000_003 + batch)


def _run_batches(
    devices: Iterable[int],
    f: int,
    g: int,
    peak_source,
    seed: int,
    aggregator: Callable[[Sequence[float]], float],
    script: Sequence[BatchScript] | None,
) -> QualityRanking:
    start = time.perf_counter()
    devices = sorted(set(devices))
    if f < 1 or g < 1:
        raise ConfigError("f and g must be at least 1")
    if script is None and f + g > len(devices):
        raise ConfigError(f"f + g = {f + g} exceeds the {len(devices)} available devices")

    unranked = list(devices)
    result = QualityRanking()
    batch = 0
    while unranked:
        rng = _batch_rng(seed, batch)
        if script is not None:
            if batch >= len(script):
                raise ConfigError(f"script ends before batch {batch}")
            entry = script[batch]
            eta = list(entry.eta)
            reviewers = list(entry.reviewers)
            positions = dict(entry.positions)
            missing = set(eta) - set(unranked)
            if missing:
                raise ConfigError(f"scripted batch {batch} re-ranks devices {sorted(missing)}")
            if set(reviewers) & set(eta):
                raise ConfigError(f"scripted batch {batch} has reviewers inside the ranked panel")
        else:
            eta = sorted(rng.sample(unranked, min(f, len(unranked))))
            pool = [d for d in devices if d not in eta]
            reviewers = sorted(rng.sample(pool, g))
            positions = {d: rng.random() for d in eta}

        panel = [(d, positions[d]) for d in eta]
        reports = {r: peak_source.sample(batch, r, rng) for r in reviewers}
        for r, a in reports.items():
            if not 0.0 <= a <= 1.0:
                raise DomainError(f"report {a} from reviewer {r} outside [0, 1]")
        aggregate = aggregator([reports[r] for r in reviewers])
        winner = select_quality(panel, aggregate)

        result.ordered.append(winner)
        result.batches.append(BatchRecord(batch, panel, reports, aggregate, winner))
        unranked = [d for d in unranked if d not in eta]
        batch += 1

    result.elapsed_ms = (time.perf_counter() - start) * 1000.0
    return result


def ectai_run(
    devices: Iterable[int],
    f: int,
    g: int,
    peak_source,
    seed: int = 0,
    script: Sequence[BatchScript] | None = None,
) -> QualityRanking:
    """Median-aggregated quality ranking.

    Batches of f unranked devices are placed on [0,1]; g reviewers drawn
    from the rest of the population (ranked devices stay eligible) each
    report a peak, and the device nearest the report median wins the
    batch.  The final batch may be shorter than f.
    """
    return _run_batches(devices, f, g, peak_source, seed, median_of, script)


def avr_run(
    devices: Iterable[int],
    f: int,
    g: int,
    peak_source,
    seed: int = 0,
    script: Sequence[BatchScript] | None = None,
) -> QualityRanking:
    """Mean-aggregated baseline; otherwise identical to :func:`ectai_run`."""
    return _run_batches(devices, f, g, peak_source, seed, mean_of, script)
