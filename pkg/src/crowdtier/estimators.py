"""Closed-form estimators for the one-hop notification process, plus a
Monte Carlo companion.

A notifier with degree |Z| reaches each neighbor independently with
probability p; X is the number of neighbors reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .graph import SocialGraph


@dataclass(frozen=True)
class NotifyModel:
    degree: int
    p: float

    def __post_init__(self):
        if self.degree < 0:
            raise DomainError(f"degree must be non-negative, got {self.degree}")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")


def expected_notified(model: NotifyModel) -> float:
    """E[X] = |Z| * p."""
    return model.degree * model.p


def at_least_one(model: NotifyModel) -> tuple[float, float]:
    """(exact, bound) for Pr{X >= 1}.

    exact = 1 - (1-p)^|Z|; bound = 1 - e^{-|Z| p}.  Since 1-p <= e^{-p},
    exact >= bound always holds.
    """
    exact = 1.0 - (1.0 - model.p) ** model.degree
    bound = 1.0 - math.exp(-model.degree * model.p)
    return exact, bound


def chernoff_tail(expectation: float, kappa: float) -> float:
    """Upper bound on Pr{X > (1+kappa) E}: exp((1+k)E) / (1+k)^{(1+k)E}."""
    if expectation <= 0:
        raise DomainError("expectation must be positive")
    if kappa <= -1:
        raise DomainError("kappa must exceed -1")
    t = (1.0 + kappa) * expectation
    return math.exp(t) / (1.0 + kappa) ** t


def tail_at(t: float) -> float:
    """The e^t / t^t tail expression shared by the Chernoff-style bounds."""
    if t <= 0:
        raise DomainError("t must be positive")
    return math.exp(t) / t**t


def lemma1_bound(degree: int) -> float:
    """Tail bound Pr{X > t} <= e^t / t^t with t = sqrt(|Z| * ln |Z|).

    Only defined for degree > 2 (t must exceed 1 for the bound to make
    sense).
    """
    if degree <= 2:
        raise DomainError(f"lemma1_bound requires degree > 2, got {degree}")
    return tail_at(math.sqrt(degree * math.log(degree)))


def monte_carlo_notified(
    graph: SocialGraph, node: int, p: float, trials: int, seed: int
) -> tuple[float, float]:
    """Sample mean and standard error of X over independent trials.

    Each trial flips one Bernoulli(p) coin per neighbor of ``node``.
    Deterministic for a given seed.
    """
    graph._check(node)
    if trials < 1:
        raise DomainError("trials must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    degree = graph.degree(node)
    rng = np.random.default_rng(seed)
    counts = rng.binomial(degree, p, size=trials)
    mean = float(counts.mean())
    stderr = float(counts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr
