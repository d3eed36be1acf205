"""Tier-1 notifier mechanisms: budget-feasible greedy selection with
threshold payments, plus the NTBFM and PSM baselines.

All ratio comparisons are exact (integer marginals over Fraction costs),
so threshold conditions that hold with equality are never lost to
floating-point rounding.  The greedy argmax uses lazy re-evaluation: a
candidate's cached marginal only shrinks as the covered set grows, so a
popped entry whose marginal is unchanged is the true argmax.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import ConfigError, DomainError, InvariantError
from .graph import CoverageOracle, SocialGraph

Numeric = int | float | Fraction


def as_fraction(x: Numeric) -> Fraction:
    """Exact rational from int/Fraction; decimal-literal reading for floats."""
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass
class NotifierOutcome:
    """Result of a tier-1 mechanism run.

    ``selected`` preserves greedy order; ``payments`` is defined exactly
    on the selected set.
    """

    mechanism: str
    selected: list[int]
    notified: frozenset[int]
    payments: dict[int, Fraction]
    budget: Fraction
    delta: Fraction | None = None
    elapsed_ms: float = 0.0
    greedy_marginals: list[int] = field(default_factory=list)

    @property
    def total_payment(self) -> Fraction:
        return sum(self.payments.values(), Fraction(0))

    def check(self, costs: Mapping[int, Fraction] | None = None) -> None:
        """Raise InvariantError on budget or rationality violations."""
        if len(set(self.selected)) != len(self.selected):
            raise InvariantError("selected list contains duplicates")
        if set(self.payments) != set(self.selected):
            raise InvariantError("payments not defined exactly on selected")
        if self.total_payment > self.budget:
            raise InvariantError(
                f"total payment {self.total_payment} exceeds budget {self.budget}"
            )
        if costs is not None:
            for i in self.selected:
                if self.payments[i] < as_fraction(costs[i]):
                    raise InvariantError(
                        f"winner {i} paid {self.payments[i]} below reported cost {costs[i]}"
                    )


def notifier_utility(true_cost: Numeric, payment: Numeric, selected: bool) -> Fraction:
    """Quasilinear notifier utility: payment minus true cost when selected."""
    if as_fraction(payment) < 0:
        raise DomainError("payment must be non-negative")
    if not selected:
        return Fraction(0)
    return as_fraction(payment) - as_fraction(true_cost)


def _cost_map(graph_n: int, costs: Mapping[int, Numeric]) -> dict[int, Fraction]:
    out = {}
    for i in range(graph_n):
        if i not in costs:
            raise DomainError(f"no cost for node {i}")
        c = as_fraction(costs[i])
        if c <= 0:
            raise DomainError(f"cost of node {i} must be positive, got {costs[i]}")
        out[i] = c
    return out


def _lazy_greedy(oracle: CoverageOracle, costs: Mapping[int, Fraction], accept):
    """Marginal-per-cost greedy over the oracle's candidates.

    ``accept(node, marginal, covered_value)`` decides admission of the
    current argmax; the first rejected argmax ends the run and is
    reported as the first loser.  Ties in the ratio break to the lowest
    node id.  Returns (selections, first_loser) where selections is a
    list of (node, marginal_at_selection) and first_loser is
    (node, marginal) or None when candidates ran out.
    """
    session = oracle.session()
    heap = []
    for i in oracle.candidates():
        m = session.gain(i)
        heapq.heappush(heap, (Fraction(-m, costs[i]), i, m))

    selections: list[tuple[int, int]] = []
    while heap:
        key, i, scored = heapq.heappop(heap)
        m = session.gain(i)
        if m != scored:
            heapq.heappush(heap, (Fraction(-m, costs[i]), i, m))
            continue
        if accept(i, m, session.value):
            selections.append((i, m))
            session.add(i)
        else:
            return selections, (i, m)
    return selections, None


def nam_select(
    graph: SocialGraph,
    costs: Mapping[int, Numeric],
    budget: Numeric,
    delta: Numeric = 2,
) -> tuple[list[int], frozenset[int]]:
    """Greedy notifier allocation under the proportional budget threshold.

    Repeatedly picks the unselected node with maximum marginal
    notification per reported cost (ties to the lowest id) and admits it
    while cost_i <= (B / delta) * marginal / (h(S) + marginal); the first
    violation, or an argmax with zero marginal, stops the run.  Returns
    the selected list in greedy order and the notified set.
    """
    budget = as_fraction(budget)
    delta = as_fraction(delta)
    if budget <= 0:
        raise ConfigError("budget must be positive")
    if delta <= 0:
        raise ConfigError("delta must be positive")
    if graph.n == 0:
        return [], frozenset()

    cost = _cost_map(graph.n, costs)
    oracle = CoverageOracle(graph)
    share = budget / delta

    def accept(i: int, marginal: int, covered: int) -> bool:
        if marginal == 0:
            return False
        return cost[i] <= share * Fraction(marginal, covered + marginal)

    selections, _ = _lazy_greedy(oracle, cost, accept)
    selected = [i for i, _ in selections]
    return selected, oracle.covered(selected)


def _payment_rerun(
    oracle: CoverageOracle, cost: Mapping[int, Fraction], budget: Fraction, winner: int
):
    """Greedy rerun with the winner excluded from candidacy (it stays
    notifiable, so competitors keep coverage credit for reaching it).

    Uses the undamped admission threshold cost_i / B <= m / (m + h(S')).
    Returns the position references [(cost_k, marginal_k), ...] covering
    the rerun's selections followed by the first loser (when one exists),
    plus the rerun's selection order.
    """
    restricted = oracle.without_node(winner)

    def accept(i: int, marginal: int, covered: int) -> bool:
        if marginal == 0:
            return False
        return cost[i] / budget <= Fraction(marginal, marginal + covered)

    selections, loser = _lazy_greedy(restricted, cost, accept)
    refs = [(cost[i], m) for i, m in selections]
    if loser is not None:
        refs.append((cost[loser[0]], loser[1]))
    return refs, [i for i, _ in selections]


def npm_prices(
    graph: SocialGraph,
    costs: Mapping[int, Numeric],
    budget: Numeric,
    selected: list[int],
) -> dict[int, Fraction]:
    """Threshold payments for the winners of :func:`nam_select`.

    For each winner j, the market is rerun without j; at every position
    k of the rerun ordering (plus the first-loser position) the payment
    candidate is min(nabla_jk, rho_jk), where nabla_jk is the cost j
    could have revealed to take position k and rho_jk the budget share
    at that position.  The payment is the maximum candidate.
    """
    budget = as_fraction(budget)
    if budget <= 0:
        raise ConfigError("budget must be positive")
    cost = _cost_map(graph.n, costs)
    for j in selected:
        graph._check(j)
    oracle = CoverageOracle(graph)

    payments: dict[int, Fraction] = {}
    for j in selected:
        refs, order = _payment_rerun(oracle, cost, budget, j)

        best = Fraction(0)
        session = oracle.session()  # accumulates T_{k-1} in the full graph
        for k in range(len(order) + 1):
            h_jk = session.gain(j)
            if h_jk > 0:
                rho = budget * Fraction(h_jk, session.value + h_jk)
                if k < len(refs):
                    c_k, ref_marginal = refs[k]
                    # ref_marginal == 0 leaves the positional cost unbounded,
                    # so the budget share alone caps the candidate.
                    if ref_marginal > 0:
                        nabla = h_jk * c_k / ref_marginal
                        candidate = min(nabla, rho)
                    else:
                        candidate = rho
                else:
                    candidate = rho
                best = max(best, candidate)
            if k < len(order):
                session.add(order[k])
        payments[j] = best
    return payments


def tenm_run(
    graph: SocialGraph,
    costs: Mapping[int, Numeric],
    budget: Numeric,
    delta: Numeric = 2,
) -> NotifierOutcome:
    """Full tier-1 mechanism: greedy allocation followed by threshold payments."""
    start = time.perf_counter()
    selected, notified = nam_select(graph, costs, budget, delta)
    payments = npm_prices(graph, costs, budget, selected)
    elapsed = (time.perf_counter() - start) * 1000.0
    outcome = NotifierOutcome(
        mechanism="tenm",
        selected=selected,
        notified=notified,
        payments=payments,
        budget=as_fraction(budget),
        delta=as_fraction(delta),
        elapsed_ms=elapsed,
    )
    outcome.check(costs={i: as_fraction(costs[i]) for i in selected})
    return outcome


def ntbfm(
    graph: SocialGraph, costs: Mapping[int, Numeric], budget: Numeric
) -> NotifierOutcome:
    """Pay-as-bid baseline: one static sort by initial marginal per cost,
    then a scan that selects while the reported cost fits the remaining
    budget and terminates at the first that does not."""
    start = time.perf_counter()
    budget = as_fraction(budget)
    if budget <= 0:
        raise ConfigError("budget must be positive")
    if graph.n == 0:
        return NotifierOutcome("ntbfm", [], frozenset(), {}, budget)
    cost = _cost_map(graph.n, costs)
    oracle = CoverageOracle(graph)

    order = sorted(range(graph.n), key=lambda i: (Fraction(-graph.degree(i), cost[i]), i))
    selected: list[int] = []
    remaining = budget
    for i in order:
        if cost[i] <= remaining:
            selected.append(i)
            remaining -= cost[i]
        else:
            break
    payments = {i: cost[i] for i in selected}
    outcome = NotifierOutcome(
        mechanism="ntbfm",
        selected=selected,
        notified=oracle.covered(selected),
        payments=payments,
        budget=budget,
        elapsed_ms=(time.perf_counter() - start) * 1000.0,
    )
    outcome.check()
    return outcome


def psm(
    costs: Mapping[int, Numeric], budget: Numeric, graph: SocialGraph | None = None
) -> NotifierOutcome:
    """Proportional share baseline.

    Sorts reported costs ascending (c_1 <= c_2 <= ...), finds the
    largest k with c_k <= B/k, and pays each of the k cheapest agents
    min(B/k, c_{k+1}); with no loser the payment is B/k.  The graph is
    ignored by the rule and only used to report the notified set.
    """
    start = time.perf_counter()
    budget = as_fraction(budget)
    if budget <= 0:
        raise ConfigError("budget must be positive")
    if not costs:
        raise DomainError("psm requires at least one cost")
    cost = {i: as_fraction(c) for i, c in costs.items()}
    for i, c in cost.items():
        if c <= 0:
            raise DomainError(f"cost of node {i} must be positive")

    order = sorted(cost, key=lambda i: (cost[i], i))
    k = 0
    for idx, i in enumerate(order, start=1):
        if cost[i] <= budget / idx:
            k = idx
    winners = order[:k]
    if k == 0:
        payments: dict[int, Fraction] = {}
    else:
        share = budget / k
        pay = min(share, cost[order[k]]) if k < len(order) else share
        payments = {i: pay for i in winners}

    if graph is not None:
        notified = CoverageOracle(graph).covered(winners)
    else:
        notified = frozenset()
    outcome = NotifierOutcome(
        mechanism="psm",
        selected=winners,
        notified=notified,
        payments=payments,
        budget=budget,
        elapsed_ms=(time.perf_counter() - start) * 1000.0,
    )
    outcome.check()
    return outcome
