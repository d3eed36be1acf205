import itertools
import random
from fractions import Fraction

import pytest

from crowdtier import (
    AdditiveValuation,
    BruteForceOracle,
    ConfigError,
    DomainError,
    ScriptedOracle,
    TableValuation,
    TerminationError,
    brute_force_demand,
    device_utility,
    greedy_baseline,
    gs_check,
    wipd_run,
)

# Four-pass scripted trace on eight tasks and three devices reaching the
# partition {1: t0-t2, 2: t3,t5,t7, 3: t4,t6}.
SCRIPT_8X3 = {
    (1, 1): {0, 1, 2}, (1, 2): {3, 5, 7}, (1, 3): {4},
    (2, 1): {6}, (2, 2): {2}, (2, 3): {2, 6},
    (3, 1): {2, 6}, (3, 3): {6},
}


def naive_demand(valuation, holdings, prices, eps, policy):
    """Direct enumeration with explicit tie-breaking, written separately
    from the production combinations-based search."""
    free = [t for t in range(len(prices)) if t not in holdings]
    best = None
    for r in range(len(free) + 1):
        for combo in itertools.combinations(free, r):
            score = sum(prices[j] for j in holdings)
            score += sum(prices[j] + eps for j in combo)
            score -= valuation.value(holdings | set(combo))
            obj = -score if policy == "net-gain" else score
            key = (obj, len(combo), combo)
            if best is None or key < best[0]:
                best = (key, frozenset(combo))
    return best[1]


def naive_dynamics(num_tasks, devices, oracle, eps, max_rounds=200):
    """Dict-based replay of the ascending pass structure."""
    prices = {t: Fraction(0) for t in range(num_tasks)}
    holdings = {i: set() for i in devices}
    for rnd in range(1, max_rounds + 1):
        quiet = True
        for i in sorted(devices):
            f = oracle.demand(
                i, frozenset(holdings[i]),
                tuple(prices[t] for t in range(num_tasks)), eps, rnd,
            )
            if f:
                quiet = False
                for other in devices:
                    if other != i:
                        holdings[other] -= f
                holdings[i] |= f
                for t in f:
                    prices[t] += eps
        if quiet:
            return holdings, prices, rnd
    raise AssertionError("naive dynamics did not settle")


class TestValuations:
    def test_additive_sum(self):
        v = AdditiveValuation({0: 3, 1: 4})
        assert v.value([0, 1]) == 7
        assert v.value([]) == 0
        assert v.value([1, 2]) == 4

    def test_additive_rejects_negative(self):
        with pytest.raises(DomainError):
            AdditiveValuation({0: -1})

    def test_table_monotone_closure(self):
        v = TableValuation({frozenset({0, 1}): 5, frozenset({2}): 2})
        assert v.value({0, 1}) == 5
        assert v.value({0, 1, 2}) == 5
        assert v.value({0}) == 0
        assert v.value({2, 3}) == 2

    def test_table_from_json(self):
        table = TableValuation.from_json(
            '{"0": [{"subset": [0, 1], "value": 5}]}'
        )
        assert table[0].value({0, 1, 3}) == 5


class TestBruteForceDemand:
    def test_net_gain_prefers_empty_when_prices_low(self):
        # Payment p + eps below value on every bundle: no positive gain,
        # so the empty set wins.
        v = AdditiveValuation({0: 5, 1: 5})
        assert brute_force_demand(v, frozenset(), (Fraction(0),) * 2, 1, "net-gain") == frozenset()

    def test_net_gain_takes_profitable_bundle(self):
        v = AdditiveValuation({0: 1, 1: 5})
        got = brute_force_demand(v, frozenset(), (Fraction(8), Fraction(0)), 1, "net-gain")
        assert got == frozenset({0})

    def test_paper_literal_takes_value_over_payment(self):
        v = AdditiveValuation({0: 5, 1: 2})
        got = brute_force_demand(v, frozenset(), (Fraction(0),) * 2, 1, "paper-literal")
        assert got == frozenset({0, 1})

    def test_paper_literal_skips_overpriced(self):
        v = AdditiveValuation({0: 5})
        got = brute_force_demand(v, frozenset(), (Fraction(9),), 1, "paper-literal")
        assert got == frozenset()

    def test_ties_prefer_smaller_then_lexicographic(self):
        # Both singletons and the empty set score 0 under net-gain.
        v = AdditiveValuation({0: 1, 1: 1})
        got = brute_force_demand(v, frozenset(), (Fraction(0),) * 2, 1, "net-gain")
        assert got == frozenset()

    def test_matches_naive_enumeration(self):
        rng = random.Random(13)
        for _ in range(60):
            m = rng.randint(1, 5)
            v = AdditiveValuation({t: rng.randint(0, 6) for t in range(m)})
            prices = tuple(Fraction(rng.randint(0, 5)) for _ in range(m))
            held = frozenset(t for t in range(m) if rng.random() < 0.3)
            for policy in ("net-gain", "paper-literal"):
                assert brute_force_demand(v, held, prices, 1, policy) == naive_demand(
                    v, held, prices, Fraction(1), policy
                )

    def test_enumeration_cap(self):
        v = AdditiveValuation({})
        with pytest.raises(ConfigError):
            brute_force_demand(v, frozenset(), (Fraction(0),) * 21, 1)

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            brute_force_demand(AdditiveValuation({}), frozenset(), (), 1, "x")


class TestWipdRun:
    def test_script_8x3_partition(self):
        out = wipd_run(8, [1, 2, 3], ScriptedOracle(SCRIPT_8X3), 1)
        assert {d: set(b) for d, b in out.allocation.items()} == {
            1: {0, 1, 2}, 2: {3, 5, 7}, 3: {4, 6},
        }
        assert out.rounds == 4

    def test_script_8x3_payment_identity(self):
        out = wipd_run(8, [1, 2, 3], ScriptedOracle(SCRIPT_8X3), 1)
        for d, bundle in out.allocation.items():
            assert out.payments[d] == sum(
                (out.prices[t] for t in bundle), Fraction(0)
            )

    def test_single_device_takes_all_once(self):
        out = wipd_run(2, [0], ScriptedOracle({(1, 0): {0, 1}}), 1)
        assert out.allocation[0] == frozenset({0, 1})
        assert out.payments[0] == 2
        assert out.rounds == 2

    def test_price_monotone_along_trace(self):
        out = wipd_run(8, [1, 2, 3], ScriptedOracle(SCRIPT_8X3), 1)
        prev = tuple(Fraction(0) for _ in range(8))
        for entry in out.trace:
            assert all(a <= b for a, b in zip(prev, entry.prices_after))
            prev = entry.prices_after

    def test_matches_naive_dynamics(self):
        rng = random.Random(23)
        for _ in range(30):
            m = rng.randint(2, 5)
            devices = list(range(rng.randint(2, 3)))
            vals = {
                d: AdditiveValuation({t: rng.randint(1, 8) for t in range(m)})
                for d in devices
            }
            oracle = BruteForceOracle(vals, policy="paper-literal")
            out = wipd_run(m, devices, oracle, 1)
            holdings, prices, rounds = naive_dynamics(m, devices, oracle, Fraction(1))
            assert {d: set(b) for d, b in out.allocation.items()} == holdings
            assert list(out.prices) == [prices[t] for t in range(m)]
            assert out.rounds == rounds

    def test_allocations_disjoint_random(self):
        rng = random.Random(29)
        for _ in range(20):
            m = rng.randint(2, 6)
            vals = {
                d: AdditiveValuation({t: rng.randint(1, 9) for t in range(m)})
                for d in range(rng.randint(2, 4))
            }
            out = wipd_run(m, list(vals), BruteForceOracle(vals, "paper-literal"), 1)
            seen = set()
            for bundle in out.allocation.values():
                assert not bundle & seen
                seen |= bundle

    def test_net_gain_settles_empty_when_no_profit(self):
        vals = {0: AdditiveValuation({0: 5}), 1: AdditiveValuation({0: 7})}
        out = wipd_run(1, [0, 1], BruteForceOracle(vals, "net-gain"), 1)
        assert all(not b for b in out.allocation.values())
        assert out.rounds == 1

    def test_nonterminating_oracle_raises_with_trace(self):
        class Grabby:
            def demand(self, device, holdings, prices, epsilon, round_index):
                return frozenset() if 0 in holdings else frozenset({0})

        with pytest.raises(TerminationError) as exc:
            wipd_run(1, [0, 1], Grabby(), 1, max_rounds=15)
        assert len(exc.value.trace) >= 15

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ConfigError):
            wipd_run(1, [0], ScriptedOracle({}), 0)

    def test_rejects_demand_of_held_task(self):
        class Bad:
            def demand(self, device, holdings, prices, epsilon, round_index):
                return frozenset({0})

        with pytest.raises(DomainError):
            wipd_run(1, [0], Bad(), 1, max_rounds=5)

    def test_device_utility(self):
        assert device_utility(10, 7, True) == 3
        assert device_utility(10, 7, False) == 0
        with pytest.raises(DomainError):
            device_utility(-1, 0, True)


class TestGrossSubstitutes:
    def test_additive_satisfies_gs(self):
        ok, witness = gs_check(AdditiveValuation({0: 2, 1: 3}), 2, grid_max=4)
        assert ok and witness is None

    def test_zero_valuation_satisfies_gs(self):
        ok, _ = gs_check(AdditiveValuation({}), 2, grid_max=3)
        assert ok

    def test_complements_violate_gs(self):
        ok, witness = gs_check(TableValuation({frozenset({0, 1}): 5}), 2, grid_max=4)
        assert not ok
        assert set(witness) == {"prices", "raised", "demanded"}

    def test_task_cap(self):
        with pytest.raises(ConfigError):
            gs_check(AdditiveValuation({}), 7)


class TestGreedyBaseline:
    def test_hand_ordering(self):
        # v/sqrt(|S|): device 1 -> 4/1, device 0 -> 9/sqrt(4)=4.5,
        # device 2 -> 5/1; ascending order is 1, 0, 2; 0 and 1 overlap.
        requests = {
            0: ({0, 1, 2, 3}, 9),
            1: ({0}, 4),
            2: ({4}, 5),
        }
        out = greedy_baseline(requests)
        assert set(out.allocation) == {1, 2}
        assert out.payments == {1: Fraction(4), 2: Fraction(5)}

    def test_tie_breaks_to_lowest_id(self):
        requests = {5: ({0}, 3), 2: ({0}, 3)}
        out = greedy_baseline(requests)
        assert set(out.allocation) == {2}

    def test_disjoint_winners(self):
        rng = random.Random(31)
        for _ in range(30):
            m = rng.randint(2, 8)
            requests = {}
            for d in range(rng.randint(2, 5)):
                size = rng.randint(1, m)
                requests[d] = (set(rng.sample(range(m), size)), rng.randint(1, 20))
            out = greedy_baseline(requests, num_tasks=m)
            seen = set()
            for bundle in out.allocation.values():
                assert not bundle & seen
                seen |= bundle

    def test_rejects_empty_bundle(self):
        with pytest.raises(DomainError):
            greedy_baseline({0: (set(), 3)})

    def test_rejects_negative_bid(self):
        with pytest.raises(DomainError):
            greedy_baseline({0: ({0}, -1)})
