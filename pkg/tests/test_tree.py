import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbb_flowshop.core import FlowshopError, Instance, makespan
from pbb_flowshop.tree import (ID_BITS, MAX_JOBS, CapacityError, Incumbent, IncumbentCell,
                               InvalidStateError, Subproblem, brute_force, children, decode_id,
                               encode_id, floor_size, id_count, leaves_count, solve_sequential,
                               split_frontier, split_id)


def rand_inst(seed, n, m, hi=30):
    rng = random.Random(seed)
    return Instance(p=[[rng.randint(1, hi) for _ in range(m)] for _ in range(n)])


def lex_ids(n):
    """Oracle: walk floors in order, prefixes lexicographically, count up."""
    out, nxt = {}, 0
    for length in range(1, n + 1):
        for prefix in itertools.permutations(range(n), length):
            out[prefix] = nxt
            nxt += 1
    return out


class TestCounting:
    @pytest.mark.parametrize("n, k, size", [(3, 0, 3), (3, 2, 6), (20, 0, 20), (4, 1, 12)])
    def test_floor_size(self, n, k, size):
        assert floor_size(n, k) == size

    @pytest.mark.parametrize("n, k, leaves", [(3, 2, 1), (3, 0, 2)])
    def test_leaves_count(self, n, k, leaves):
        assert leaves_count(n, k) == leaves

    @pytest.mark.parametrize("n", range(1, 9))
    def test_every_floor_covers_all_permutations(self, n):
        for k in range(n):
            assert floor_size(n, k) * leaves_count(n, k) == math.factorial(n)
            assert floor_size(n, k) == math.factorial(n) // math.factorial(n - k - 1)

    @pytest.mark.parametrize("n, k", [(3, 3), (3, -1)])
    def test_floor_out_of_range(self, n, k):
        with pytest.raises(FlowshopError):
            floor_size(n, k)

    def test_id_count_is_the_sum_of_floors(self):
        for n in range(1, 12):
            assert id_count(n) == sum(math.factorial(n) // math.factorial(n - i) for i in range(1, n + 1))


class TestCodec:
    @pytest.mark.parametrize("prefix, node_id", [((0,), 0), ((2,), 2), ((0, 1), 3)])
    def test_examples(self, prefix, node_id):
        assert encode_id(3, prefix) == node_id
        assert decode_id(3, node_id) == list(prefix)

    @pytest.mark.parametrize("n", range(2, 7))
    def test_bijection_and_constraints(self, n):
        oracle = lex_ids(n)
        assert sorted(oracle.values()) == list(range(id_count(n)))
        for prefix, node_id in oracle.items():
            assert encode_id(n, prefix) == node_id
            assert tuple(decode_id(n, node_id)) == prefix
            k, rank = split_id(n, node_id)
            assert 0 <= k <= n - 1
            assert 0 <= rank <= floor_size(n, k) - 1
            assert 0 <= node_id <= id_count(n) - 1
            assert k == len(prefix) - 1

    @pytest.mark.parametrize("n", [1, 7, 20, 33])
    def test_largest_id_fits(self, n):
        last = id_count(n) - 1
        assert last.bit_length() <= ID_BITS
        assert decode_id(n, last) == list(range(n - 1, -1, -1))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            encode_id(MAX_JOBS + 1, [0])
        with pytest.raises(FlowshopError):
            decode_id(3, id_count(3))
        with pytest.raises(FlowshopError):
            decode_id(3, -1)

    @settings(max_examples=200)
    @given(st.integers(1, MAX_JOBS).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, id_count(n) - 1))))
    def test_round_trip_random_ids(self, case):
        n, node_id = case
        assert encode_id(n, decode_id(n, node_id)) == node_id

    @pytest.mark.parametrize("prefix", [(), (0, 0), (3,)])
    def test_rejects_bad_prefixes(self, prefix):
        with pytest.raises(ValueError):
            encode_id(3, prefix)


class TestChildren:
    def test_example(self):
        inst = rand_inst(1, 3, 2)
        kids = children(inst, Subproblem.from_prefix(inst, (1,)))
        assert [k.prefix for k in kids] == [(1, 0), (1, 2)]

    def test_leaf(self):
        inst = rand_inst(1, 3, 2)
        with pytest.raises(InvalidStateError):
            children(inst, Subproblem.from_prefix(inst, (1, 0, 2)))

    @pytest.mark.parametrize("n", range(2, 7))
    def test_count_and_monotone_bound(self, n):
        inst = rand_inst(n, n, 3)
        for length in range(1, n):
            for prefix in itertools.permutations(range(n), length):
                sub = Subproblem.from_prefix(inst, prefix)
                kids = children(inst, sub)
                assert len(kids) == n - (sub.floor + 1)
                assert all(kid.bound >= sub.bound for kid in kids)

    def test_from_id(self):
        inst = rand_inst(2, 5, 3)
        sub = Subproblem.from_id(inst, 17)
        assert sub.node_id(5) == 17
        assert sub.floor == len(sub.prefix) - 1


class TestSplitFrontier:
    def test_small(self):
        assert split_frontier(rand_inst(0, 3, 2), 0) == [0, 1, 2]
        assert len(split_frontier(rand_inst(0, 4, 2), 1)) == 12

    @pytest.mark.parametrize("n", range(1, 7))
    def test_particles_partition_all_permutations(self, n):
        inst = rand_inst(0, n, 2)
        for k in range(n):
            seen = []
            for node_id in split_frontier(inst, k):
                prefix = tuple(decode_id(n, node_id))
                rest = [j for j in range(n) if j not in prefix]
                seen.extend(prefix + tail for tail in itertools.permutations(rest))
            assert sorted(seen) == list(itertools.permutations(range(n)))

    def test_cap(self):
        with pytest.raises(CapacityError):
            split_frontier(rand_inst(0, 10, 2), 5, max_particles=1000)


class TestSolver:
    def test_single_job(self):
        result = solve_sequential(Instance(p=[[4, 2]]))
        assert (result.permutation, result.makespan, result.complete) == ((0,), 6, True)

    @pytest.mark.parametrize("bound", ["machine", "johnson"])
    def test_matches_brute_force_7x3(self, bound):
        for seed in range(15):
            inst = rand_inst(seed, 7, 3)
            result = solve_sequential(inst, bound=bound)
            assert result.makespan == brute_force(inst)[1]
            assert makespan(inst, result.permutation) == result.makespan

    def test_agrees_on_50_seeds(self):
        for seed in range(50):
            rng = random.Random(seed)
            inst = rand_inst(seed, rng.randint(1, 7), rng.randint(1, 4))
            assert solve_sequential(inst).makespan == brute_force(inst)[1]

    def test_tighter_incumbent(self):
        for seed in range(20):
            inst = rand_inst(seed, 7, 4)
            opt = brute_force(inst)[1]
            loose = solve_sequential(inst)
            for slack in (5, 1, 0):
                tight = solve_sequential(inst, Incumbent(opt + slack))
                assert tight.makespan == opt
                assert tight.stats.nodes_expanded <= loose.stats.nodes_expanded
            # an incumbent at the optimum leaves nothing to improve
            assert not solve_sequential(inst, Incumbent(opt)).improved

    def test_budget_truncates(self):
        inst = rand_inst(3, 9, 5)
        result = solve_sequential(inst, budget=10)
        assert not result.complete
        assert result.stats.nodes_expanded == 10

    def test_rooted_search_stays_in_subtree(self):
        inst = rand_inst(4, 6, 3)
        result = solve_sequential(inst, root=(2, 5))
        assert result.permutation[:2] == (2, 5)
        rest = [j for j in range(6) if j not in (2, 5)]
        best = min(makespan(inst, (2, 5) + t) for t in itertools.permutations(rest))
        assert result.makespan == best

    def test_pruning_is_sound(self):
        for seed in range(10):
            inst = rand_inst(seed, 6, 3)
            log = []
            result = solve_sequential(inst, pruned_log=log)
            assert log
            for prefix in log:
                rest = [j for j in range(6) if j not in prefix]
                best_below = min(makespan(inst, tuple(prefix) + t) for t in itertools.permutations(rest))
                assert best_below >= result.makespan

    def test_shared_cell_only_improves(self):
        inst = rand_inst(9, 7, 3)
        cell = IncumbentCell()
        result = solve_sequential(inst, shared=cell)
        assert cell.makespan == result.makespan
        assert not cell.offer(result.makespan + 1)
        assert cell.makespan == result.makespan

    def test_stats_invariants(self):
        stats = solve_sequential(rand_inst(5, 7, 3)).stats
        assert stats.nodes_expanded >= stats.incumbent_updates >= 1
        assert stats.nodes_pruned >= 0 and stats.elapsed >= 0

    def test_unknown_bound(self):
        with pytest.raises(ValueError):
            solve_sequential(rand_inst(0, 3, 2), bound="nope")


class TestBruteForce:
    def test_trivial(self):
        assert brute_force(Instance(p=[[3]])) == ((0,), 3)

    def test_two_jobs(self):
        inst = Instance(p=[[5, 1], [1, 5]])
        assert brute_force(inst) == ((1, 0), min(makespan(inst, [0, 1]), makespan(inst, [1, 0])))

    def test_ties_pick_lexicographic_first(self):
        assert brute_force(Instance(p=[[1], [1], [1]]))[0] == (0, 1, 2)

    def test_guard(self):
        with pytest.raises(CapacityError):
            brute_force(rand_inst(0, 10, 2))
