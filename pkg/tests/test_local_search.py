import numpy as np
import pytest

from pacorn.instance import Instance, make_tour, tour_length
from pacorn.local_search import LocalSearchConfig, improve_order, three_opt, two_opt
from pacorn.oracle import exact_optimum, generate_random_instance


def all_two_exchanges(order):
    """Every distinct 2-exchange of a linearized tour."""
    n = len(order)
    for i in range(n - 1):
        for j in range(i + 1, n):
            yield np.concatenate([order[: i + 1], order[i + 1 : j + 1][::-1], order[j + 1 :]])


def all_three_exchanges(order):
    """Every reconnection of three removed edges (reversals and swaps)."""
    n = len(order)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                A = order[: i + 1]
                B = order[i + 1 : j + 1]
                C = order[j + 1 : k + 1]
                D = order[k + 1 :]
                for X, Y in (
                    (B[::-1], C),
                    (B, C[::-1]),
                    (B[::-1], C[::-1]),
                    (C, B),
                    (C[::-1], B),
                    (C, B[::-1]),
                    (C[::-1], B[::-1]),
                ):
                    yield np.concatenate([A, X, Y, D])


class TestTwoOpt:
    def test_triangle_unchanged(self, triangle):
        t = make_tour(triangle, [0, 1, 2])
        out = two_opt(triangle, t)
        assert out.length == t.length == 12

    def test_crossed_square_uncrossed(self):
        # side 10 so the diagonals (14) are strictly longer after rounding
        square = Instance(
            "sq10", np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]])
        )
        crossed = make_tour(square, [0, 2, 1, 3])
        out = two_opt(square, crossed)
        assert out.length < crossed.length
        assert out.length == tour_length(square, [0, 1, 2, 3])

    def test_never_worse_and_stable_vs_exhaustive(self):
        # with complete candidate lists the result must be a full 2-opt
        # local optimum: no 2-exchange whatsoever improves it
        rng = np.random.default_rng(0)
        for trial in range(30):
            inst = generate_random_instance(8, seed=500 + trial, candidate_k=7)
            t = make_tour(inst, rng.permutation(8))
            out = two_opt(inst, t)
            assert out.length <= t.length
            assert sorted(out.order.tolist()) == list(range(8))
            base = out.length
            for cand in all_two_exchanges(out.order):
                assert tour_length(inst, cand) >= base

    def test_monotone_and_valid_fuzz(self):
        rng = np.random.default_rng(1)
        for trial in range(300):
            n = int(rng.integers(6, 40))
            inst = generate_random_instance(n, seed=trial, candidate_k=min(10, n - 1))
            t = make_tour(inst, rng.permutation(n))
            out = two_opt(inst, t)
            assert out.length <= t.length
            assert sorted(out.order.tolist()) == list(range(n))

    def test_fixpoint(self):
        rng = np.random.default_rng(2)
        for trial in range(50):
            inst = generate_random_instance(20, seed=800 + trial)
            t = make_tour(inst, rng.permutation(20))
            once = two_opt(inst, t)
            twice = two_opt(inst, once)
            assert twice.length == once.length

    def test_deterministic(self):
        inst = generate_random_instance(30, seed=3)
        t = make_tour(inst, np.random.default_rng(5).permutation(30))
        a = two_opt(inst, t)
        b = two_opt(inst, t)
        assert np.array_equal(a.order, b.order)

    def test_input_not_mutated(self):
        inst = generate_random_instance(15, seed=4)
        order = np.random.default_rng(6).permutation(15)
        t = make_tour(inst, order)
        two_opt(inst, t)
        assert np.array_equal(t.order, order)


class TestThreeOpt:
    def test_fixpoint(self):
        rng = np.random.default_rng(7)
        for trial in range(40):
            n = int(rng.integers(6, 30))
            inst = generate_random_instance(n, seed=900 + trial)
            t = make_tour(inst, rng.permutation(n))
            once = three_opt(inst, t)
            twice = three_opt(inst, once)
            assert twice.length == once.length

    def test_not_worse_than_two_opt_paired(self):
        rng = np.random.default_rng(8)
        wins = 0
        for trial in range(100):
            inst = generate_random_instance(50, seed=2000 + trial)
            t = make_tour(inst, rng.permutation(50))
            l3 = three_opt(inst, t).length
            l2 = two_opt(inst, t).length
            assert l3 <= l2
            wins += l3 < l2
        assert wins > 0  # the 3-exchange moves must actually fire sometimes

    def test_optimal_tour_unchanged(self):
        for seed in range(5):
            inst = generate_random_instance(7, seed=3000 + seed, candidate_k=6)
            order, opt = exact_optimum(inst)
            out = three_opt(inst, make_tour(inst, order))
            assert out.length == opt

    def test_stable_vs_exhaustive_three_exchange(self):
        rng = np.random.default_rng(9)
        for trial in range(15):
            inst = generate_random_instance(7, seed=4000 + trial, candidate_k=6)
            out = three_opt(inst, make_tour(inst, rng.permutation(7)))
            base = out.length
            for cand in all_three_exchanges(out.order):
                assert tour_length(inst, cand) >= base

    def test_small_instance_falls_back_to_two_opt(self, unit_square):
        crossed = make_tour(unit_square, [0, 2, 1, 3])
        out = three_opt(unit_square, crossed)
        assert out.length == two_opt(unit_square, crossed).length

    def test_deterministic(self):
        inst = generate_random_instance(40, seed=10)
        t = make_tour(inst, np.random.default_rng(11).permutation(40))
        a = three_opt(inst, t)
        b = three_opt(inst, t)
        assert np.array_equal(a.order, b.order)


class TestFlagsAndConfig:
    def test_without_dont_look_bits_same_guarantees(self):
        rng = np.random.default_rng(12)
        for trial in range(20):
            inst = generate_random_instance(20, seed=5000 + trial)
            t = make_tour(inst, rng.permutation(20))
            out = two_opt(inst, t, use_dlb=False)
            assert out.length <= t.length
            again = two_opt(inst, out, use_dlb=False)
            assert again.length == out.length

    def test_active_mask_restricts_scan(self):
        # with every city masked off, nothing may change
        inst = generate_random_instance(15, seed=13)
        t = make_tour(inst, np.random.default_rng(14).permutation(15))
        out = two_opt(inst, t, active=np.zeros(15, dtype=bool))
        assert out.length == t.length
        assert np.array_equal(out.order, t.order)

    def test_improve_order_in_place(self):
        inst = generate_random_instance(15, seed=15)
        order = np.random.default_rng(16).permutation(15)
        before = tour_length(inst, order)
        length = improve_order(inst, order, "2opt")
        assert length <= before
        assert length == tour_length(inst, order)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LocalSearchConfig(kind="lk")
        with pytest.raises(ValueError):
            LocalSearchConfig(kind="2opt", candidate_k=1)
        LocalSearchConfig(kind="none", candidate_k=1)
