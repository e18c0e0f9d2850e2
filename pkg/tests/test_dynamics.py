import math

import numpy as np
import pytest

from pacorn.dynamics import (
    CityMove,
    DynamicsConfig,
    affected_cities,
    apply_move,
    compute_rad,
    perturb_instance,
    reevaluate_tour,
    sample_ring_point,
)
from pacorn.instance import Instance, build_neighbor_lists, make_tour, tour_length
from pacorn.oracle import generate_random_instance

from conftest import DATA_DIR


class TestComputeRad:
    def test_rectangle(self):
        inst = Instance("r", np.array([[0.0, 0.0], [100.0, 60.0], [50.0, 30.0]]))
        assert compute_rad(inst) == pytest.approx(8.0)

    def test_square(self):
        inst = Instance("s", np.array([[0.0, 0.0], [10.0, 10.0], [5.0, 0.0]]))
        assert compute_rad(inst) == pytest.approx(1.0)

    def test_degenerate_rejected(self):
        inst = Instance("d", np.array([[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]]))
        with pytest.raises(ValueError):
            compute_rad(inst)

    def test_shipped_instance_matches_independent_scan(self):
        # re-derive the radius from a raw text scan of the shipped file
        text = (DATA_DIR / "circle52.tsp").read_text()
        xs, ys = [], []
        in_coords = False
        for line in text.splitlines():
            if line.strip() == "NODE_COORD_SECTION":
                in_coords = True
                continue
            if line.strip() == "EOF":
                break
            if in_coords:
                _, x, y = line.split()
                xs.append(float(x))
                ys.append(float(y))
        expected = 0.1 * ((max(xs) - min(xs)) + (max(ys) - min(ys))) / 2.0
        from pacorn.instance import load_instance

        inst = load_instance(DATA_DIR / "circle52.tsp")
        assert compute_rad(inst) == pytest.approx(expected, rel=1e-12)

    def test_frozen_after_moves(self):
        inst = generate_random_instance(30, seed=1)
        before = compute_rad(inst)
        rng = np.random.default_rng(0)
        cfg = DynamicsConfig(interval_mod=8)
        for cycle in range(1, 30):
            perturb_instance(inst, cfg, cycle, rng)
        assert compute_rad(inst) == before  # bbox refers to the original coords


class TestRingSampling:
    def test_containment(self):
        rng = np.random.default_rng(1)
        rad = 9.0
        for _ in range(100_000):
            x, y = sample_ring_point((0.0, 0.0), rad, rng)
            r = math.hypot(x, y)
            assert rad / 3 - 1e-9 <= r <= rad + 1e-9

    def test_area_uniform_fraction(self):
        # area((1/3)rad .. (2/3)rad) / area((1/3)rad .. rad) = (4/9-1/9)/(1-1/9)
        rng = np.random.default_rng(2)
        rad = 9.0
        n = 100_000
        hits = 0
        for _ in range(n):
            x, y = sample_ring_point((5.0, -3.0), rad, rng)
            if math.hypot(x - 5.0, y + 3.0) <= 2 * rad / 3:
                hits += 1
        p = 0.375
        sigma = math.sqrt(p * (1 - p) * n)
        assert abs(hits - p * n) < 3 * sigma

    def test_fixed_seed_identical(self):
        a = sample_ring_point((1.0, 2.0), 5.0, np.random.default_rng(7))
        b = sample_ring_point((1.0, 2.0), 5.0, np.random.default_rng(7))
        assert a == b

    def test_bad_rad(self):
        with pytest.raises(ValueError):
            sample_ring_point((0.0, 0.0), 0.0, np.random.default_rng(0))


class TestPerturb:
    def test_coordinates_are_single_source_of_truth(self):
        inst = generate_random_instance(25, seed=3)
        rng = np.random.default_rng(4)
        mv = perturb_instance(inst, DynamicsConfig(interval_mod=8), 1, rng)
        c = mv.city
        for j in range(inst.n):
            expected = round(math.hypot(*(inst.coords[c] - inst.coords[j])))
            # half-up vs round() differs only at exact .5; avoid flakiness
            if abs((math.hypot(*(inst.coords[c] - inst.coords[j])) % 1) - 0.5) > 1e-9:
                assert inst.distance(c, j) == expected

    def test_other_cities_untouched(self):
        inst = generate_random_instance(25, seed=5)
        before = inst.coords.copy()
        rng = np.random.default_rng(6)
        mv = perturb_instance(inst, DynamicsConfig(interval_mod=8), 1, rng)
        mask = np.ones(25, dtype=bool)
        mask[mv.city] = False
        assert np.array_equal(inst.coords[mask], before[mask])

    def test_displacement_within_ring(self):
        inst = generate_random_instance(25, seed=7)
        rad = compute_rad(inst)
        rng = np.random.default_rng(8)
        cfg = DynamicsConfig(interval_mod=8)
        for cycle in range(1, 200):
            mv = perturb_instance(inst, cfg, cycle, rng)
            d = math.hypot(
                mv.new_pos[0] - mv.old_pos[0], mv.new_pos[1] - mv.old_pos[1]
            )
            assert rad / 3 - 1e-9 <= d <= rad + 1e-9

    def test_repair_equals_full_rebuild(self):
        for n in (20, 60, 200):
            inst = generate_random_instance(n, seed=n)
            rng = np.random.default_rng(9)
            cfg = DynamicsConfig(interval_mod=8)
            for cycle in range(1, 30):
                perturb_instance(inst, cfg, cycle, rng)
                rebuilt = build_neighbor_lists(inst, inst.candidate_k)
                assert np.array_equal(inst.nn_lists, rebuilt)

    def test_explicit_rad_honored(self):
        inst = generate_random_instance(25, seed=10)
        rng = np.random.default_rng(11)
        cfg = DynamicsConfig(interval_mod=8, rad=2.5)
        mv = perturb_instance(inst, cfg, 1, rng)
        d = math.hypot(mv.new_pos[0] - mv.old_pos[0], mv.new_pos[1] - mv.old_pos[1])
        assert 2.5 / 3 - 1e-9 <= d <= 2.5 + 1e-9


class TestApplyMove:
    def test_replication_field_by_field(self):
        base = generate_random_instance(40, seed=12)
        master, slave = base.copy(), base.copy()
        rng = np.random.default_rng(13)
        cfg = DynamicsConfig(interval_mod=8)
        for cycle in range(1, 25):
            mv = perturb_instance(master, cfg, cycle, rng)
            assert apply_move(slave, mv)
            assert np.array_equal(master.coords, slave.coords)
            assert np.array_equal(master.nn_lists, slave.nn_lists)
            assert master.last_move_cycle == slave.last_move_cycle

    def test_idempotent(self):
        base = generate_random_instance(20, seed=14)
        inst = base.copy()
        mv = CityMove(1, 3, (float(inst.coords[3, 0]), float(inst.coords[3, 1])), (50.0, 50.0))
        assert apply_move(inst, mv)
        coords_after = inst.coords.copy()
        assert not apply_move(inst, mv)
        assert np.array_equal(inst.coords, coords_after)

    def test_stale_move_rejected(self):
        inst = generate_random_instance(20, seed=15)
        mv2 = CityMove(2, 1, (0.0, 0.0), (10.0, 10.0))
        mv1 = CityMove(1, 2, (0.0, 0.0), (20.0, 20.0))
        assert apply_move(inst, mv2)
        coords_after = inst.coords.copy()
        assert not apply_move(inst, mv1)  # older cycle: ignored
        assert np.array_equal(inst.coords, coords_after)

    def test_bad_city_rejected(self):
        inst = generate_random_instance(10, seed=16)
        with pytest.raises(ValueError):
            apply_move(inst, CityMove(1, 10, (0.0, 0.0), (1.0, 1.0)))


class TestReevaluate:
    def test_no_move_no_change(self):
        inst = generate_random_instance(15, seed=17)
        t = make_tour(inst, np.random.default_rng(18).permutation(15))
        assert reevaluate_tour(inst, t).length == t.length

    def test_submetric_move_keeps_length(self):
        # integer coordinates, far apart: a 0.2 shift cannot flip any rounding
        coords = np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 100.0], [0.0, 100.0]])
        inst = Instance("c", coords)
        t = make_tour(inst, [0, 1, 2, 3])
        mv = CityMove(1, 0, (0.0, 0.0), (0.2, 0.0))
        apply_move(inst, mv)
        assert reevaluate_tour(inst, t).length == t.length

    def test_matches_scratch_recompute_after_moves(self):
        inst = generate_random_instance(30, seed=19)
        rng = np.random.default_rng(20)
        tours = [make_tour(inst, rng.permutation(30)) for _ in range(50)]
        cfg = DynamicsConfig(interval_mod=8)
        for cycle in range(1, 20):
            perturb_instance(inst, cfg, cycle, rng)
        for t in tours:
            assert reevaluate_tour(inst, t).length == tour_length(inst, t.order)


class TestMoveLog:
    def test_line_roundtrip(self):
        mv = CityMove(7, 12, (1.5, -2.25), (3.125, 4.0))
        assert CityMove.from_log_line(mv.log_line()) == mv

    def test_line_format(self):
        mv = CityMove(1, 2, (0.5, 1.0), (2.0, 3.5))
        assert mv.log_line() == "1,2,0.5,1.0,2.0,3.5"


class TestAffected:
    def test_contains_moved_city_and_listers(self):
        inst = generate_random_instance(40, seed=21)
        before_listers = set(np.flatnonzero((inst.nn_lists == 5).any(axis=1)).tolist())
        before_own = set(inst.nn_lists[5].tolist())
        mv = CityMove(1, 5, tuple(inst.coords[5]), (999.0, 999.0))
        apply_move(inst, mv)
        aff = set(affected_cities(inst).tolist())
        assert 5 in aff
        assert before_own <= aff
        assert before_listers <= aff
        after_own = set(inst.nn_lists[5].tolist())
        assert after_own <= aff

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DynamicsConfig(interval_mod=3)
        with pytest.raises(ValueError):
            DynamicsConfig(rad=-1.0)
