"""Maze parsing, dynamics, perturbations, and safety invariants."""

import dataclasses
import math

import numpy as np
import pytest

from drac.maze import (
    EnvState,
    MapError,
    MazeEnv,
    builtin_map_path,
    load_map,
    observe,
    parse_map,
    perturb,
    reset,
    step,
)

OPEN_BOX = """\
#####
#...#
#S.G#
#...#
#####
"""


class TestParse:
    def test_zero_goals_rejected(self):
        with pytest.raises(MapError, match="no goal"):
            parse_map("###\n#S#\n###")

    def test_five_by_five_single_goal(self):
        spec = parse_map(OPEN_BOX)
        assert spec.start == (2, 1)
        assert spec.goals == ((2, 3),)

    def test_shipped_simple_map(self):
        spec = load_map(builtin_map_path("simple"))
        assert len(spec.goals) == 4
        assert spec.goals == ((1, 1), (1, 5), (5, 1), (5, 5))  # row-major ids 0..3
        assert spec.start == (5, 3)

    def test_shipped_medium_and_hard_goal_counts(self):
        assert len(load_map(builtin_map_path("medium")).goals) == 6
        assert len(load_map(builtin_map_path("hard")).goals) == 8

    def test_ragged_rows_rejected(self):
        with pytest.raises(MapError, match="ragged"):
            parse_map("####\n#S.G#\n####")

    def test_unknown_characters_rejected(self):
        with pytest.raises(MapError, match="unknown map characters"):
            parse_map("###\n#X#\n###")

    def test_missing_start_rejected(self):
        with pytest.raises(MapError, match="exactly one start"):
            parse_map("###\n#G#\n###")

    def test_duplicate_start_rejected(self):
        with pytest.raises(MapError, match="exactly one start"):
            parse_map("#####\n#SSG#\n#####")

    def test_open_boundary_rejected(self):
        with pytest.raises(MapError, match="boundary"):
            parse_map("###\n#S.\n#G#\n###")

    def test_unknown_builtin_map(self):
        with pytest.raises(MapError, match="builtin"):
            builtin_map_path("gigantic")


class TestReset:
    def test_zero_jitter_lands_on_start_center(self):
        spec = dataclasses.replace(parse_map(OPEN_BOX), start_jitter=0.0)
        state, obs = reset(spec, np.random.default_rng(0))
        assert (state.x, state.y) == (1.5, 2.5)
        assert (state.vx, state.vy) == (0.0, 0.0)

    def test_start_observation_of_shipped_simple_map(self):
        spec = dataclasses.replace(load_map(builtin_map_path("simple")), start_jitter=0.0)
        _, obs = reset(spec, np.random.default_rng(0))
        # start is centered in x and below the midline in y
        np.testing.assert_allclose(obs, [0.0, -4.0 / 7.0, 0.0, 0.0], atol=1e-15)

    def test_jitter_within_bounds(self):
        spec = load_map(builtin_map_path("simple"))
        rng = np.random.default_rng(3)
        for _ in range(50):
            state, _ = reset(spec, rng)
            assert abs(state.x - 3.5) <= 0.1
            assert abs(state.y - 1.5) <= 0.1


class TestStep:
    def test_zero_action_from_rest_is_fixed_point(self):
        spec = parse_map(OPEN_BOX)
        state = EnvState(x=2.0, y=2.5, vx=0.0, vy=0.0, steps=0)
        new, obs, reward, done, info = step(spec, state, [0.0, 0.0])
        assert (new.x, new.y, new.vx, new.vy) == (2.0, 2.5, 0.0, 0.0)
        assert new.steps == 1 and reward == 0.0 and not done

    def test_velocity_update_rule(self):
        spec = parse_map(OPEN_BOX)
        state = EnvState(x=2.0, y=1.5, vx=0.4, vy=-0.2, steps=0)
        new, *_ = step(spec, state, [1.0, 0.5])
        assert new.vx == pytest.approx(0.9 * 0.4 + 0.1 * 1.0)
        assert new.vy == pytest.approx(0.9 * (-0.2) + 0.1 * 0.5)
        assert new.x == pytest.approx(2.0 + 0.25 * new.vx)
        assert new.y == pytest.approx(1.5 + 0.25 * new.vy)

    def test_goal_capture_pays_100_and_sets_goal_id(self):
        spec = parse_map(OPEN_BOX)
        # goal center (3.5, 2.5); start just outside the radius moving right
        state = EnvState(x=3.0, y=2.5, vx=1.0, vy=0.0, steps=0)
        new, obs, reward, done, info = step(spec, state, [1.0, 0.0])
        assert math.dist((new.x, new.y), (3.5, 2.5)) <= spec.goal_radius
        assert reward == 100.0 and done and info["goal_id"] == 0

    def test_wall_clamp_zeroes_blocked_axis_and_preserves_other(self):
        spec = parse_map(OPEN_BOX)
        # row 2 spans y in [2, 3); wall column at x >= 4
        state = EnvState(x=3.9, y=2.5, vx=1.0, vy=0.3, steps=0)
        new, *_ = step(spec, state, [1.0, 0.0])
        # hand-resolution: vx' = 1.0, would land at 4.15 inside the wall
        assert new.x == pytest.approx(4.0 - 1e-9)
        assert new.vx == 0.0
        assert new.vy == pytest.approx(0.9 * 0.3)  # sliding along the wall continues
        assert new.y == pytest.approx(2.5 + 0.25 * new.vy)

    def test_truncation_at_horizon(self):
        spec = dataclasses.replace(parse_map(OPEN_BOX), horizon=3)
        state = EnvState(x=1.5, y=1.5, vx=0.0, vy=0.0, steps=0)
        for i in range(3):
            state, obs, reward, done, info = step(spec, state, [0.0, 0.0])
        assert done and info["truncated"] and reward == 0.0

    def test_out_of_range_action_clipped_and_flagged(self):
        spec = parse_map(OPEN_BOX)
        state = EnvState(x=2.0, y=2.5, vx=0.0, vy=0.0, steps=0)
        new, _, _, _, info = step(spec, state, [5.0, 0.0])
        assert info["action_clipped"]
        assert new.vx == pytest.approx(0.1)  # clipped to 1.0

    def test_observation_normalization(self):
        spec = parse_map(OPEN_BOX)
        obs = observe(spec, EnvState(x=2.5, y=2.5, vx=0.25, vy=-0.5, steps=0))
        np.testing.assert_allclose(obs, [0.0, 0.0, 0.25, -0.5])


class TestInvariants:
    @pytest.mark.parametrize("map_name", ["simple", "medium", "hard"])
    def test_fuzz_never_inside_wall_and_speed_bounded(self, map_name):
        spec = load_map(builtin_map_path(map_name))
        rng = np.random.default_rng(17)
        for _ in range(20):
            state, _ = reset(spec, rng)
            for _ in range(120):
                state, obs, reward, done, info = step(spec, state, rng.uniform(-1, 1, 2))
                row = spec.rows - 1 - math.floor(state.y)
                col = math.floor(state.x)
                assert not spec.is_wall(row, col), (state.x, state.y)
                assert max(abs(state.vx), abs(state.vy)) <= 1.0
                if done:
                    break

    def test_episode_return_is_sparse(self):
        spec = load_map(builtin_map_path("simple"))
        rng = np.random.default_rng(23)
        for _ in range(30):
            state, _ = reset(spec, rng)
            total = 0.0
            done = False
            while not done:
                state, obs, reward, done, info = step(spec, state, rng.uniform(-1, 1, 2))
                total += reward
            assert total in (0.0, 100.0)

    def test_dynamics_deterministic(self):
        spec = load_map(builtin_map_path("simple"))
        state = EnvState(x=3.5, y=2.5, vx=0.1, vy=0.2, steps=0)
        a = step(spec, state, [0.3, -0.4])
        b = step(spec, state, [0.3, -0.4])
        assert a[0] == b[0]


class TestPerturb:
    def test_removal_deletes_half_the_goals(self):
        spec = load_map(builtin_map_path("simple"))
        removed = perturb(spec, "removal", np.random.default_rng(0))
        assert len(removed.goals) == 2
        assert all(g in spec.goals for g in removed.goals)
        assert sum(row.count("G") for row in removed.grid) == 2

    def test_removal_rounds_up_on_odd_counts(self):
        spec = parse_map("#####\n#GGG#\n#.S.#\n#####")
        removed = perturb(spec, "removal", np.random.default_rng(1))
        assert len(removed.goals) == 1

    def test_removal_single_goal_rejected(self):
        spec = parse_map(OPEN_BOX)
        with pytest.raises(MapError, match="at least 2"):
            perturb(spec, "removal", np.random.default_rng(0))

    def test_removal_deterministic_given_seed(self):
        spec = load_map(builtin_map_path("simple"))
        a = perturb(spec, "removal", np.random.default_rng(9))
        b = perturb(spec, "removal", np.random.default_rng(9))
        assert a.goals == b.goals

    def test_obstacle_without_o_cells_is_identity(self):
        spec = parse_map(OPEN_BOX)
        assert perturb(spec, "obstacle") == spec

    def test_obstacle_turns_o_into_walls(self):
        spec = load_map(builtin_map_path("simple"))
        blocked = perturb(spec, "obstacle")
        assert all("O" not in row for row in blocked.grid)
        assert blocked.is_wall(3, 2) and blocked.is_wall(3, 4)
        assert not spec.is_wall(3, 2)  # O is free during training

    def test_unknown_kind_rejected(self):
        with pytest.raises(MapError, match="unknown perturbation"):
            perturb(parse_map(OPEN_BOX), "flood")


def test_env_wrapper_round_trip():
    env = MazeEnv(load_map(builtin_map_path("simple")))
    rng = np.random.default_rng(0)
    obs = env.reset(rng)
    assert obs.shape == (4,)
    obs, reward, done, info = env.step([0.2, 0.1])
    assert obs.shape == (4,) and reward == 0.0 and not done
    with pytest.raises(RuntimeError):
        MazeEnv(load_map(builtin_map_path("simple"))).step([0.0, 0.0])
