import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coad.planner import PlannerOpts, PlanningError, path_length, plan, plan_with_checker, resample, rrt_connect
from coad.transforms import Pose4
from coad.world import ValidityContext
from conftest import scenario


def test_path_length_examples():
    assert path_length(np.ones((5, 3))) == 0.0
    assert math.isclose(path_length(np.array([np.zeros(4), np.ones(4)])), 2.0)
    assert path_length(np.zeros((1, 2))) == 0.0


@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8), st.integers(2, 400))
def test_resample_keeps_endpoints_and_length(vals, T):
    path = np.array(vals).reshape(4, 2)
    out = resample(path, T)
    assert out.shape == (T, 2)
    np.testing.assert_array_equal(out[0], path[0])
    np.testing.assert_array_equal(out[-1], path[-1])
    # resampling a polyline can only cut corners
    assert path_length(out) <= path_length(path) + 1e-9


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.integers(2, 300))
def test_straight_path_length_invariant_under_resample(a, b, T):
    path = np.array([a, b])
    assert math.isclose(path_length(resample(path, T)), path_length(path), rel_tol=1e-9, abs_tol=1e-9)


def test_resample_arc_length_uniform():
    path = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 3.0]])
    out = resample(path, 9)
    steps = np.linalg.norm(np.diff(out, axis=0), axis=1)
    np.testing.assert_allclose(steps[[0, 1, 3, 4, 5, 6, 7]], 0.5, atol=1e-12)


def test_resample_degenerate():
    np.testing.assert_array_equal(resample(np.ones((1, 2)), 3), np.ones((3, 2)))
    np.testing.assert_array_equal(resample(np.ones((4, 2)), 3), np.ones((3, 2)))
    with pytest.raises(ValueError):
        resample(np.zeros((2, 2)), 1)


@pytest.fixture(scope="module")
def table_ctx():
    scn = scenario("table")
    ctx = ValidityContext.exact(scn.env, Pose4(0.5, 0.0, 0.1, 1.0))
    return scn, ctx, ctx.checker(scn.robot)


def test_plan_finds_valid_path(table_ctx):
    scn, ctx, chk = table_ctx
    goal = np.array([1.2, -1.0, 0.8])
    assert chk.config_valid(goal)
    path = plan(scn.robot, scn.env, ctx, scn.q_start, goal, PlannerOpts(seed=3))
    assert path is not None
    assert path.shape == (200, 3)
    np.testing.assert_array_equal(path[0], scn.q_start)
    np.testing.assert_array_equal(path[-1], goal)
    assert chk.path_valid(path, ctx.resolution)


def test_plan_is_deterministic(table_ctx):
    scn, ctx, chk = table_ctx
    goal = np.array([1.2, -1.0, 0.8])
    opts = PlannerOpts(seed=11, timeout=float("inf"))
    a = plan(scn.robot, scn.env, ctx, scn.q_start, goal, opts)
    b = plan(scn.robot, scn.env, ctx, scn.q_start, goal, opts)
    np.testing.assert_array_equal(a, b)


def test_raw_rrt_edges_are_valid(table_ctx):
    scn, ctx, chk = table_ctx
    goal = np.array([1.2, -1.0, 0.8])
    raw = rrt_connect(chk, scn.q_start, goal, PlannerOpts(), np.random.default_rng(0), ctx.resolution)
    assert raw is not None
    assert chk.path_valid(raw, ctx.resolution)
    assert np.all(np.linalg.norm(np.diff(raw, axis=0), axis=1) <= PlannerOpts().step + 1e-12)


def test_invalid_start_raises_and_invalid_goal_returns_none(table_ctx):
    scn, ctx, chk = table_ctx
    folded = np.array([0.0, 2.6, 2.6])
    with pytest.raises(PlanningError):
        plan_with_checker(chk, folded, scn.q_start, PlannerOpts(), ctx.resolution)
    assert plan_with_checker(chk, scn.q_start, folded, PlannerOpts(), ctx.resolution) is None
    outside = np.array([0.0, 3.0, 0.0])
    assert plan_with_checker(chk, scn.q_start, outside, PlannerOpts(), ctx.resolution) is None


def test_iteration_cap_returns_none(table_ctx):
    scn, ctx, chk = table_ctx
    opts = PlannerOpts(max_iterations=1, shortcut_rounds=0)
    assert plan_with_checker(chk, scn.q_start, np.array([1.2, -1.0, 0.8]), opts, ctx.resolution) is None


def test_planner_opts_validation():
    with pytest.raises(ValueError):
        PlannerOpts(step=0.0)
