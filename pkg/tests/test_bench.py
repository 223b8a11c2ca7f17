import json
import math

import numpy as np
import pytest

from coad.bench import (
    NaiveLibrary,
    baseline_naive_library,
    baseline_rrt,
    naive_query,
    path_length,
    run_bench,
    sample_queries,
)
from coad.robot import fk
from coad.transforms import Pose4, cell_index, tsr_contains
from coad.world import ValidityContext
from conftest import library, scenario

OPEN_POSE = Pose4(0.45, -0.1, 0.1, 4.0)


@pytest.fixture(scope="module")
def table():
    return scenario("table")


@pytest.fixture(scope="module")
def naive(table):
    return baseline_naive_library(table, 12, seed=5)


def _check_solution(scn, pose, path, q_start):
    assert path[0].tobytes() == np.asarray(q_start).tobytes()
    ctx = ValidityContext.exact(scn.env, pose, scn.library.resolution)
    assert ctx.checker(scn.robot).path_valid(path, ctx.resolution)
    assert tsr_contains(pose.to_transform(), fk(scn.robot, path[-1]), scn.tsr)


def test_path_length_examples():
    assert path_length(np.zeros((3, 4))) == 0.0
    assert math.isclose(path_length(np.array([np.zeros(5), np.ones(5)])), math.sqrt(5))


def test_baseline_rrt_solves_open_pose(table):
    path = baseline_rrt(table, OPEN_POSE, seed=1)
    assert path is not None
    _check_solution(table, OPEN_POSE, path, table.q_start)
    again = baseline_rrt(table, OPEN_POSE, seed=1)
    assert again.tobytes() == path.tobytes()


def test_baseline_rrt_unreachable_pose(table):
    # outside the arm's reach: the IK step already fails
    far = Pose4(5.0, 0.0, 0.1, 1.0)
    assert baseline_rrt(table, far) is None


def test_naive_library_paths_are_valid(table, naive):
    assert naive.size == 12
    for pose, path in zip(naive.poses, naive.paths):
        _check_solution(table, Pose4(*pose), path, table.q_start)


def test_naive_query_at_stored_pose_returns_stored_path(naive):
    pose = Pose4(*naive.poses[3])
    out = naive_query(naive, pose)
    assert out.tobytes() == naive.paths[3].tobytes()


def test_naive_query_new_pose(table, naive):
    poses = sample_queries(table, 8, seed=9, covered=set(library("table", "li")[0].map))
    solved = 0
    for p in poses:
        out = naive_query(naive, p, seed=2)
        if out is not None:
            solved += 1
            _check_solution(table, p, out, table.q_start)
    assert solved >= 1


def test_empty_naive_library(table):
    nl = baseline_naive_library(table, 0)
    assert isinstance(nl, NaiveLibrary) and nl.size == 0
    assert naive_query(nl, OPEN_POSE) is None


def test_sample_queries_are_seeded_and_restricted(table):
    lib = library("table", "li")[0]
    a = sample_queries(table, 30, 3, covered=set(lib.map))
    b = sample_queries(table, 30, 3, covered=set(lib.map))
    assert [tuple(p) for p in a] == [tuple(p) for p in b]
    assert all(table.grid.flat(cell_index(p, table.grid)) in lib.map for p in a)
    with pytest.raises(ValueError):
        sample_queries(table, 3, 0, covered=set())


def test_empty_report_is_valid(table):
    rep = run_bench(table, [library("table", "li")[0]], ["rrt"], n_queries=0, seed=0)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["metadata"]["n_queries"] == 0
    for m in d["methods"].values():
        assert m["success_rate"] is None and m["length_mean"] is None and m["n_queries"] == 0


def test_report_passes_compression_through_and_is_repeatable(table):
    lib, build = library("table", "li")
    kw = dict(n_queries=15, seed=4, covered_only=True, validate=True)
    a = run_bench(table, {"li": lib}, ["rrt"], **kw)
    b = run_bench(table, {"li": lib}, ["rrt"], **kw)
    assert a.methods["li"].compression == build.compression
    assert a.methods["li"].library_size == build.n_roots
    assert a.methods["li"].success_rate == 1.0 and a.methods["li"].n_invalid == 0
    assert a.to_dict(with_timings=False) == b.to_dict(with_timings=False)
    assert set(a.methods["rrt"].time_ms) == {"p50", "p95", "p99"}


def test_full_task_space_reports_uncovered_fraction(table):
    lib = library("table", "li")[0]
    rep = run_bench(table, [lib], [], n_queries=200, seed=8)
    m = rep.methods["coad-li"]
    assert 0.0 < m.uncovered_fraction < 1.0
    assert math.isclose(m.success_rate + m.uncovered_fraction, 1.0)


def test_unknown_baseline(table):
    with pytest.raises(ValueError):
        run_bench(table, [], ["prm"], n_queries=1)
