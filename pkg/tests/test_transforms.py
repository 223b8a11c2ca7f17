import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coad.transforms import (
    TWO_PI,
    DisplacementBox,
    GridSpec,
    OutOfTaskSpace,
    Pose4,
    Transform,
    TsrSpec,
    cell_index,
    cell_nominal,
    certified_goal,
    inner_box,
    matrix_to_rpy,
    pose_metric,
    rpy_to_matrix,
    tsr_contains,
    tsr_contains_many,
    wrap_angle,
    wrap_psi,
)

angles = st.floats(-math.pi, math.pi, allow_nan=False)
coords = st.floats(-2.0, 2.0, allow_nan=False)


@st.composite
def transforms(draw):
    xyz = [draw(coords) for _ in range(3)]
    rpy = [draw(angles), draw(st.floats(-1.5, 1.5)), draw(angles)]
    return Transform.from_xyz_rpy(xyz, rpy)


TABLE_TSR = TsrSpec(DisplacementBox(0.05, 0.05, 0.05, b_psi=math.pi / 8),
                    Transform.from_xyz_rpy((-0.13, 0.0, 0.0)))
TABLE_GRID = GridSpec.from_tsr((0.2, -0.4, 0.1), (0.8, 0.4, 0.1), TABLE_TSR)


@given(transforms(), transforms(), transforms())
def test_compose_is_associative_and_matches_matrices(a, b, c):
    lhs = (a @ b) @ c
    rhs = a @ (b @ c)
    np.testing.assert_allclose(lhs.as_matrix(), rhs.as_matrix(), atol=1e-12)
    np.testing.assert_allclose((a @ b).as_matrix(), a.as_matrix() @ b.as_matrix(), atol=1e-12)


@given(transforms())
def test_inverse_round_trip(t):
    np.testing.assert_allclose((t @ t.inverse()).as_matrix(), np.eye(4), atol=1e-12)
    assert t.is_valid()


@given(angles, st.floats(-1.5, 1.5), angles)
def test_rpy_round_trip(r, p, y):
    R = rpy_to_matrix(r, p, y)
    np.testing.assert_allclose(rpy_to_matrix(*matrix_to_rpy(R)), R, atol=1e-12)


@given(st.floats(-50, 50, allow_nan=False))
def test_wrap_psi_range_and_equivalence(a):
    w = wrap_psi(a)
    assert 0.0 < w <= TWO_PI
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_psi_edges():
    assert wrap_psi(0.0) == TWO_PI
    assert wrap_psi(TWO_PI) == TWO_PI
    assert wrap_angle(-math.pi) == math.pi


def test_inner_box_widths_for_table_tsr():
    dx, dy, dz, dpsi = inner_box(TABLE_TSR)
    assert math.isclose(dx, 2 * 0.05 / math.sqrt(2))
    assert dx == dy
    assert math.isclose(dz, 0.1)
    assert math.isclose(dpsi, math.pi / 4)
    assert TABLE_GRID.counts == (9, 12, 1, 8)
    assert TABLE_GRID.n_cells == 864


def test_inner_box_rejects_degenerate_bounds():
    with pytest.raises(ValueError):
        inner_box(TsrSpec(DisplacementBox(0.05, 0.05, 0.05, b_psi=0.0)))
    with pytest.raises(ValueError):
        DisplacementBox(-0.1, 0.05, 0.05)


def test_tsr_contains_nominal_and_outside():
    T_o = Pose4(0.5, 0.1, 0.1, 1.0).to_transform()
    T_e = T_o @ TABLE_TSR.grasp_offset
    assert tsr_contains(T_o, T_e, TABLE_TSR)
    shifted = T_o @ Transform.from_xyz_rpy((0.06, 0.0, 0.0)) @ TABLE_TSR.grasp_offset
    assert not tsr_contains(T_o, shifted, TABLE_TSR)
    turned = T_o @ Transform.from_xyz_rpy(rpy=(0.0, 0.0, math.pi / 8 + 1e-3)) @ TABLE_TSR.grasp_offset
    assert not tsr_contains(T_o, turned, TABLE_TSR)


def test_tsr_yaw_bound_wraps():
    tsr = TsrSpec(DisplacementBox(0.05, 0.05, 0.05, b_psi=math.pi))
    T_o = Transform()
    T_e = Transform.from_xyz_rpy(rpy=(0, 0, math.pi))
    assert tsr_contains(T_o, T_e, tsr)


cell_strategy = st.tuples(*(st.integers(0, n - 1) for n in TABLE_GRID.counts))


@given(cell_strategy, st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
def test_certified_goal_is_valid_for_every_pose_in_cell(cell, u):
    # pick a pose uniformly inside the (possibly clipped) cell and check the TSR membership
    g = TABLE_GRID
    vals = []
    for d in range(4):
        lo_all = g.lower[d] if d < 3 else 0.0
        hi_all = g.upper[d] if d < 3 else TWO_PI
        lo = lo_all + cell[d] * g.widths[d]
        hi = min(lo + g.widths[d], hi_all)
        vals.append(lo + u[d] * (hi - lo))
    pose = Pose4(*vals)
    goal = certified_goal(cell, g, TABLE_TSR)
    assert tsr_contains(pose.to_transform(), goal, TABLE_TSR)


def test_cell_index_nominal_identity_exhaustive():
    for cell in TABLE_GRID.cells():
        assert cell_index(cell_nominal(cell, TABLE_GRID), TABLE_GRID) == cell


def test_cell_index_boundaries():
    g = TABLE_GRID
    assert cell_index(Pose4(0.2, -0.4, 0.1, 1e-12), g) == (0, 0, 0, 0)
    assert cell_index(Pose4(0.8, 0.4, 0.1, TWO_PI), g) == (8, 11, 0, 7)
    # the exact edge depends on rounding of the width; either side of it is unambiguous
    x1 = 0.2 + g.widths[0]
    assert cell_index(Pose4(x1, 0.0, 0.1, 1.0), g).i_x in (0, 1)
    assert cell_index(Pose4(x1 + 1e-9, 0.0, 0.1, 1.0), g).i_x == 1
    assert cell_index(Pose4(x1 - 1e-9, 0.0, 0.1, 1.0), g).i_x == 0
    with pytest.raises(OutOfTaskSpace):
        cell_index(Pose4(0.81, 0.0, 0.1, 1.0), g)
    with pytest.raises(OutOfTaskSpace):
        cell_index(Pose4(0.5, 0.0, 0.2, 1.0), g)


def test_cell_nominal_rejects_bad_index():
    with pytest.raises(IndexError):
        cell_nominal((9, 0, 0, 0), TABLE_GRID)


@given(st.floats(0.2, 0.8), st.floats(-0.4, 0.4), st.floats(-20, 20))
def test_every_pose_maps_to_exactly_one_valid_cell(x, y, psi):
    c = cell_index(Pose4(x, y, 0.1, psi), TABLE_GRID)
    assert all(0 <= i < n for i, n in zip(c, TABLE_GRID.counts))
    assert TABLE_GRID.unflat(TABLE_GRID.flat(c)) == c


def test_nominal_array_matches_cell_nominal():
    arr = TABLE_GRID.nominal_array()
    for k in range(0, TABLE_GRID.n_cells, 37):
        np.testing.assert_array_equal(arr[k], cell_nominal(TABLE_GRID.unflat(k), TABLE_GRID).as_array())


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_pose_metric_symmetric_and_yaw_periodic(a, b):
    a, b = np.array(a), np.array(b)
    d = pose_metric(a, b, 0.1)
    assert math.isclose(d, pose_metric(b, a, 0.1), abs_tol=1e-12)
    b2 = b.copy()
    b2[3] += TWO_PI
    assert math.isclose(d, pose_metric(a, b2, 0.1), abs_tol=1e-9)
    assert pose_metric(a, a, 0.1) == 0.0


def test_tsr_contains_many_matches_scalar(rng):
    ee = certified_goal((3, 4, 0, 2), TABLE_GRID, TABLE_TSR)
    poses = [Pose4(*rng.uniform([0.2, -0.4, 0.1, 0], [0.8, 0.4, 0.1, TWO_PI])) for _ in range(50)]
    R = np.array([p.to_transform().rotation for p in poses])
    t = np.array([p.to_transform().translation for p in poses])
    many = tsr_contains_many(R, t, ee, TABLE_TSR)
    single = [tsr_contains(p.to_transform(), ee, TABLE_TSR) for p in poses]
    assert many.tolist() == single
