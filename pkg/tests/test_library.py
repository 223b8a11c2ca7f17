import json

import numpy as np
import pytest

from coad.library import (
    FORMAT_VERSION,
    BuildReport,
    LibraryError,
    build_library,
    library_bytes,
    library_from_dict,
    library_to_dict,
    load_library,
    save_library,
    verify_library,
)
from coad.planner import PlanningError
from conftest import library, scenario


@pytest.fixture(scope="module")
def shelf_li():
    return library("shelf", "li")


def test_every_cell_is_covered_or_infeasible(shelf_li):
    lib, rep = shelf_li
    assert not (set(lib.map) & lib.infeasible)
    assert rep.n_covered + rep.n_infeasible == rep.n_cells
    assert sum(rep.coverage) == rep.n_covered
    assert rep.compression == BuildReport.compression_ratio(rep.n_covered, rep.n_roots)
    assert all(c >= 1 for c in rep.coverage)


def test_roots_start_at_q_start(shelf_li):
    lib, _ = shelf_li
    for root in lib.roots:
        assert lib.adapter.q_start(root).tobytes() == lib.q_start.tobytes()


def test_compression_ratio_edge_cases():
    assert BuildReport.compression_ratio(0, 0) == 0.0
    assert BuildReport.compression_ratio(10, 1) == 0.9


def test_round_trip_is_byte_identical(shelf_li, tmp_path):
    lib, _ = shelf_li
    path = tmp_path / "shelf.coad"
    save_library(lib, path)
    back = load_library(path, scenario("shelf"))
    assert library_bytes(back) == path.read_bytes()
    assert back.map.keys() == lib.map.keys()
    for k in lib.map:
        assert back.map[k][0] == lib.map[k][0]
        assert back.map[k][1].tobytes() == lib.map[k][1].tobytes()


def test_load_rejects_other_scenario_and_versions(shelf_li, tmp_path):
    lib, _ = shelf_li
    path = tmp_path / "shelf.coad"
    save_library(lib, path)
    with pytest.raises(LibraryError, match="built for scenario"):
        load_library(path, scenario("table"))
    d = library_to_dict(lib)
    d["version"] = FORMAT_VERSION + 1
    with pytest.raises(LibraryError, match=f"version {FORMAT_VERSION + 1}.*version {FORMAT_VERSION}"):
        library_from_dict(d)
    d["format"] = "zip"
    with pytest.raises(LibraryError, match="not a library"):
        library_from_dict(d)
    bad = tmp_path / "bad.coad"
    bad.write_text("{")
    with pytest.raises(LibraryError, match="JSON"):
        load_library(bad)


def test_verify_detects_tampering(shelf_li):
    lib, _ = shelf_li
    scn = scenario("shelf")
    assert verify_library(lib, scn).ok
    tampered = library_from_dict(json.loads(library_bytes(lib)))
    flat = sorted(tampered.map)[0]
    k, q = tampered.map[flat]
    tampered.map[flat] = (k, q + 0.05)
    other = sorted(tampered.map)[1]
    tampered.map[other] = (len(tampered.roots), tampered.map[other][1])
    tampered.infeasible.add(sorted(tampered.map)[2])
    rep = verify_library(tampered, scn)
    reasons = [why for _, why in rep.violations]
    assert any("misses the certified goal" in r for r in reasons)
    assert any("out of range" in r for r in reasons)
    assert any("both covered and infeasible" in r for r in reasons)


def test_verify_requires_matching_scenario(shelf_li):
    with pytest.raises(LibraryError):
        verify_library(shelf_li[0], scenario("table"))


def test_build_rejects_colliding_start():
    scn = scenario("table")
    with pytest.raises(PlanningError):
        build_library(scn, "li", q_start=np.array([0.0, 2.6, 2.6]))


def test_map_entries_are_valid_goals(shelf_li):
    lib, _ = shelf_li
    scn = scenario("shelf")
    for q_goal in (v[1] for v in lib.map.values()):
        assert scn.robot.within_limits(q_goal)
