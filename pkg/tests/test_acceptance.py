"""Acceptance criteria, each at its stated tolerance.

Every test records PASS or FAIL for its criterion; the lines are printed in
the terminal summary (see ``conftest.pytest_terminal_summary``).
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from coad.adapters import RawPath, StoOpts, dmp_rollout, qp_solve, sto_objective, sto_solve
from coad.adapters.sto import straight_line
from coad.bench import run_bench, sample_queries
from coad.library import build_library, library_bytes, verify_library
from coad.query import query, validate_result
from coad.robot import jacobian
from coad.transforms import TWO_PI, Pose4, cell_index, cell_nominal, certified_goal, tsr_contains_many
from conftest import ACCEPTANCE, REFERENCE_SEED, library, scenario
from test_adapters import dense_kkt, smooth_path
from test_qp import exhaustive_qp, random_instance
from test_robot import numeric_jacobian

SCENARIOS = ("table", "shelf")
ADAPTERS = ("li", "dmp", "sto", "full")

# measured once on the table scenario with seed 42, frozen with a +-2 pp band
FROZEN_COMPRESSION = {"li": 0.9133, "dmp": 0.8964, "sto": 0.9446}
# measured mean-length ratio library / raw RRT on 1000 covered-cell queries (table, query seed 0)
FROZEN_LENGTH_RATIO = {"li": 0.84, "dmp": 0.93, "sto": 0.74}


class _Detail:
    text = ""


@contextmanager
def criterion(n, title):
    d = _Detail()
    try:
        yield d
    except BaseException:
        ACCEPTANCE[n] = ("FAIL", title, d.text)
        print(f"criterion {n} FAIL: {title} {d.text}")
        raise
    ACCEPTANCE[n] = ("PASS", title, d.text)
    print(f"criterion {n} PASS: {title} {d.text}")


def _cell_bounds(grid, cell):
    lo, hi = [], []
    for d in range(4):
        a = (grid.lower[d] if d < 3 else 0.0) + cell[d] * grid.widths[d]
        b = min(a + grid.widths[d], grid.upper[d] if d < 3 else TWO_PI)
        lo.append(a)
        hi.append(b)
    return np.array(lo), np.array(hi)


def test_criterion_01_tcr_soundness():
    with criterion(1, "cell certificate soundness, 1e5 poses x 20 cells per scenario, 0 violations, < 30 s") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        violations = 0
        for name in SCENARIOS:
            scn = scenario(name)
            g = scn.grid
            for flat in rng.choice(g.n_cells, 20, replace=False):
                cell = g.unflat(int(flat))
                goal = certified_goal(cell, g, scn.tsr)
                lo, hi = _cell_bounds(g, cell)
                P = rng.uniform(lo, hi, size=(100_000, 4))
                c, s = np.cos(P[:, 3]), np.sin(P[:, 3])
                R = np.zeros((len(P), 3, 3))
                R[:, 0, 0], R[:, 0, 1], R[:, 1, 0], R[:, 1, 1], R[:, 2, 2] = c, -s, s, c, 1.0
                violations += int(np.sum(~tsr_contains_many(R, P[:, :3], goal, scn.tsr)))
        elapsed = time.perf_counter() - t0
        d.text = f"{violations} violations in {elapsed:.1f} s"
        assert violations == 0
        assert elapsed < 30.0


def test_criterion_02_grid_totality():
    with criterion(2, "grid totality and cell_index(cell_nominal(c)) == c for all cells, < 1 s") as d:
        t0 = time.perf_counter()
        n = 0
        for name in SCENARIOS:
            g = scenario(name).grid
            for cell in g.cells():
                assert cell_index(cell_nominal(cell, g), g) == cell
                n += 1
            rng = np.random.default_rng(1)
            lo = np.array(list(g.lower) + [0.0])
            hi = np.array(list(g.upper) + [TWO_PI])
            for p in rng.uniform(lo, hi, size=(2000, 4)):
                pose = Pose4(*p)
                c = cell_index(pose, g)
                # the cell's half-open box holds the pose (upper task-space edges clamp into the last cell)
                clo, chi = _cell_bounds(g, c)
                v = np.array(list(pose))
                assert np.all(v >= clo - 1e-12) and np.all(v <= chi + 1e-12)
        elapsed = time.perf_counter() - t0
        d.text = f"{n} cells, {elapsed:.2f} s"
        assert elapsed < 1.0


def test_criterion_03_library_soundness():
    with criterion(3, "verify_library reports 0 violations for 4 adapters x 2 scenarios, build+verify < 5 min") as d:
        total = 0.0
        bad = {}
        for name in SCENARIOS:
            scn = scenario(name)
            for a in ADAPTERS:
                lib, rep = library(name, a)
                t0 = time.perf_counter()
                v = verify_library(lib, scn)
                total += rep.wall_time + time.perf_counter() - t0
                if not v.ok:
                    bad[(name, a)] = v.violations[:3]
        d.text = f"{total:.0f} s total"
        assert not bad, bad
        assert total < 300.0


def test_criterion_04_online_success():
    with criterion(4, "1000 covered-cell queries: 100% solved and validated under the exact pose") as d:
        failures = {}
        for name in SCENARIOS:
            scn = scenario(name)
            for a in ADAPTERS:
                lib = library(name, a)[0]
                poses = sample_queries(scn, 1000, seed=7, covered=set(lib.map))
                for pose in poses:
                    r = query(lib, pose)
                    why = validate_result(scn, lib, pose, r)
                    if why is not None:
                        failures.setdefault((name, a), []).append((tuple(pose), why))
        d.text = f"{sum(len(v) for v in failures.values())} failures over 8000 queries"
        assert not failures, {k: v[:2] for k, v in failures.items()}


def test_criterion_05_compression():
    with criterion(5, "table compression > 0.5 per adapter and within 2 pp of frozen values") as d:
        got = {a: library("table", a)[1].compression for a in FROZEN_COMPRESSION}
        d.text = ", ".join(f"{a} {v:.4f}" for a, v in got.items())
        for a, v in got.items():
            assert v > 0.5
            assert abs(v - FROZEN_COMPRESSION[a]) <= 0.02


def _timings(lib, poses, repeats=3):
    idx, adapt, total = [], [], []
    for _ in range(repeats):
        for p in poses:
            r = query(lib, p)
            idx.append(r.index_ns + r.retrieve_ns)
            adapt.append(r.adapt_ns)
            total.append(r.total_ns)
    return np.median(idx) / 1e3, np.median(adapt) / 1e3, np.median(total) / 1e3


def test_criterion_06_constant_time():
    with criterion(6, "median index+retrieve < 10 us, LI total < 1 ms, adapt medians 864 vs 8640 cells within 2x") as d:
        coarse = library("table", "li")[0]
        fine = library("table_fine", "li")[0]
        assert fine.grid.n_cells >= 10 * coarse.grid.n_cells
        pc = sample_queries(scenario("table"), 2000, seed=3, covered=set(coarse.map))
        pf = sample_queries(scenario("table_fine"), 2000, seed=3, covered=set(fine.map))
        _timings(coarse, pc[:200], 1)
        _timings(fine, pf[:200], 1)
        i_c, a_c, t_c = _timings(coarse, pc)
        i_f, a_f, t_f = _timings(fine, pf)
        ratio = max(a_c, a_f) / min(a_c, a_f)
        d.text = (f"index+retrieve {i_c:.2f}/{i_f:.2f} us, LI total {t_c:.1f} us, "
                  f"adapt {a_c:.1f} vs {a_f:.1f} us (x{ratio:.2f})")
        assert i_c < 10.0 and i_f < 10.0
        assert t_c < 1000.0
        assert ratio < 2.0


def test_criterion_07_adapter_contracts():
    with criterion(7, "LI end bitwise, DMP pre-snap end < 1e-3, STO residual < 1e-6 and <= straight line") as d:
        worst_dmp = worst_sto = 0.0
        n = 0
        for name in SCENARIOS:
            li = library(name, "li")[0]
            for k, q_goal in li.map.values():
                assert li.adapter.adapt(li.roots[k], q_goal)[-1].tobytes() == q_goal.tobytes()
            dmp = library(name, "dmp")[0]
            for k, q_goal in dmp.map.values():
                end = dmp_rollout(dmp.roots[k], q_goal, dmp.adapter.opts)[-1]
                worst_dmp = max(worst_dmp, float(np.max(np.abs(end - q_goal))))
            sto = library(name, "sto")[0]
            a = sto.adapter
            for k, q_goal in sto.map.values():
                root = sto.roots[k]
                x, _ = sto_solve(root, root.q_start, q_goal, a.limits, a.opts)
                resid = max(np.max(np.abs(x[0] - root.q_start)), np.max(np.abs(x[-1] - q_goal)))
                worst_sto = max(worst_sto, float(resid))
                path = a.adapt(root, q_goal)
                line = straight_line(root.q_start, q_goal, len(path))
                f = sto_objective(path, root.waypoints, a.opts)
                assert f <= sto_objective(line, root.waypoints, a.opts) * (1 + 1e-9)
                n += 1
        d.text = f"DMP worst {worst_dmp:.2e} rad, STO worst residual {worst_sto:.2e} over {n} cells"
        assert worst_dmp < 1e-3
        assert worst_sto < 1e-6


def test_criterion_08_numerical_oracles():
    with criterion(8, "Jacobian vs central differences < 1e-5, QP vs active-set oracle < 1e-5, STO vs KKT < 1e-6") as d:
        rng = np.random.default_rng(88)
        jac = 0.0
        for name in SCENARIOS:
            model = scenario(name).robot
            for _ in range(100):
                q = rng.uniform(model.lower, model.upper)
                jac = max(jac, float(np.max(np.abs(jacobian(model, q) - numeric_jacobian(model, q)))))
        qp_gap, checked = 0.0, 0
        while checked < 50:
            P, q, A, l, u = random_instance(rng)
            f_star, x_star = exhaustive_qp(P, q, A, l, u)
            if x_star is None:
                continue
            res = qp_solve(P, q, A, l, u)
            qp_gap = max(qp_gap, abs(0.5 * res.x @ P @ res.x + q @ res.x - f_star))
            checked += 1
        sto = 0.0
        for _ in range(20):
            R = smooth_path(rng)
            qg = R[-1] + rng.uniform(-0.4, 0.4, 3)
            x, _ = sto_solve(RawPath(R), R[0], qg, (np.full(3, -50.0), np.full(3, 50.0)))
            sto = max(sto, float(np.max(np.abs(x - dense_kkt(R, R[0], qg, StoOpts())))))
        d.text = f"Jacobian {jac:.1e}, QP gap {qp_gap:.1e}, STO {sto:.1e}"
        assert jac < 1e-5
        assert qp_gap < 1e-5
        assert sto < 1e-6


def test_criterion_09_quality_trend():
    with criterion(9, "mean path length of every library adapter <= raw RRT-Connect on 1000 queries") as d:
        scn = scenario("table")
        libs = {a: library("table", a)[0] for a in ("li", "dmp", "sto")}
        rep = run_bench(scn, libs, ["rrt"], n_queries=1000, seed=0, covered_only=True)
        rrt = rep.methods["rrt"].length_mean
        ratios = {a: rep.methods[a].length_mean / rrt for a in libs}
        d.text = f"rrt {rrt:.3f} rad; " + ", ".join(
            f"{a} {rep.methods[a].length_mean:.3f} (x{r:.2f})" for a, r in ratios.items()
        )
        for a, r in ratios.items():
            assert rep.methods[a].success_rate == 1.0
            assert r <= 1.0
            assert r <= FROZEN_LENGTH_RATIO[a] + 0.05


def test_criterion_10_determinism():
    with criterion(10, "same-seed rebuild is byte-identical and re-queries return identical paths") as d:
        checked = []
        for name, a in (("table", "li"), ("shelf", "dmp"), ("shelf", "sto")):
            scn = scenario(name)
            first = library(name, a)[0]
            again, _ = build_library(scn, a, seed=REFERENCE_SEED)
            assert library_bytes(again) == library_bytes(first)
            for flat in first.map:
                pose = cell_nominal(first.grid.unflat(flat), first.grid)
                assert query(first, pose).path.tobytes() == query(again, pose).path.tobytes()
            checked.append(f"{name}/{a}")
        d.text = ", ".join(checked)
