"""Scenario files: robot, environment, object, task space, TSR and option blocks.

A scenario is a versioned JSON document. Its fingerprint is the SHA-256 of
the canonical (sorted, compact) JSON encoding, so semantically identical
files written with different whitespace or key order share a fingerprint.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .planner import PlannerOpts
from .robot import Capsule, Joint, RobotModel
from .transforms import DisplacementBox, GridSpec, Transform, TsrSpec, inner_box
from .world import DEFAULT_RESOLUTION, Environment, Primitive

SCENARIO_FORMAT = "coad-scenario"
SCENARIO_VERSION = 1
BUILTIN = ("table", "shelf", "table_fine")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class LibraryOpts:
    n_neighbor: int = 1000
    r_scale: float = 0.1
    resolution: float = DEFAULT_RESOLUTION
    # per-attempt RRT iteration cap during builds, which run without a wall-clock timeout
    plan_iterations: int = 2000


@dataclass(eq=False)
class Scenario:
    name: str
    robot: RobotModel
    env: Environment
    grid: GridSpec
    tsr: TsrSpec
    q_start: np.ndarray
    planner: PlannerOpts = field(default_factory=PlannerOpts)
    adapter_options: dict = field(default_factory=dict)
    library: LibraryOpts = field(default_factory=LibraryOpts)
    data: dict = field(default_factory=dict, repr=False)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.data)


def canonical_json(data) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def fingerprint(data: dict) -> str:
    return hashlib.sha256(canonical_json(data)).hexdigest()


def _transform(d) -> Transform:
    if d is None:
        return Transform()
    return Transform.from_xyz_rpy(d.get("xyz", (0, 0, 0)), d.get("rpy", (0, 0, 0)))


def _primitive(d) -> Primitive:
    kind = d.get("kind")
    frame = _transform(d.get("frame"))
    if kind == "sphere":
        return Primitive.sphere(d["center"], d["radius"], frame)
    if kind == "capsule":
        return Primitive.capsule(d["a"], d["b"], d["radius"], frame)
    if kind == "aabb":
        return Primitive.aabb(d["min"], d["max"], frame)
    raise ScenarioError(f"unknown primitive kind {kind!r}")


def _robot(d) -> RobotModel:
    joints = []
    for j in d["joints"]:
        lo, hi = j["limits"]
        joints.append(Joint(_transform(j.get("origin")), j["axis"], float(lo), float(hi)))
    links = [[Capsule(tuple(c["a"]), tuple(c["b"]), float(c["radius"])) for c in caps] for caps in d["links"]]
    allowed = frozenset(frozenset(p) for p in d.get("allowed_collisions", []))
    return RobotModel(joints, links, _transform(d.get("ee_offset")), allowed)


def scenario_from_dict(data: dict) -> Scenario:
    """Validate and build a :class:`Scenario` from its JSON document."""
    if data.get("format") != SCENARIO_FORMAT:
        raise ScenarioError(f"not a scenario document (format={data.get('format')!r})")
    if data.get("version") != SCENARIO_VERSION:
        raise ScenarioError(f"scenario version {data.get('version')} unsupported; expected {SCENARIO_VERSION}")
    try:
        robot = _robot(data["robot"])
        env = Environment([_primitive(p) for p in data.get("environment", [])],
                          [_primitive(p) for p in data["object"]])
        b = data["tsr"]["bounds"]
        bounds = DisplacementBox(**b)
        if bounds.b_roll != 0.0 or bounds.b_pitch != 0.0:
            raise ScenarioError("only yaw may vary in the TSR: b_roll and b_pitch must be 0")
        tsr = TsrSpec(bounds, _transform(data["tsr"].get("grasp_offset")))
        inner_box(tsr)
        ts = data["task_space"]
        grid = GridSpec.from_tsr(ts["lower"], ts["upper"], tsr)
        q_start = np.array(data["q_start"], dtype=float)
    except KeyError as e:
        raise ScenarioError(f"scenario is missing field {e}") from None
    except ScenarioError:
        raise
    except (TypeError, ValueError) as e:
        raise ScenarioError(str(e)) from e
    if q_start.shape != (robot.dof,):
        raise ScenarioError(f"q_start has {q_start.size} entries, robot has {robot.dof} joints")
    if not robot.within_limits(q_start):
        raise ScenarioError("q_start violates the joint limits")
    planner = PlannerOpts(**data.get("planner", {}))
    lib = LibraryOpts(**data.get("library", {}))
    return Scenario(
        name=data.get("name", "scenario"),
        robot=robot,
        env=env,
        grid=grid,
        tsr=tsr,
        q_start=q_start,
        planner=planner,
        adapter_options=copy.deepcopy(data.get("adapters", {})),
        library=lib,
        data=copy.deepcopy(data),
    )


def load_scenario(path) -> Scenario:
    """Load a scenario from a path, or one of the built-in names (``table``, ``shelf``, ``table_fine``)."""
    p = Path(path)
    if not p.exists() and str(path) in BUILTIN:
        text = resources.files("coad.scenarios").joinpath(f"{path}.json").read_text()
    else:
        text = p.read_text()
    return scenario_from_dict(json.loads(text))


def builtin_path(name: str) -> Path:
    if name not in BUILTIN:
        raise ScenarioError(f"no built-in scenario {name!r}; choose from {BUILTIN}")
    return Path(str(resources.files("coad.scenarios").joinpath(f"{name}.json")))
