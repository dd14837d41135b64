"""Scenario files: strict JSON schema, loading, overrides and scan generation.

A scenario bundles everything needed for a reproducible run::

    {
      "name": "spiral_8m",
      "seed": 1,
      "modes": ["fused", "pcd_only", "image_only"],
      "sensor":     {SensorIntrinsics fields},
      "scene":      {"ground_z", "uav", "clutter": [{"kind": "box", ...}], "noise", "point_budget_k"},
      "trajectory": {TrajectorySpec fields},
      "detector":   {"mode", "blob", "simulated", "dropout_prob"},
      "cluster":    {"eps", "min_pts", "ground", "assoc"},
      "kf":         {KfParams fields},
      "tracker":    {"n_miss", "init_pos_sigma", "init_vel_sigma"},
      "eval":       {"max_dt", "loss_ape", "loss_frames"}
    }

Every section is optional and falls back to library defaults; unknown keys
anywhere are rejected. ``seed`` drives both rendering and detector noise.
"""

from __future__ import annotations

import json
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Literal, Optional, Union, get_args, get_origin

import numpy as np

from .cluster import ClusterParams
from .detect import DetectorConfig
from .geometry import PanoramicScan, SensorIntrinsics
from .kf import KfParams
from .scene import (
    GroundTruthSample,
    SceneSpec,
    TrajectorySpec,
    frame_rng,
    make_trajectory,
    render_scan,
    trajectory_state,
)
from .tracker import TrackerMode, TrackerParams


class ScenarioError(ValueError):
    """Schema or value error, tagged with the dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class TrackerOptions:
    n_miss: int = 10
    init_pos_sigma: float = 0.2
    init_vel_sigma: float = 1.0


@dataclass(frozen=True)
class EvalOptions:
    max_dt: float = 0.06
    loss_ape: float = 0.5
    loss_frames: int = 10

    def __post_init__(self):
        if self.max_dt <= 0 or self.loss_ape <= 0 or self.loss_frames < 1:
            raise ValueError("eval options must be positive")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    modes: tuple[TrackerMode, ...] = (
        TrackerMode.FUSED,
        TrackerMode.PCD_ONLY,
        TrackerMode.IMAGE_ONLY,
    )
    sensor: SensorIntrinsics = field(default_factory=SensorIntrinsics)
    scene: SceneSpec = field(default_factory=SceneSpec)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    kf: KfParams = field(default_factory=KfParams)
    tracker: TrackerOptions = field(default_factory=TrackerOptions)
    eval: EvalOptions = field(default_factory=EvalOptions)

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one tracker mode is required")
        # the scenario seed is authoritative for the renderer
        if self.scene.rng_seed != self.seed:
            object.__setattr__(self, "scene", replace(self.scene, rng_seed=self.seed))

    def tracker_params(self) -> TrackerParams:
        t = self.tracker
        return TrackerParams(self.cluster, self.kf, t.n_miss, t.init_pos_sigma, t.init_vel_sigma)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    @property
    def n_frames(self) -> int:
        return int(np.floor(self.trajectory.duration * self.sensor.frame_rate + 1e-9)) + 1


# -- strict conversion ------------------------------------------------------


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _convert(tp, value, path: str):
    origin = get_origin(tp)
    args = get_args(tp)
    if tp is Any:
        return value
    if is_dataclass(tp):
        return _build(tp, value, path)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        options = [a for a in args if a is not type(None)]
        if len(options) == 1:
            return _convert(options[0], value, path)
        if not isinstance(value, dict) or "kind" not in value:
            raise ScenarioError(path, "expected an object with a 'kind' field")
        for opt in options:
            kind = get_args(typing.get_type_hints(opt)["kind"])
            if value["kind"] in kind:
                return _build(opt, value, path)
        raise ScenarioError(f"{path}.kind", f"unknown kind {value['kind']!r}")
    if origin is Literal:
        if value not in args:
            raise ScenarioError(path, f"expected one of {list(args)}, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ScenarioError(path, "expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ScenarioError(path, f"expected {len(args)} entries, got {len(value)}")
        return tuple(_convert(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            raise ScenarioError(path, f"expected one of {[m.value for m in tp]}, got {value!r}")
    if tp is float:
        if not _is_number(value):
            raise ScenarioError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ScenarioError(path, f"expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ScenarioError(path, f"expected a string, got {value!r}")
        return value
    raise ScenarioError(path, f"unsupported field type {tp!r}")


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ScenarioError(path, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in fields(cls) if f.init]
    for key in data:
        if key not in names:
            raise ScenarioError(f"{path}.{key}" if path else key, "unknown key")
    kwargs = {k: _convert(hints[k], v, f"{path}.{k}" if path else k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(path or "<root>", str(exc)) from None


def scenario_from_dict(data: dict) -> Scenario:
    return _build(Scenario, data, "")


def _plain(obj):
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj) if f.init}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def scenario_to_dict(sc: Scenario) -> dict:
    d = _plain(sc)
    d["scene"].pop("rng_seed", None)
    return d


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.path=value`` strings; values parse as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ScenarioError(key, f"'{p}' is not an object")
        node[parts[-1]] = value
    return data


def load_scenario(path, overrides: Optional[list[str]] = None) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} col {exc.colno}", exc.msg) from None
    if overrides:
        data = apply_overrides(data, overrides)
    sc = scenario_from_dict(data)
    if "name" not in data:
        sc = replace(sc, name=Path(path).stem)
    return sc


def bundled_scenarios() -> list[str]:
    root = resources.files("panotrack") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled scenario, by stem or file name."""
    stem = name[:-5] if name.endswith(".json") else name
    p = resources.files("panotrack") / "scenarios" / f"{stem}.json"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}; have {bundled_scenarios()}")
    return Path(str(p))


def load_bundled(name: str, overrides: Optional[list[str]] = None) -> Scenario:
    return load_scenario(bundled_path(name), overrides)


# -- generation --------------------------------------------------------------


def ground_truth(sc: Scenario) -> list[GroundTruthSample]:
    return make_trajectory(sc.trajectory)


def pose_at(sc: Scenario, t: float) -> GroundTruthSample:
    pos, vel = trajectory_state(sc.trajectory, t)
    return GroundTruthSample(float(t), pos, vel)


def iter_scans(sc: Scenario, n_frames: Optional[int] = None) -> Iterator[PanoramicScan]:
    """Render frames at the sensor rate; frame ``i`` is taken at ``i / frame_rate``.

    Each frame draws from its own generator, so any subset renders identically.
    """
    n = sc.n_frames if n_frames is None else int(n_frames)
    for i in range(n):
        t = i / sc.sensor.frame_rate
        yield render_scan(sc.scene, pose_at(sc, t), sc.sensor, frame_rng(sc.seed, i), i, t)
