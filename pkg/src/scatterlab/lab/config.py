"""Scenario configuration (JSON) and its validation."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..graph_core import (FAMILIES, GraphFamilySpec, GraphError, Profile,
                          family_from_graph_file)
from ..criteria import DEFAULT_S_VALUES
from ..scattering import EPS_EQ


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def bundled_config_path() -> Path:
    return Path(str(resources.files("scatterlab") / "data" / "bundled.json"))


@dataclass(frozen=True)
class PacketSpec:
    k: float
    n0: int
    sigma: float


@dataclass(frozen=True)
class TimeGridSpec:
    kind: str = "geometric"
    t_max: float = 512.0
    points: int = 0
    include_zero: bool = True


@dataclass(frozen=True)
class CriteriaSpec:
    s_values: tuple[float, ...] = DEFAULT_S_VALUES
    quasi_threshold: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    g1: GraphFamilySpec
    g2: GraphFamilySpec
    levels: tuple[int, ...]
    packets: tuple[PacketSpec, ...] = ()
    time_grid: TimeGridSpec = field(default_factory=TimeGridSpec)
    criteria: CriteriaSpec = field(default_factory=CriteriaSpec)
    eps_eq: float = EPS_EQ
    description: str = ""


@dataclass(frozen=True)
class RunConfig:
    name: str
    scenarios: tuple[ScenarioConfig, ...]
    out: str | None = None
    seed: int = 0
    source: str = ""
    config_hash: str = ""


def _need(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise ConfigError("expected an object", path)
    if key not in d:
        raise ConfigError(f"missing field {key!r}", path)
    return d[key]


def _num(v, path: str, positive=False, integer=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path)
    if integer and int(v) != v:
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"expected a {'positive ' if positive else ''}finite number, got {v!r}", path)
    return int(v) if integer else float(v)


def _profile(d, path: str) -> Profile:
    if not isinstance(d, dict):
        raise ConfigError("profile must be an object", path)
    try:
        return Profile.from_dict(d)
    except GraphError as exc:
        raise ConfigError(str(exc), path) from exc


def _family(d, path: str, base_dir: Path) -> GraphFamilySpec:
    name = _need(d, "family", path)
    if name not in FAMILIES:
        raise ConfigError(f"unknown family {name!r} (expected one of {FAMILIES})", f"{path}.family")
    base = _num(d.get("base_radius", 0), f"{path}.base_radius", integer=True)
    step = _num(d.get("radius_step", 1), f"{path}.radius_step", integer=True)
    if name == "edge_list":
        gf = _need(d, "graph_file", path)
        try:
            return family_from_graph_file(base_dir / gf, root=d.get("root"),
                                          base_radius=base, radius_step=step)
        except (OSError, GraphError, ValueError) as exc:
            raise ConfigError(str(exc), f"{path}.graph_file") from exc
    return GraphFamilySpec(name, b=_profile(d.get("b", {}), f"{path}.b"),
                           mu=_profile(d.get("mu", {}), f"{path}.mu"),
                           base_radius=base, radius_step=step)


def _packet(d, path: str) -> PacketSpec:
    if "k_over_pi" in d:
        k = math.pi * _num(d["k_over_pi"], f"{path}.k_over_pi")
    else:
        k = _num(_need(d, "k", path), f"{path}.k")
    if not 0 < abs(k) < math.pi:
        raise ConfigError(f"carrier momentum {k} outside (0, pi)", path)
    return PacketSpec(k, _num(_need(d, "n0", path), f"{path}.n0", integer=True),
                      _num(_need(d, "sigma", path), f"{path}.sigma", positive=True))


def _grid(d, path: str) -> TimeGridSpec:
    kind = d.get("kind", "geometric")
    if kind not in ("geometric", "linear"):
        raise ConfigError(f"unknown grid kind {kind!r}", f"{path}.kind")
    t_max = _num(_need(d, "t_max", path), f"{path}.t_max", positive=True)
    points = 0
    if kind == "linear":
        points = _num(_need(d, "points", path), f"{path}.points", positive=True, integer=True)
    return TimeGridSpec(kind, t_max, points, bool(d.get("include_zero", True)))


def _scenario(d, path: str, base_dir: Path) -> ScenarioConfig:
    sid = _need(d, "scenario_id", path)
    if not isinstance(sid, str) or not sid or "/" in sid:
        raise ConfigError(f"invalid scenario_id {sid!r}", f"{path}.scenario_id")
    levels = _need(d, "levels", path)
    if not isinstance(levels, list) or not levels:
        raise ConfigError("levels must be a nonempty list", f"{path}.levels")
    levels = tuple(_num(v, f"{path}.levels[{i}]", integer=True) for i, v in enumerate(levels))
    if levels[0] < 0 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("levels must be nonnegative and strictly increasing", f"{path}.levels")
    crit = d.get("criteria", {})
    s_values = tuple(_num(v, f"{path}.criteria.s_values[{i}]", positive=True)
                     for i, v in enumerate(crit.get("s_values", DEFAULT_S_VALUES)))
    if any(s >= 1 for s in s_values):
        raise ConfigError("s values must lie in (0, 1)", f"{path}.criteria.s_values")
    thr = _num(crit.get("quasi_threshold", 10.0), f"{path}.criteria.quasi_threshold")
    if thr < 1:
        raise ConfigError("quasi_threshold must be >= 1", f"{path}.criteria.quasi_threshold")
    return ScenarioConfig(
        sid,
        _family(_need(d, "g1", path), f"{path}.g1", base_dir),
        _family(_need(d, "g2", path), f"{path}.g2", base_dir),
        levels,
        tuple(_packet(p, f"{path}.packets[{i}]") for i, p in enumerate(d.get("packets", []))),
        _grid(d.get("time_grid", {"t_max": 512}), f"{path}.time_grid"),
        CriteriaSpec(s_values, thr),
        _num(d.get("eps_eq", EPS_EQ), f"{path}.eps_eq", positive=True),
        str(d.get("description", "")),
    )


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"{source}:{exc.lineno}:{exc.colno}") from exc
    base_dir = base_dir or Path(".")
    scen = _need(raw, "scenarios", "")
    if not isinstance(scen, list) or not scen:
        raise ConfigError("scenarios must be a nonempty list", "scenarios")
    scenarios = tuple(_scenario(s, f"scenarios[{i}]", base_dir) for i, s in enumerate(scen))
    seen: dict[str, int] = {}
    for i, s in enumerate(scenarios):
        if s.scenario_id in seen:
            raise ConfigError(f"duplicate scenario_id {s.scenario_id!r} (also scenarios[{seen[s.scenario_id]}])",
                              f"scenarios[{i}].scenario_id")
        seen[s.scenario_id] = i
    seed = _num(raw.get("seed", 0), "seed", integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return RunConfig(str(raw.get("name", "run")), scenarios, raw.get("out"), seed, source,
                     hashlib.sha256(canonical.encode()).hexdigest())


def load_config(path: str | Path | None = None) -> RunConfig:
    path = bundled_config_path() if path in (None, "bundled") else Path(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config(text, str(path), Path(path).parent)
