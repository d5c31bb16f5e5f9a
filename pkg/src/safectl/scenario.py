"""Scenario files: TOML with a fixed schema, unknown keys rejected.

    model = "m1"                 # m1..m5 or m3-wrong
    seed = 0
    episode_index = 0            # optional
    variant = "as-written"       # m5 threshold variant

    [params]                     # all required
    a_n_max = 2.0
    a_n_min = 3.0
    a_s_min = 5.0
    T = 0.1

    [initial]                    # optional; default x = 0 and a seeded speed
    x = 0.0
    v = 0.0

    [constraint]
    policy = "fixed"             # or "sampled"
    x_c = 28.0                   # fixed only
    v_c = 0.0                    # fixed only
    boundary_prob = 0.25         # sampled only

    [nominal]
    policy = "constant"          # "constant", "schedule" or "sampled"
    a_n = 2.0                    # constant only
    schedule = [[0.0, 2.0], [3.0, -1.0]]   # schedule only: (start time, a_n)

    [budget]
    depth = 50
    dense = 20
    duration = "sampled"         # or "always-T"
    monitor = "dense"            # or "endpoint"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

from safectl.controller import SafetyConstraint
from safectl.environment import DEFAULT_BOUNDARY_PROB
from safectl.kinematics import VehicleState
from safectl.simulator import EpisodeConfig, constant_schedule
from safectl.threat import SystemParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ScenarioError(ValueError):
    pass


_TOP = {"model", "seed", "episode_index", "variant", "params", "initial", "constraint",
        "nominal", "budget"}
_SECTIONS = {
    "params": {"a_n_max", "a_n_min", "a_s_min", "T"},
    "initial": {"x", "v"},
    "constraint": {"policy", "x_c", "v_c", "boundary_prob"},
    "nominal": {"policy", "a_n", "schedule"},
    "budget": {"depth", "dense", "duration", "monitor"},
}


def _reject_unknown(table: dict, allowed: set, where: str):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _number(table, key, where, default=None):
    if key not in table:
        if default is None:
            raise ScenarioError(f"missing {where}.{key}")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(table, key, where, default):
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}.{key} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class Scenario:
    config: EpisodeConfig
    source: str = ""


def parse_scenario(data: dict, source: str = "") -> Scenario:
    _reject_unknown(data, _TOP, "scenario")
    for name, keys in _SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ScenarioError(f"[{name}] must be a table")
        _reject_unknown(section, keys, f"[{name}]")
    if "model" not in data:
        raise ScenarioError("missing model")
    if "params" not in data:
        raise ScenarioError("missing [params]")
    pt = data["params"]
    params = SystemParams(*(_number(pt, k, "params") for k in ("a_n_max", "a_n_min", "a_s_min", "T")))

    initial = None
    if "initial" in data:
        it = data["initial"]
        initial = VehicleState(_number(it, "x", "initial", 0.0), _number(it, "v", "initial"))

    ct = data.get("constraint", {"policy": "sampled"})
    policy = ct.get("policy", "sampled")
    constraint, boundary_prob = None, DEFAULT_BOUNDARY_PROB
    if policy == "fixed":
        if "boundary_prob" in ct:
            raise ScenarioError("constraint.boundary_prob only applies to the sampled policy")
        constraint = SafetyConstraint(_number(ct, "x_c", "constraint"), _number(ct, "v_c", "constraint", 0.0))
    elif policy == "sampled":
        if "x_c" in ct or "v_c" in ct:
            raise ScenarioError("constraint.x_c / v_c only apply to the fixed policy")
        boundary_prob = _number(ct, "boundary_prob", "constraint", DEFAULT_BOUNDARY_PROB)
    else:
        raise ScenarioError(f"constraint.policy must be 'fixed' or 'sampled', got {policy!r}")

    nt = data.get("nominal", {"policy": "sampled"})
    npol = nt.get("policy", "sampled")
    schedule = None
    if npol == "constant":
        schedule = constant_schedule(_number(nt, "a_n", "nominal"))
    elif npol == "schedule":
        raw = nt.get("schedule")
        if not isinstance(raw, list) or not all(isinstance(r, list) and len(r) == 2 for r in raw):
            raise ScenarioError("nominal.schedule must be a list of [start_time, a_n] pairs")
        schedule = tuple((float(a), float(b)) for a, b in raw)
    elif npol != "sampled":
        raise ScenarioError(f"nominal.policy must be 'constant', 'schedule' or 'sampled', got {npol!r}")
    if npol != "constant" and "a_n" in nt:
        raise ScenarioError("nominal.a_n only applies to the constant policy")
    if npol != "schedule" and "schedule" in nt:
        raise ScenarioError("nominal.schedule only applies to the schedule policy")

    bt = data.get("budget", {})
    try:
        cfg = EpisodeConfig(
            model=str(data["model"]), params=params, initial=initial,
            depth=_integer(bt, "depth", "budget", 50), dense=_integer(bt, "dense", "budget", 20),
            duration=bt.get("duration", "sampled"), constraint=constraint, schedule=schedule,
            monitor=bt.get("monitor", "dense"), seed=_integer(data, "seed", "scenario", 0),
            episode_index=_integer(data, "episode_index", "scenario", 0),
            boundary_prob=boundary_prob, variant=data.get("variant", "as-written"),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario(cfg, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    try:
        return parse_scenario(data, str(path))
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_scenario(cfg: EpisodeConfig) -> str:
    """TOML text that loads back to ``cfg``; used for replay files."""
    p = cfg.params
    lines = [f'model = "{cfg.model}"', f"seed = {cfg.seed}", f"episode_index = {cfg.episode_index}",
             f'variant = "{cfg.variant}"', "", "[params]",
             f"a_n_max = {_fmt(p.a_n_max)}", f"a_n_min = {_fmt(p.a_n_min)}",
             f"a_s_min = {_fmt(p.a_s_min)}", f"T = {_fmt(p.T)}", ""]
    if cfg.initial is not None:
        lines += ["[initial]", f"x = {_fmt(cfg.initial.x)}", f"v = {_fmt(cfg.initial.v)}", ""]
    lines.append("[constraint]")
    if cfg.constraint is not None:
        lines += ['policy = "fixed"', f"x_c = {_fmt(cfg.constraint.x_c)}", f"v_c = {_fmt(cfg.constraint.v_c)}"]
    else:
        lines += ['policy = "sampled"', f"boundary_prob = {_fmt(cfg.boundary_prob)}"]
    lines += ["", "[nominal]"]
    if cfg.schedule is None:
        lines.append('policy = "sampled"')
    elif len(cfg.schedule) == 1:
        lines += ['policy = "constant"', f"a_n = {_fmt(cfg.schedule[0][1])}"]
    else:
        pairs = ", ".join(f"[{_fmt(t)}, {_fmt(a)}]" for t, a in cfg.schedule)
        lines += ['policy = "schedule"', f"schedule = [{pairs}]"]
    lines += ["", "[budget]", f"depth = {cfg.depth}", f"dense = {cfg.dense}",
              f'duration = "{cfg.duration}"', f'monitor = "{cfg.monitor}"']
    return "\n".join(lines) + "\n"
