"""Scenario config files: strict schema, canonical normal form.

A scenario file is a YAML document with four sections::

    robot:
      kind: planar                # or: dh
      lengths: [0.5, 0.3, 0.2]    # planar; dh uses dh_rows
      qd_upper: [3.0, 3.0, 3.0]
      qd_lower: [-3.0, -3.0, -3.0]
    tasks:
    - kind: planar_ee_position
      target: [0.76, 0.18]
    - kind: planar_ee_orientation
      target: -1.22
    controller:
      mode: sdp                   # or: fixed (needs fixed_gains)
      beta_tilde: 8.0
      delta: 2.0e-05
    sim:
      dt: 0.01
      duration: 5.0
      initial_task_values: [0.5, 0.0, -1.134]   # or: q0

Validation is strict: unknown keys are rejected and every diagnostic names
the dotted path of the offending entry. ``dump_config`` emits a canonical
form (fixed key order, round-trip float formatting, defaults filled in)
whose output re-validates and re-dumps byte-identically.
"""

from __future__ import annotations

import yaml

from .errors import ConfigError
from .kinematics import DH_CHAIN, PLANAR, ManipulatorModel
from .sdp import SolverOptions
from .sim import MODE_FIXED, MODE_SDP, Scenario
from .tasks import COORDINATES, TASK_KINDS, TaskSpec, TaskStack

CONTROLLER_DEFAULTS = {
    "mode": MODE_SDP,
    "beta_tilde": 8.0,
    "delta": 2e-5,
    "eps_beta": 1e-9,
    "feas_tol": 1e-7,
    "obj_tol": 1e-6,
    "max_iters": 200,
}

_DH_TASK_KINDS = ("dh_frame_position", "dh_frame_coordinate")


def _fail(path: str, message: str):
    raise ConfigError(path, message)


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: dict, allowed, path: str) -> None:
    for key in mapping:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else str(key), "unknown key")


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _as_positive(value, path: str) -> float:
    v = _as_float(value, path)
    if not v > 0.0:
        _fail(path, f"must be > 0, got {v!r}")
    return v


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {type(value).__name__}")
    return int(value)


def _as_vector(value, path: str, length: int | None = None) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        _fail(path, "expected a non-empty list of numbers")
    out = [_as_float(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if length is not None and len(out) != length:
        _fail(path, f"expected {length} entries, got {len(out)}")
    return out


def _validate_robot(raw, path: str = "robot") -> dict:
    raw = _require_mapping(raw, path)
    _reject_unknown(raw, {"kind", "lengths", "dh_rows", "qd_upper", "qd_lower"}, path)
    kind = raw.get("kind")
    if kind not in (PLANAR, DH_CHAIN):
        _fail(f"{path}.kind", f"expected {PLANAR!r} or {DH_CHAIN!r}, got {kind!r}")
    out = {"kind": kind}
    if kind == PLANAR:
        if "dh_rows" in raw:
            _fail(f"{path}.dh_rows", "not allowed for a planar robot")
        if "lengths" not in raw:
            _fail(f"{path}.lengths", "required for a planar robot")
        lengths = _as_vector(raw["lengths"], f"{path}.lengths")
        for i, v in enumerate(lengths):
            if not v > 0.0:
                _fail(f"{path}.lengths[{i}]", f"must be > 0, got {v!r}")
        out["lengths"] = lengths
        dof = len(lengths)
    else:
        if "lengths" in raw:
            _fail(f"{path}.lengths", "not allowed for a dh robot")
        if "dh_rows" not in raw:
            _fail(f"{path}.dh_rows", "required for a dh robot")
        rows = raw["dh_rows"]
        if not isinstance(rows, list) or not rows:
            _fail(f"{path}.dh_rows", "expected a non-empty list of rows")
        out_rows = []
        for i, row in enumerate(rows):
            out_rows.append(_as_vector(row, f"{path}.dh_rows[{i}]", length=4))
        out["dh_rows"] = out_rows
        dof = len(out_rows)
    for key in ("qd_upper", "qd_lower"):
        if key not in raw:
            _fail(f"{path}.{key}", "required")
    hi = _as_vector(raw["qd_upper"], f"{path}.qd_upper")
    lo = _as_vector(raw["qd_lower"], f"{path}.qd_lower")
    if len(hi) == 1:
        hi = hi * dof
    if len(lo) == 1:
        lo = lo * dof
    if len(hi) != dof:
        _fail(f"{path}.qd_upper", f"expected {dof} entries, got {len(hi)}")
    if len(lo) != dof:
        _fail(f"{path}.qd_lower", f"expected {dof} entries, got {len(lo)}")
    for i, v in enumerate(hi):
        if not v > 0.0:
            _fail(f"{path}.qd_upper[{i}]", f"must be > 0, got {v!r}")
    for i, v in enumerate(lo):
        if not v < 0.0:
            _fail(f"{path}.qd_lower[{i}]", f"must be < 0, got {v!r}")
    out["qd_upper"] = hi
    out["qd_lower"] = lo
    return out


_TASK_DIMS = {
    "planar_ee_position": 2,
    "planar_ee_orientation": 1,
    "dh_frame_position": 3,
    "dh_frame_coordinate": 1,
}


def _validate_task(raw, robot_kind: str, path: str) -> dict:
    raw = _require_mapping(raw, path)
    _reject_unknown(raw, {"kind", "target", "frame_index", "coordinate"}, path)
    kind = raw.get("kind")
    if kind not in TASK_KINDS:
        _fail(f"{path}.kind", f"expected one of {list(TASK_KINDS)}, got {kind!r}")
    wants_dh = kind in _DH_TASK_KINDS
    if wants_dh != (robot_kind == DH_CHAIN):
        _fail(f"{path}.kind",
              f"task kind {kind!r} does not match robot kind {robot_kind!r}")
    if "target" not in raw:
        _fail(f"{path}.target", "required")
    target = _as_vector(raw["target"], f"{path}.target", length=_TASK_DIMS[kind])
    out = {"kind": kind, "target": target}
    if wants_dh:
        if "frame_index" not in raw:
            _fail(f"{path}.frame_index", "required for dh task kinds")
        frame = _as_int(raw["frame_index"], f"{path}.frame_index")
        if frame < 1:
            _fail(f"{path}.frame_index", f"must be >= 1, got {frame}")
        out["frame_index"] = frame
    elif "frame_index" in raw:
        _fail(f"{path}.frame_index", "only allowed for dh task kinds")
    if kind == "dh_frame_coordinate":
        coord = raw.get("coordinate")
        if coord not in COORDINATES:
            _fail(f"{path}.coordinate",
                  f"expected one of {list(COORDINATES)}, got {coord!r}")
        out["coordinate"] = coord
    elif "coordinate" in raw:
        _fail(f"{path}.coordinate", "only allowed for dh_frame_coordinate")
    return out


def _validate_controller(raw, n: int, path: str = "controller") -> dict:
    raw = _require_mapping(raw if raw is not None else {}, path)
    allowed = set(CONTROLLER_DEFAULTS) | {"fixed_gains"}
    _reject_unknown(raw, allowed, path)
    out = dict(CONTROLLER_DEFAULTS)
    mode = raw.get("mode", out["mode"])
    if mode not in (MODE_SDP, MODE_FIXED):
        _fail(f"{path}.mode", f"expected {MODE_SDP!r} or {MODE_FIXED!r}, got {mode!r}")
    out["mode"] = mode
    for key in ("beta_tilde", "delta"):
        if key in raw:
            out[key] = _as_positive(raw[key], f"{path}.{key}")
    if "eps_beta" in raw:
        v = _as_float(raw["eps_beta"], f"{path}.eps_beta")
        if v < 0.0:
            _fail(f"{path}.eps_beta", f"must be >= 0, got {v!r}")
        out["eps_beta"] = v
    for key in ("feas_tol", "obj_tol"):
        if key in raw:
            out[key] = _as_positive(raw[key], f"{path}.{key}")
    if "max_iters" in raw:
        v = _as_int(raw["max_iters"], f"{path}.max_iters")
        if v < 1:
            _fail(f"{path}.max_iters", f"must be >= 1, got {v}")
        out["max_iters"] = v
    if "fixed_gains" in raw:
        gains = _as_vector(raw["fixed_gains"], f"{path}.fixed_gains", length=n)
        for i, v in enumerate(gains):
            if not v > 0.0:
                _fail(f"{path}.fixed_gains[{i}]", f"must be > 0, got {v!r}")
        out["fixed_gains"] = gains
    elif mode == MODE_FIXED:
        _fail(f"{path}.fixed_gains", "required when mode is 'fixed'")
    return out


def _validate_sim(raw, dof: int, n: int, robot_kind: str, path: str = "sim") -> dict:
    raw = _require_mapping(raw, path)
    _reject_unknown(raw, {"dt", "duration", "q0", "initial_task_values"}, path)
    if "dt" not in raw:
        _fail(f"{path}.dt", "required")
    if "duration" not in raw:
        _fail(f"{path}.duration", "required")
    out = {
        "dt": _as_positive(raw["dt"], f"{path}.dt"),
        "duration": _as_float(raw["duration"], f"{path}.duration"),
    }
    if out["duration"] < 0.0:
        _fail(f"{path}.duration", f"must be >= 0, got {out['duration']!r}")
    has_q0 = "q0" in raw
    has_init = "initial_task_values" in raw
    if has_q0 == has_init:
        _fail(path, "give exactly one of q0 and initial_task_values")
    if has_q0:
        out["q0"] = _as_vector(raw["q0"], f"{path}.q0", length=dof)
    else:
        if robot_kind != PLANAR:
            _fail(f"{path}.initial_task_values",
                  "only supported for planar robots; give q0 instead")
        out["initial_task_values"] = _as_vector(
            raw["initial_task_values"], f"{path}.initial_task_values", length=n)
    return out


def validate_config(raw) -> dict:
    """Check a parsed document against the schema; returns the normal form."""
    raw = _require_mapping(raw, "")
    _reject_unknown(raw, {"name", "robot", "tasks", "controller", "sim"}, "")
    for key in ("robot", "tasks", "sim"):
        if key not in raw:
            _fail(key, "required section")
    name = raw.get("name", "scenario")
    if not isinstance(name, str) or not name:
        _fail("name", "expected a non-empty string")
    robot = _validate_robot(raw["robot"])
    tasks_raw = raw["tasks"]
    if not isinstance(tasks_raw, list) or not tasks_raw:
        _fail("tasks", "expected a non-empty list")
    tasks = [
        _validate_task(t, robot["kind"], f"tasks[{i}]")
        for i, t in enumerate(tasks_raw)
    ]
    dof = len(robot.get("lengths") or robot["dh_rows"])
    for i, t in enumerate(tasks):
        if t.get("frame_index", 1) > dof:
            _fail(f"tasks[{i}].frame_index", f"must be <= {dof}")
    n = sum(_TASK_DIMS[t["kind"]] for t in tasks)
    controller = _validate_controller(raw.get("controller"), n)
    simcfg = _validate_sim(raw["sim"], dof, n, robot["kind"])
    return {
        "name": name,
        "robot": robot,
        "tasks": tasks,
        "controller": controller,
        "sim": simcfg,
    }


def parse_config(text: str) -> dict:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not valid YAML: {exc}") from exc
    return validate_config(raw)


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("", f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def config_to_scenario(cfg: dict) -> Scenario:
    """Instantiate the runtime objects described by a normalized config."""
    robot = cfg["robot"]
    if robot["kind"] == PLANAR:
        model = ManipulatorModel.planar(
            robot["lengths"], qd_upper=robot["qd_upper"],
            qd_lower=robot["qd_lower"])
    else:
        model = ManipulatorModel.dh_chain(
            robot["dh_rows"], qd_upper=robot["qd_upper"],
            qd_lower=robot["qd_lower"])
    stack = TaskStack(tuple(
        TaskSpec(
            kind=t["kind"],
            target=t["target"],
            frame_index=t.get("frame_index"),
            coordinate=t.get("coordinate"),
        )
        for t in cfg["tasks"]
    ))
    ctl = cfg["controller"]
    simcfg = cfg["sim"]
    return Scenario(
        name=cfg["name"],
        model=model,
        stack=stack,
        mode=ctl["mode"],
        fixed_gains=ctl.get("fixed_gains"),
        beta_tilde=ctl["beta_tilde"],
        delta=ctl["delta"],
        eps_beta=ctl["eps_beta"],
        dt=simcfg["dt"],
        duration=simcfg["duration"],
        q0=simcfg.get("q0"),
        initial_task_values=simcfg.get("initial_task_values"),
        solver=SolverOptions(
            feas_tol=ctl["feas_tol"],
            obj_tol=ctl["obj_tol"],
            max_iters=ctl["max_iters"],
        ),
    )


def scenario_to_config(scenario: Scenario) -> dict:
    """Normalized config dict describing a scenario object."""
    model = scenario.model
    robot = {"kind": model.kind}
    if model.kind == PLANAR:
        robot["lengths"] = [float(v) for v in model.link_lengths]
    else:
        robot["dh_rows"] = [[float(v) for v in row] for row in model.dh_rows]
    robot["qd_upper"] = [float(v) for v in model.qd_upper]
    robot["qd_lower"] = [float(v) for v in model.qd_lower]
    tasks = []
    for t in scenario.stack.tasks:
        task = {"kind": t.kind, "target": [float(v) for v in t.target]}
        if t.frame_index is not None:
            task["frame_index"] = int(t.frame_index)
        if t.coordinate is not None:
            task["coordinate"] = t.coordinate
        tasks.append(task)
    controller = {
        "mode": scenario.mode,
        "beta_tilde": float(scenario.beta_tilde),
        "delta": float(scenario.delta),
        "eps_beta": float(scenario.eps_beta),
        "feas_tol": float(scenario.solver.feas_tol),
        "obj_tol": float(scenario.solver.obj_tol),
        "max_iters": int(scenario.solver.max_iters),
    }
    if scenario.fixed_gains is not None:
        controller["fixed_gains"] = [float(v) for v in scenario.fixed_gains]
    simcfg = {"dt": float(scenario.dt), "duration": float(scenario.duration)}
    if scenario.q0 is not None:
        simcfg["q0"] = [float(v) for v in scenario.q0]
    else:
        simcfg["initial_task_values"] = [
            float(v) for v in scenario.initial_task_values]
    return {
        "name": scenario.name,
        "robot": robot,
        "tasks": tasks,
        "controller": controller,
        "sim": simcfg,
    }


# --- canonical dump ---------------------------------------------------------

def _fmt_float(v: float) -> str:
    """Round-trip float literal that PyYAML reads back as a float."""
    text = repr(float(v))
    if "e" in text or "E" in text:
        mantissa, _, exponent = text.partition("e")
        if "." not in mantissa:
            mantissa += ".0"
        if not exponent.startswith(("+", "-")):
            exponent = "+" + exponent
        text = mantissa + "e" + exponent
    return text


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    raise TypeError(f"cannot format {type(v).__name__}")


def _fmt_target(target: list[float]) -> str:
    if len(target) == 1:
        return _fmt_float(target[0])
    return _fmt_value(target)


_ROBOT_KEYS = ("kind", "lengths", "dh_rows", "qd_upper", "qd_lower")
_TASK_KEYS = ("kind", "target", "frame_index", "coordinate")
_CONTROLLER_KEYS = ("mode", "fixed_gains", "beta_tilde", "delta", "eps_beta",
                    "feas_tol", "obj_tol", "max_iters")
_SIM_KEYS = ("dt", "duration", "q0", "initial_task_values")


def dump_config(cfg: dict) -> str:
    """Canonical text form of a normalized config.

    Key order and float formatting are fixed, so dumping, re-parsing and
    dumping again always reproduces the same bytes.
    """
    lines = [f"name: {cfg['name']}"]
    lines.append("robot:")
    for key in _ROBOT_KEYS:
        if key in cfg["robot"]:
            lines.append(f"  {key}: {_fmt_value(cfg['robot'][key])}")
    lines.append("tasks:")
    for task in cfg["tasks"]:
        prefix = "- "
        for key in _TASK_KEYS:
            if key in task:
                value = (_fmt_target(task[key]) if key == "target"
                         else _fmt_value(task[key]))
                lines.append(f"{prefix}{key}: {value}")
                prefix = "  "
    lines.append("controller:")
    for key in _CONTROLLER_KEYS:
        if key in cfg["controller"]:
            lines.append(f"  {key}: {_fmt_value(cfg['controller'][key])}")
    lines.append("sim:")
    for key in _SIM_KEYS:
        if key in cfg["sim"]:
            lines.append(f"  {key}: {_fmt_value(cfg['sim'][key])}")
    return "\n".join(lines) + "\n"
