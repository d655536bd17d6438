"""Scenario files: flat ``key = value`` text with ``[section]`` headers.

Example::

    name = constant_speed_peel
    mode = coupled
    nu = 0
    ell0 = 1
    horizon = 0.5
    delta = 1e-3

    [data]
    u0 = zero
    u1 = constant 2
    w = zero

    [toughness]
    model = constant
    value = 0.5

    [output]
    snapshots = 0.25, 0.5

Data presets are ``zero``, ``constant c``, ``sine k`` (``sin(k pi x / L)``
on ``[0, L]``), ``ramp a`` (``a * s``) and ``file <path>`` (two CSV
columns).  Relative paths are resolved against the scenario file.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..dalembert import ProblemData, SampledFunction, constant_forcing
from ..errors import ValidationError
from ..geometry import Front
from ..griffith import TOUGHNESS_KINDS, Toughness

logger = logging.getLogger(__name__)

MODES = ("prescribed", "coupled", "oracle", "verify")

# section -> key -> (type, default); type is one of float, int, str, "list", "bool"
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "": {
        "name": (str, None),
        "mode": (str, None),
        "nu": (float, 0.0),
        "ell0": (float, 1.0),
        "horizon": (float, 0.5),
        "delta": (float, 1e-3),
    },
    "tolerances": {
        "picard": (float, 1e-10),
        "max_iter": (int, 200),
        "verify": (float, 1e-2),
        "safety": (float, 0.9),
        "speed_cap": (float, 1e-6),
    },
    "data": {
        "u0": (str, "zero"),
        "u1": (str, "zero"),
        "w": (str, "zero"),
        "samples": (int, 4001),
    },
    "front": {
        "t": ("list", None),
        "ell": ("list", None),
        "speed": (float, None),
        "file": (str, None),
    },
    "toughness": {
        "model": (str, None),
        "value": (float, None),
        "override": (float, None),
        "at": (float, None),
        "points": ("list", None),
        "values": ("list", None),
        "x_points": ("list", None),
        "t_points": ("list", None),
        "lipschitz": (float, None),
        "eps": (float, None),
    },
    "forcing": {
        "f": (str, "none"),
    },
    "oracle": {
        "h": (float, None),
        "cfl": (float, 0.9),
        "times": ("list", None),
    },
    "output": {
        "dir": (str, None),
        "traces": ("list_str", ["front", "energy", "field"]),
        "snapshots": ("list", None),
        "plot": ("bool", True),
    },
}


class ScenarioError(ValidationError):
    """Parse or validation error in a scenario file."""


@dataclass
class Scenario:
    name: str
    mode: str
    nu: float
    ell0: float
    horizon: float
    delta: float
    tolerances: dict
    data: dict
    front: dict
    toughness: dict
    forcing: dict
    oracle: dict
    output: dict
    base_dir: Path = field(default_factory=Path.cwd)
    source: Optional[Path] = None

    # -- builders ---------------------------------------------------------
    def problem_data(self) -> ProblemData:
        n = int(self.data["samples"])
        t_max = max(self.horizon, 1.0) * 2 + 1.0
        u0 = _data_function(self.data["u0"], 0.0, self.ell0, n, self.base_dir, "u0")
        u1 = _data_function(self.data["u1"], 0.0, self.ell0, n, self.base_dir, "u1")
        w = _data_function(self.data["w"], 0.0, t_max, n, self.base_dir, "w")
        return ProblemData(nu=self.nu, ell0=self.ell0, u0=u0, u1=u1, w=w,
                           forcing=_forcing(self.forcing["f"], self.base_dir))

    def prescribed_front(self) -> Front:
        fr = self.front
        t_end = self.horizon + 1.0
        if fr.get("file"):
            return front_from_csv(_resolve(self.base_dir, fr["file"]))
        if fr.get("t") is not None:
            if fr.get("ell") is None or len(fr["t"]) != len(fr["ell"]):
                raise ScenarioError("[front] t and ell must have the same length")
            return Front(np.asarray(fr["t"], float), np.asarray(fr["ell"], float))
        if fr.get("speed") is not None:
            return Front.affine(self.ell0, float(fr["speed"]), t_end)
        return Front.constant(self.ell0, t_end)

    def toughness_model(self) -> Optional[Toughness]:
        tg = self.toughness
        model = tg.get("model")
        if model is None:
            return None
        params = {k: v for k, v in tg.items() if k not in ("model", "eps") and v is not None}
        if model == "time_dependent_sampled" and "values" in params:
            nt = len(params.get("t_points", []))
            nx = len(params.get("x_points", []))
            if nt * nx != len(params["values"]):
                raise ScenarioError("[toughness] values must list len(t_points) * len(x_points) numbers")
            params["values"] = np.asarray(params["values"], float).reshape(nt, nx)
        try:
            return Toughness(model, self.ell0, params, eps=tg.get("eps"))
        except ValidationError as exc:
            raise ScenarioError(f"[toughness] {exc}") from exc

    @property
    def out_dir(self) -> Path:
        d = self.output.get("dir")
        return Path(d) if d else Path("out") / self.name

    def as_text(self) -> str:
        """Resolved scenario with all defaults filled, in the input format."""
        lines = []
        for section, keys in SCHEMA.items():
            values = {k: getattr(self, k) for k in keys} if section == "" else getattr(self, section)
            body = []
            for key in keys:
                v = values.get(key)
                if v is None:
                    continue
                body.append(f"{key} = {_format_value(v)}")
            if section:
                if not body:
                    continue
                lines.append("")
                lines.append(f"[{section}]")
            lines.extend(body)
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kw) -> "Scenario":
        changes = {k: v for k, v in kw.items() if v is not None}
        out = dataclasses.replace(self, **{k: v for k, v in changes.items() if k in ("delta", "horizon")})
        if "tol" in changes:
            out.tolerances = dict(out.tolerances, picard=float(changes["tol"]))
        if "out" in changes:
            out.output = dict(out.output, dir=str(changes["out"]))
        _validate(out)
        return out


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _parse_float(text: str, where: str) -> float:
    s = text.strip()
    if not _NUMBER.match(s):
        raise ScenarioError(f"{where}: expected a number, got {text!r}")
    return float(s)


def _convert(kind, raw: str, where: str):
    if kind is float:
        return _parse_float(raw, where)
    if kind is int:
        v = _parse_float(raw, where)
        if v != int(v):
            raise ScenarioError(f"{where}: expected an integer, got {raw!r}")
        return int(v)
    if kind == "list":
        items = [s for s in raw.split(",") if s.strip()]
        return [_parse_float(s, where) for s in items]
    if kind == "list_str":
        return [s.strip() for s in raw.split(",") if s.strip()]
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ScenarioError(f"{where}: expected true or false, got {raw!r}")
    return raw.strip()


def parse_scenario_text(text: str, source: str = "<string>", base_dir: Optional[Path] = None) -> Scenario:
    """Parse scenario text; errors carry the line number."""
    values: dict[str, dict[str, Any]] = {s: {} for s in SCHEMA}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        where = f"{source}:{lineno}"
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ScenarioError(f"{where}: malformed section header {stripped!r}")
            section = stripped[1:-1].strip()
            if section not in SCHEMA or section == "":
                raise ScenarioError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ScenarioError(f"{where}: expected 'key = value', got {stripped!r}")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in SCHEMA[section]:
            label = f"[{section}] " if section else ""
            raise ScenarioError(f"{where}: unknown key {label}{key!r}")
        if key in values[section]:
            raise ScenarioError(f"{where}: duplicate key {key!r}")
        values[section][key] = _convert(SCHEMA[section][key][0], raw, f"{where}: {key}")
    filled = {}
    for sec, keys in SCHEMA.items():
        filled[sec] = {k: values[sec].get(k, default) for k, (_, default) in keys.items()}
    top = filled.pop("")
    for key in ("name", "mode"):
        if top[key] is None:
            raise ScenarioError(f"{source}: missing required key {key!r}")
    sc = Scenario(**top, **filled, base_dir=base_dir or Path.cwd(),
                  source=Path(source) if source != "<string>" else None)
    _validate(sc)
    return sc


def load_scenario(path) -> Scenario:
    """Read, validate and default-fill a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file {path} not found")
    sc = parse_scenario_text(path.read_text(), str(path), base_dir=path.parent)
    logger.info("loaded scenario %s:\n%s", path, sc.as_text())
    return sc


def _validate(sc: Scenario):
    if sc.mode not in MODES:
        raise ScenarioError(f"mode: must be one of {', '.join(MODES)}, got {sc.mode!r}")
    if not re.match(r"^[A-Za-z0-9_.-]+$", sc.name):
        raise ScenarioError("name: only letters, digits, '_', '-' and '.' are allowed")
    if not sc.ell0 > 0:
        raise ScenarioError("ℓ₀ must be positive")
    if sc.nu < 0:
        raise ScenarioError("nu: damping must be nonnegative")
    if not sc.horizon > 0:
        raise ScenarioError("horizon: must be positive")
    if not sc.delta > 0 or sc.delta > sc.horizon:
        raise ScenarioError("delta: must be positive and not larger than the horizon")
    tol = sc.tolerances
    if not tol["picard"] > 0 or not tol["verify"] > 0:
        raise ScenarioError("tolerances: must be positive")
    if tol["max_iter"] < 1:
        raise ScenarioError("max_iter: must be at least 1")
    if not 0 < tol["safety"] <= 1:
        raise ScenarioError("safety: must lie in (0, 1]")
    if not 0 < tol["speed_cap"] < 1:
        raise ScenarioError("speed_cap: must lie in (0, 1)")
    if sc.data["samples"] < 3:
        raise ScenarioError("samples: need at least 3")
    for key in ("u0", "u1", "w"):
        _check_preset(sc.data[key], key)
    model = sc.toughness.get("model")
    if sc.mode == "coupled" and model is None:
        raise ScenarioError("[toughness] model is required in coupled mode")
    if model is not None and model not in TOUGHNESS_KINDS:
        raise ScenarioError(f"[toughness] model: unknown model {model!r}; choose from {', '.join(TOUGHNESS_KINDS)}")
    eps = sc.toughness.get("eps")
    if eps is not None and not eps > 0:
        raise ScenarioError("[toughness] eps: must be positive")
    if sc.mode == "oracle" and sc.oracle.get("h") is not None and not sc.oracle["h"] > 0:
        raise ScenarioError("[oracle] h: must be positive")
    for t in sc.output.get("snapshots") or []:
        if t < 0 or t > sc.horizon + 1e-12:
            raise ScenarioError(f"snapshots: time {t} outside [0, horizon]")
    unknown = set(sc.output["traces"]) - {"front", "energy", "field"}
    if unknown:
        raise ScenarioError(f"traces: unknown trace(s) {', '.join(sorted(unknown))}")
    if sc.front.get("speed") is not None and not 0 <= sc.front["speed"] <= 1:
        raise ScenarioError("[front] speed: must lie in [0, 1]")


def _check_preset(spec: str, key: str):
    parts = spec.split()
    if not parts:
        raise ScenarioError(f"{key}: empty preset")
    kind = parts[0]
    nargs = {"zero": 0, "constant": 1, "sine": 1, "ramp": 1, "file": 1}
    if kind not in nargs:
        raise ScenarioError(f"{key}: unknown preset {kind!r}; choose zero, constant, sine, ramp or file")
    if len(parts) != nargs[kind] + 1:
        raise ScenarioError(f"{key}: preset {kind} takes {nargs[kind]} argument(s)")
    if kind != "file":
        for p in parts[1:]:
            _parse_float(p, key)


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _read_two_columns(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2, comments="#",
                         skiprows=_header_rows(path))
    except (OSError, ValueError) as exc:
        raise ScenarioError(f"cannot read sample file {path}: {exc}") from exc
    if arr.shape[1] < 2:
        raise ScenarioError(f"sample file {path} needs two columns")
    return arr[:, 0], arr[:, 1]


def _header_rows(path: Path) -> int:
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(x) for x in first.split(",")]
        return 0
    except ValueError:
        return 1


def _data_function(spec: str, a: float, b: float, n: int, base: Path, key: str) -> SampledFunction:
    parts = spec.split()
    kind = parts[0]
    if kind == "file":
        x, y = _read_two_columns(_resolve(base, parts[1]))
        if abs(x[0] - a) > 1e-12 or (key != "w" and abs(x[-1] - b) > 1e-9 * max(1, b)):
            raise ScenarioError(f"{key}: samples must span [{a}, {b}]")
        return SampledFunction(x, y)
    c = float(parts[1]) if len(parts) > 1 else 0.0
    if kind == "zero":
        return SampledFunction.constant(0.0, a, b)
    if kind == "constant":
        return SampledFunction.constant(c, a, b)
    if kind == "sine":
        L = b - a
        return SampledFunction.from_callable(lambda s: np.sin(c * math.pi * (s - a) / L), a, b, n,
                                             dfunc=lambda s: c * math.pi / L * np.cos(c * math.pi * (s - a) / L))
    return SampledFunction.from_callable(lambda s: c * s, a, b, n, dfunc=lambda s: np.full_like(s, c))


def _forcing(spec: str, base: Path):
    parts = spec.split()
    if not parts or parts[0] == "none":
        return None
    if parts[0] == "constant" and len(parts) == 2:
        return constant_forcing(_parse_float(parts[1], "f"))
    if parts[0] == "file" and len(parts) == 2:
        x, y = _read_two_columns(_resolve(base, parts[1]))

        def f(t, xx, _x=x, _y=y):
            return np.interp(np.asarray(xx, float), _x, _y) + 0.0 * np.asarray(t, float)
        f.bound = float(np.max(np.abs(y)))  # type: ignore[attr-defined]
        return f
    raise ScenarioError(f"f: unknown forcing {spec!r}; use none, constant c or file <path>")


def front_from_csv(path) -> Front:
    """Front breakpoints from a CSV whose first two columns are ``t`` and ``ell``."""
    t, ell = _read_two_columns(Path(path))
    try:
        return Front(t, ell)
    except ValidationError as exc:
        raise ScenarioError(f"candidate front {path}: {exc}") from exc
