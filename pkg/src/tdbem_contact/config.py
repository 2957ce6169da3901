"""Run configuration, boundary-data expressions and experiment presets.

A RunConfig is plain JSON-compatible data.  Boundary data and gaps are
expressions in t, x, y (numpy semantics) with H (Heaviside, H(0) = 0),
sin, cos, exp, sqrt, abs, pi, sum, range, min and max available.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Material, Region, TimeGrid, build_preset_mesh


def heaviside(v):
    return (np.asarray(v) > 0).astype(float)


_NAMES = {"H": heaviside, "sin": np.sin, "cos": np.cos, "exp": np.exp,
          "sqrt": lambda v: np.sqrt(np.maximum(v, 0.0)), "abs": np.abs, "pi": math.pi,
          "sum": sum, "range": range, "min": np.minimum, "max": np.maximum,
          "where": np.where}


def _all_names(code):
    names = set(code.co_names)
    for const in code.co_consts:
        if hasattr(const, "co_names"):
            names |= _all_names(const)
    return names


class Expression:
    """Compiled scalar expression f(t, x, y)."""

    def __init__(self, source: str | float):
        self.source = str(source)
        try:
            self._code = compile(self.source, "<expr>", "eval")
        except SyntaxError as exc:
            raise ConfigError(f"invalid expression {self.source!r}: {exc.msg}") from None
        for name in _all_names(self._code):
            if name not in _NAMES and name not in ("t", "x", "y", "k"):
                raise ConfigError(f"unknown name {name!r} in expression {self.source!r}")

    def __call__(self, t, x, y):
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        env = dict(_NAMES, t=t, x=x, y=y, __builtins__={})
        val = eval(self._code, env)
        return np.broadcast_to(np.asarray(val, float), np.broadcast_shapes(t.shape, x.shape))


@dataclass
class RunConfig:
    name: str
    mesh: dict
    material: dict
    T: float
    n_steps: int
    formulation: str = "nonsymmetric"
    loads: list = field(default_factory=list)      # {"group", "component" (1|2), "expr"}
    t_breaks: list = field(default_factory=list)
    gap: str | None = None
    uzawa: dict = field(default_factory=lambda: {"rho": 1.0, "eps": 1e-5, "max_iter": 10000})
    quadrature: dict = field(default_factory=dict)
    trace_points: dict = field(default_factory=dict)   # name -> [x, y]
    interior_points: dict = field(default_factory=dict)
    out: str = "out"
    cache_dir: str | None = None

    def validate(self):
        from .assembly import FORMULATIONS
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation: expected one of {FORMULATIONS}, got {self.formulation!r}")
        for key in ("preset", "h"):
            if key not in self.mesh:
                raise ConfigError(f"mesh.{key}: missing")
        for i, ld in enumerate(self.loads):
            if ld.get("component") not in (1, 2):
                raise ConfigError(f"loads[{i}].component: must be 1 or 2")
            Expression(ld.get("expr", "0"))
        if self.gap is not None:
            Expression(self.gap)
        u = self.uzawa
        if not (u.get("rho", 0) > 0 and u.get("eps", 0) > 0):
            raise ConfigError("uzawa.rho and uzawa.eps must be positive")
        if not (self.T > 0 and int(self.n_steps) == self.n_steps and self.n_steps >= 1):
            raise ConfigError("T must be positive and n_steps a positive integer")
        return self

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    # ------------------------------------------------------------ builders
    def build_mesh(self):
        params = {k: v for k, v in self.mesh.items() if k not in ("preset", "h")}
        mesh = build_preset_mesh(self.mesh["preset"], float(self.mesh["h"]), **params)
        groups = set(mesh.groups)
        for i, ld in enumerate(self.loads):
            if ld["group"] not in groups:
                raise ConfigError(f"loads[{i}].group: no mesh elements in group {ld['group']!r}")
        return mesh

    def build_material(self) -> Material:
        try:
            return Material(**self.material)
        except TypeError as exc:
            raise ConfigError(f"material: {exc}") from None

    def build_grid(self) -> TimeGrid:
        return TimeGrid(float(self.T), int(self.n_steps))

    def load_function(self):
        """f(x, t, group) -> (..., 2) for assemble_rhs; None if no loads."""
        if not self.loads:
            return None
        table = {}
        for ld in self.loads:
            table.setdefault(ld["group"], []).append((ld["component"] - 1, Expression(ld["expr"])))

        def f(x, t, group):
            x = np.asarray(x, float)
            shape = np.broadcast_shapes(x.shape[:-1], np.shape(t))
            out = np.zeros(shape + (2,))
            for comp, ex in table.get(group, ()):
                out[..., comp] += ex(t, x[..., 0], x[..., 1])
            return out
        return f

    def gap_function(self):
        if self.gap is None:
            return None
        ex = Expression(self.gap)

        def g(x, t):
            x = np.asarray(x, float)
            return ex(t, x[..., 0], x[..., 1])
        return g

    # ------------------------------------------------------------ i/o
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "dt" in data:
            dt = data.pop("dt")
            if "n_steps" not in data:
                data["n_steps"] = TimeGrid.from_dt(data["T"], dt).n_steps
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"name", "mesh", "material", "T", "n_steps"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(**data).validate()

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None


# ---------------------------------------------------------------- presets

_EX1_MAT = {"rho": 1.0, "cP": 1.0, "cS": 1.0 / math.sqrt(2.0)}
_EX2_MAT = {"rho": 1.0, "cP": 2.0, "cS": 1.0}
_SIDES = {"top": [0.0, 0.5], "right": [0.5, 0.0], "bottom": [0.0, -0.5], "left": [-0.5, 0.0]}

BOUNCE_LOAD = "0.1*sum((-1)**k*(H(t-0.1*k)-H(t-0.1*(k+1))) for k in range(9))"
DISK_GAP = "(4*sqrt(1-1.5*(t-0.5)**2)-4)*H(1.3-t)-3.2*H(t-1.3)-y"

PRESET_NAMES = ("1", "2t1", "2t2", "3t1", "3t2", "bounce", "4")


def ex3_rho(h: float) -> float:
    """Uzawa step for the square contact examples, growing as h decreases."""
    return 1e2 if h >= 0.1 - 1e-12 else (1e3 if h >= 0.05 - 1e-12 else 1e4)


def preset(name: str, h: float | None = None, dt: float | None = None, T: float | None = None,
           formulation: str | None = None, rho: float | None = None, eps: float | None = None,
           out: str | None = None) -> RunConfig:
    """Configs for the experiments; keyword overrides replace the defaults."""
    name = str(name).lower().removeprefix("example")
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown example {name!r}; expected one of {PRESET_NAMES}")
    if name == "1":
        h = h or 0.05
        d = dict(name="example1", mesh={"preset": "square", "h": h}, material=_EX1_MAT,
                 T=2.0, dt=dt or h, formulation="nonsymmetric",
                 loads=[{"group": "top", "component": 2, "expr": "1"},
                        {"group": "bottom", "component": 2, "expr": "-2*H(t-1)"}],
                 t_breaks=[1.0], uzawa={"rho": 1.0, "eps": 1e-5, "max_iter": 10000},
                 trace_points=dict(_SIDES))
    elif name in ("2t1", "2t2"):
        h = h or 0.025
        if name == "2t1":
            expr, tb = "-sin(8*pi*t)*H(0.1875-t)+H(t-0.1875)", 0.1875
        else:
            expr, tb = "-sin(16*pi*t)*H(0.21875-t)+H(t-0.21875)", 0.21875
        d = dict(name=f"example2_test{name[-1]}",
                 mesh={"preset": "slit", "h": h, "contact": [-0.2, 0.2]},
                 material=_EX2_MAT, T=3.0, dt=dt or h / 2, formulation="nonsymmetric",
                 loads=[{"group": "slit", "component": 2, "expr": expr}], t_breaks=[tb],
                 uzawa={"rho": 1e5, "eps": 1e-5, "max_iter": 10000},
                 trace_points={"midpoint": [0.0, 0.0]})
    elif name in ("3t1", "3t2", "bounce"):
        h = h or (0.0125 if name == "bounce" else 0.05)
        loads = [{"group": "top", "component": 2,
                  "expr": BOUNCE_LOAD if name == "bounce" else "-0.1*H(t)"}]
        if name == "3t2":
            loads.append({"group": "right", "component": 1, "expr": "-0.1*H(t)"})
        tb = [0.1 * k for k in range(1, 10)] if name == "bounce" else []
        d = dict(name={"3t1": "example3_test1", "3t2": "example3_test2",
                       "bounce": "example3_bounce"}[name],
                 mesh={"preset": "square", "h": h,
                       "regions": {"bottom": "contact", "left": "contact"}},
                 material=_EX1_MAT, T=2.0, dt=dt or h, formulation="nonsymmetric",
                 loads=loads, t_breaks=tb,
                 uzawa={"rho": ex3_rho(h), "eps": 1e-5, "max_iter": 10000},
                 trace_points=dict(_SIDES))
    else:
        h = h or 0.02
        d = dict(name="example4", mesh={"preset": "circle", "h": h, "radius": 0.2},
                 material=_EX2_MAT, T=2.0, dt=dt or h / 2, formulation="symmetric",
                 loads=[], t_breaks=[1.3], gap=DISK_GAP,
                 uzawa={"rho": 1e4, "eps": 1e-4, "max_iter": 10000},
                 trace_points={"bottom": [0.0, -0.2]},
                 interior_points={"barycenter": [0.0, 0.0]})
    if T is not None:
        d["T"] = T
    if formulation is not None:
        d["formulation"] = formulation
    if rho is not None:
        d["uzawa"] = dict(d["uzawa"], rho=rho)
    if eps is not None:
        d["uzawa"] = dict(d["uzawa"], eps=eps)
    d["out"] = out or f"out/{d['name']}"
    return RunConfig.from_dict(copy.deepcopy(d))
