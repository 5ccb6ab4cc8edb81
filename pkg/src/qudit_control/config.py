"""JSON run configuration.

Physical quantities are given in the units people quote them in and
converted on the way in:

==========================  ==========  ==================================
field                       unit        internal value
==========================  ==========  ==================================
model.omega_a_ghz           GHz         ``2 pi x`` rad/ns
model.xi_a_ghz              GHz         ``2 pi x`` rad/ns
controls.carriers_ghz       GHz         ``2 pi x`` rad/ns
controls.alpha_max_mhz      MHz         ``2 pi x 1e-3`` rad/ns (box on alpha)
controls.control_limit_mhz  MHz         limit ``c`` on ``max|p|``, ``max|q|``;
                                        box ``alpha_max = 2 pi c 1e-3 / (sqrt 2 N_f)``
grid.duration_ns            ns          as is
==========================  ==========  ==================================

``optimizer.init_amplitude`` is in internal units (rad/ns), like alpha.
A config names a built-in target (``cnot``, ``identity``, ``swap`` with
``swap_level``, ``x``) or a JSON matrix file, resolved relative to the
config file.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .controls import CarrierSet, ControlParameterization, SplineGrid
from .integrator import TimeGrid, estimate_timestep
from .model import QuditModel, TargetGate, load_target
from .optimizer import OptimizerConfig
from .problem import GateProblem

TWO_PI = 2.0 * math.pi

BUILTIN_TARGETS = ("cnot", "identity", "swap", "x")
ARTIFACTS = ("breakdown", "populations", "history", "alpha", "summary", "spectrum", "probe", "report")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ModelSection:
    levels: int
    essential: int
    omega_a_ghz: float
    xi_a_ghz: float
    guard_weights: tuple = ()
    guard: int | None = None


@dataclass(frozen=True)
class ControlsSection:
    splines_per_carrier: int
    carriers_ghz: tuple
    alpha_max_mhz: float | None = None
    control_limit_mhz: float | None = None


@dataclass(frozen=True)
class GridSection:
    duration_ns: float
    points_per_period: float = 40.0
    steps: int | None = None


@dataclass(frozen=True)
class TargetSection:
    builtin: str | None = None
    swap_level: int | None = None
    file: str | None = None


@dataclass(frozen=True)
class OptimizerSection:
    memory: int = 10
    tol: float = 1e-5
    max_iter: int = 200
    seed: int = 0
    init_amplitude: float = 0.01
    max_backtracks: int = 30
    armijo: float = 1e-4


@dataclass(frozen=True)
class AnalysisSection:
    fd_eps: float = 1e-6
    probe_eps: tuple = (1e-6,)
    spectrum_samples: int = 1 << 15
    gradient_rtol_fd: float = 1e-6
    gradient_rtol_sensitivity: float = 1e-10
    reversibility_tol: float = 1e-10


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    artifacts: tuple = ("breakdown", "history", "alpha", "summary")


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection
    controls: ControlsSection
    grid: GridSection
    target: TargetSection
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)
    name: str = ""
    base_dir: str | None = field(default=None, compare=False)

    # -- derived, internal units ------------------------------------------
    @property
    def omega_a(self) -> float:
        return TWO_PI * self.model.omega_a_ghz

    @property
    def xi_a(self) -> float:
        return TWO_PI * self.model.xi_a_ghz

    @property
    def carriers(self) -> tuple:
        return tuple(TWO_PI * f for f in self.controls.carriers_ghz)

    @property
    def alpha_max(self) -> float:
        c = self.controls
        if c.alpha_max_mhz is not None:
            return TWO_PI * 1e-3 * c.alpha_max_mhz
        if c.control_limit_mhz is not None:
            return TWO_PI * 1e-3 * c.control_limit_mhz / (math.sqrt(2.0) * len(c.carriers_ghz))
        return math.inf

    def to_dict(self) -> dict:
        out = {}
        if self.name:
            out["name"] = self.name
        for f in fields(self):
            if f.name in ("name", "base_dir"):
                continue
            sec = asdict(getattr(self, f.name))
            out[f.name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sec.items() if v is not None}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected an object")
        known = {"name", "model", "controls", "grid", "target", "optimizer", "analysis", "output"}
        for k in data:
            if k not in known:
                raise ConfigError(k, "unknown section")
        for k in ("model", "controls", "grid", "target"):
            if k not in data:
                raise ConfigError(k, "missing required section")
        cfg = cls(
            model=_section(ModelSection, data["model"], "model"),
            controls=_section(ControlsSection, data["controls"], "controls"),
            grid=_section(GridSection, data["grid"], "grid"),
            target=_section(TargetSection, data["target"], "target"),
            optimizer=_section(OptimizerSection, data.get("optimizer", {}), "optimizer"),
            analysis=_section(AnalysisSection, data.get("analysis", {}), "analysis"),
            output=_section(OutputSection, data.get("output", {}), "output"),
            name=str(data.get("name", "")),
            base_dir=None if base_dir is None else str(base_dir),
        )
        validate(cfg)
        return cfg


# -- parsing helpers --------------------------------------------------------

_INT_FIELDS = {"levels", "essential", "guard", "splines_per_carrier", "steps", "swap_level",
               "memory", "max_iter", "seed", "max_backtracks", "spectrum_samples"}
_STR_FIELDS = {"builtin", "file", "directory"}
_LIST_FIELDS = {"guard_weights", "carriers_ghz", "probe_eps", "artifacts"}


def _number(value, path):
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _section(kind, data, name):
    if not isinstance(data, dict):
        raise ConfigError(name, "expected an object")
    names = {f.name for f in fields(kind)}
    kwargs = {}
    for key, value in data.items():
        path = f"{name}.{key}"
        if key not in names:
            raise ConfigError(path, "unknown field")
        if value is None:
            continue
        if key in _INT_FIELDS:
            kwargs[key] = _integer(value, path)
        elif key in _STR_FIELDS:
            if not isinstance(value, str):
                raise ConfigError(path, f"expected a string, got {value!r}")
            kwargs[key] = value
        elif key in _LIST_FIELDS:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(path, "expected a list")
            if key == "artifacts":
                kwargs[key] = tuple(str(v) for v in value)
            else:
                kwargs[key] = tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))
        else:
            kwargs[key] = _number(value, path)
    try:
        return kind(**kwargs)
    except TypeError as exc:
        missing = [f.name for f in fields(kind) if f.name not in kwargs and f.default is f.default_factory is None]
        raise ConfigError(name, f"missing field(s) {missing or ''}: {exc}") from None


def validate(cfg: RunConfig) -> None:
    """Cross-field checks; raises :class:`ConfigError` naming the field."""
    m, c, g, t, o, a = cfg.model, cfg.controls, cfg.grid, cfg.target, cfg.optimizer, cfg.analysis
    if m.levels < 2:
        raise ConfigError("model.levels", "need at least 2 levels")
    if not 1 <= m.essential <= m.levels:
        raise ConfigError("model.essential", f"must lie in [1, levels={m.levels}]")
    if m.guard is not None and m.guard != m.levels - m.essential:
        raise ConfigError("model.guard", f"must equal levels - essential = {m.levels - m.essential}")
    if m.guard_weights:
        if len(m.guard_weights) != m.levels:
            raise ConfigError(
                "model.guard_weights", f"expected {m.levels} entries, got {len(m.guard_weights)}"
            )
        if any(w != 0 for w in m.guard_weights[: m.essential]):
            raise ConfigError("model.guard_weights", "must be zero on the essential levels")
        if any(w < 0 for w in m.guard_weights):
            raise ConfigError("model.guard_weights", "must be non-negative")
    if not math.isfinite(m.omega_a_ghz):
        raise ConfigError("model.omega_a_ghz", "must be finite")
    if c.splines_per_carrier < 3:
        raise ConfigError("controls.splines_per_carrier", "need at least 3")
    if len(c.carriers_ghz) < 1:
        raise ConfigError("controls.carriers_ghz", "need at least one carrier")
    if len(set(c.carriers_ghz)) != len(c.carriers_ghz):
        raise ConfigError("controls.carriers_ghz", "duplicate carrier frequencies")
    if c.alpha_max_mhz is not None and c.control_limit_mhz is not None:
        raise ConfigError("controls", "give alpha_max_mhz or control_limit_mhz, not both")
    for key in ("alpha_max_mhz", "control_limit_mhz"):
        val = getattr(c, key)
        if val is not None and not val > 0:
            raise ConfigError(f"controls.{key}", "must be positive")
    if not (g.duration_ns > 0 and math.isfinite(g.duration_ns)):
        raise ConfigError("grid.duration_ns", "must be positive")
    if g.steps is None:
        if not g.points_per_period > 2:
            raise ConfigError("grid.points_per_period", "must exceed 2")
        if not math.isfinite(cfg.alpha_max):
            raise ConfigError("grid.steps", "required when the controls have no amplitude bound")
    elif g.steps < 0:
        raise ConfigError("grid.steps", "must be non-negative")
    if (t.builtin is None) == (t.file is None):
        raise ConfigError("target", "give exactly one of builtin or file")
    if t.builtin is not None:
        if t.builtin not in BUILTIN_TARGETS:
            raise ConfigError("target.builtin", f"unknown gate {t.builtin!r}; choose from {BUILTIN_TARGETS}")
        if t.builtin == "cnot" and m.essential != 4:
            raise ConfigError("target.builtin", "cnot needs essential = 4")
        if t.builtin == "x" and m.essential != 2:
            raise ConfigError("target.builtin", "x needs essential = 2")
        if t.builtin == "swap":
            if t.swap_level is None:
                raise ConfigError("target.swap_level", "required for the swap target")
            if t.swap_level + 1 != m.essential:
                raise ConfigError("target.swap_level", f"swap_level + 1 must equal essential = {m.essential}")
    try:
        OptimizerConfig(alpha_max=cfg.alpha_max, **asdict(o))
    except ValueError as exc:
        raise ConfigError("optimizer", str(exc)) from None
    if not a.fd_eps > 0:
        raise ConfigError("analysis.fd_eps", "must be positive")
    if not a.probe_eps or any(not e > 0 for e in a.probe_eps):
        raise ConfigError("analysis.probe_eps", "need positive step sizes")
    n = a.spectrum_samples
    if n < 2 or n & (n - 1):
        raise ConfigError("analysis.spectrum_samples", "must be a power of two")
    for art in cfg.output.artifacts:
        if art not in ARTIFACTS:
            raise ConfigError("output.artifacts", f"unknown artifact {art!r}")


# -- loading ----------------------------------------------------------------


def builtin_names() -> list[str]:
    root = resources.files("qudit_control") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(source) -> RunConfig:
    """Read a config from a path or ``builtin:NAME``."""
    src = str(source)
    if src.startswith("builtin:"):
        name = src.split(":", 1)[1]
        res = resources.files("qudit_control") / "configs" / f"{name}.json"
        if not res.is_file():
            raise ConfigError("config", f"no built-in config {name!r}; available: {builtin_names()}")
        return parse_config(res.read_text(), base_dir=None)
    path = Path(src)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.parent)


def parse_config(text: str, base_dir=None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return RunConfig.from_dict(data, base_dir=base_dir)


# -- building ---------------------------------------------------------------


def build_model(cfg: RunConfig) -> QuditModel:
    w = cfg.model.guard_weights or None
    return QuditModel(cfg.model.levels, cfg.model.essential, cfg.omega_a, cfg.xi_a, w)


def build_controls(cfg: RunConfig) -> ControlParameterization:
    return ControlParameterization(
        SplineGrid(cfg.controls.splines_per_carrier, cfg.grid.duration_ns), CarrierSet(cfg.carriers)
    )


def build_target(cfg: RunConfig) -> TargetGate:
    t, N, E = cfg.target, cfg.model.levels, cfg.model.essential
    if t.file is not None:
        path = Path(t.file)
        if not path.is_absolute() and cfg.base_dir is not None:
            path = Path(cfg.base_dir) / path
        tg = load_target(path, N)
        if tg.V.shape != (N, E):
            raise ConfigError("target.file", f"matrix is {tg.V.shape[1]}x{tg.V.shape[1]}, expected {E}x{E}")
        return tg
    if t.builtin == "cnot":
        return TargetGate.cnot(N)
    if t.builtin == "identity":
        return TargetGate.identity(E, N)
    if t.builtin == "x":
        return TargetGate.from_gate(np.array([[0.0, 1.0], [1.0, 0.0]]), N)
    return TargetGate.swap(t.swap_level, N)


def build_grid(cfg: RunConfig, model: QuditModel | None = None) -> TimeGrid:
    g = cfg.grid
    if g.steps is not None:
        return TimeGrid(g.duration_ns, g.steps)
    model = build_model(cfg) if model is None else model
    return estimate_timestep(model, cfg.alpha_max, len(cfg.carriers), g.points_per_period, g.duration_ns)


def build_problem(cfg: RunConfig) -> GateProblem:
    model = build_model(cfg)
    return GateProblem(model, build_controls(cfg), build_grid(cfg, model), build_target(cfg), cfg.alpha_max)


def optimizer_config(cfg: RunConfig, seed: int | None = None) -> OptimizerConfig:
    opts = asdict(cfg.optimizer)
    if seed is not None:
        opts["seed"] = seed
    return OptimizerConfig(alpha_max=cfg.alpha_max, **opts)
