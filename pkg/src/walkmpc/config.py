"""Experiment configuration: a flat ``key = value`` file with sections.

Every key has a default, so an empty file is a valid configuration. Unknown
sections or keys are errors that carry the offending line number.
:func:`format_config` writes every key back out, and parsing that text gives
an equal :class:`ExperimentConfig`.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSection:
    com_height: float = 0.88
    gravity: float = 9.81
    sampling_dt: float = 0.1


@dataclass(frozen=True)
class DisturbanceSection:
    sigma_c: float = 0.0008
    sigma_cdot: float = 0.008
    bound_c: float = 0.0016
    bound_cdot: float = 0.016


@dataclass(frozen=True)
class ControllerSection:
    horizon: int = 16
    # "reference" (3.386, 0.968), "deadbeat", or two comma-separated numbers
    gain: str = "reference"
    mrpi_eps: float = 1e-6
    variants: tuple[str, ...] = ("nominal", "rmpc", "smpc")
    beta_x: tuple[float, ...] = (0.5, 0.05, 0.01, 0.00001)
    beta_u: float = 0.5
    weight_velocity: float = 1.0
    weight_position: float = 0.0
    weight_cop: float = 30.0


@dataclass(frozen=True)
class PlanSection:
    n_steps: int = 8
    step_duration: int = 8
    in_place_steps: int = 2
    foot_offset_y: float = 0.075
    cop_half_width_y: float = 0.05
    hallway_half_width: float = 0.04
    hallway_start_step: int = 2
    disturbance_start_step: int = 4
    first_foot_sign: int = 1
    initial_double_support: int = 4


@dataclass(frozen=True)
class ExperimentSection:
    seed: int = 7
    runs: int = 200
    out: str = "out"
    rpi_samples: int = 6
    rpi_steps: int = 50
    rpi_random_starts: int = 1000
    mrpi_eps_coarse: float = 1e-3
    worstcase_row: tuple[float, ...] = (1.0, 0.0)
    worstcase_beta: float = 0.05
    worstcase_i_max: int = 15
    mono_trials_1d: int = 10000
    mono_trials_nd: int = 1000
    mono_horizon: int = 30


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    disturbance: DisturbanceSection = field(default_factory=DisturbanceSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    plan: PlanSection = field(default_factory=PlanSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(ExperimentConfig)}
VARIANTS = ("nominal", "rmpc", "smpc")


def _kind(section_cls, key: str) -> str:
    return {f.name: f.type for f in dataclasses.fields(section_cls)}[key]


def _convert(kind: str, raw: str):
    if kind == "float":
        return float(raw)
    if kind == "int":
        return int(raw)
    if kind == "str":
        return raw
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if kind == "tuple[float, ...]":
        return tuple(float(s) for s in items)
    if kind == "tuple[str, ...]":
        return tuple(items)
    raise TypeError(f"unsupported field type {kind}")


def _render(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values: dict[str, dict] = {name: {} for name in SECTIONS}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        where = f"{source}:{lineno}"
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {s!r}")
            section = s[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in s:
            raise ConfigError(f"{where}: expected 'key = value', got {s!r}")
        if section is None:
            raise ConfigError(f"{where}: key outside of any section")
        key, raw = (p.strip() for p in s.split("=", 1))
        cls = SECTIONS[section]
        if key not in {f.name for f in dataclasses.fields(cls)}:
            raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
        if key in values[section]:
            raise ConfigError(f"{where}: duplicate key {key!r} in [{section}]")
        try:
            values[section][key] = _convert(_kind(cls, key), raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    cfg = ExperimentConfig(**{name: SECTIONS[name](**kw) for name, kw in values.items()})
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def format_config(cfg: ExperimentConfig) -> str:
    out = []
    for name in SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in dataclasses.fields(sec):
            out.append(f"{f.name} = {_render(getattr(sec, f.name))}")
        out.append("")
    return "\n".join(out)


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Apply command-line overrides given as ``section__key=value``; ``None`` is skipped."""
    for full, value in changes.items():
        if value is None:
            continue
        name, key = full.split("__")
        cfg = dataclasses.replace(cfg, **{name: dataclasses.replace(getattr(cfg, name), **{key: value})})
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    m, d, c, p, e = cfg.model, cfg.disturbance, cfg.controller, cfg.plan, cfg.experiment
    checks = [
        (m.com_height > 0 and m.gravity > 0, "model: com_height and gravity must be positive"),
        (m.sampling_dt > 0, "model: sampling_dt must be positive"),
        (min(d.sigma_c, d.sigma_cdot) >= 0, "disturbance: standard deviations must be non-negative"),
        (min(d.bound_c, d.bound_cdot) >= 0, "disturbance: bounds must be non-negative"),
        (c.horizon >= 1, "controller: horizon must be >= 1"),
        (c.mrpi_eps > 0, "controller: mrpi_eps must be positive"),
        (len(c.variants) > 0 and set(c.variants) <= set(VARIANTS),
         f"controller: variants must be a non-empty subset of {VARIANTS}"),
        (len(c.beta_x) > 0 and all(0 < b <= 0.5 for b in c.beta_x),
         "controller: every beta_x must lie in (0, 0.5]"),
        (0 < c.beta_u <= 0.5, "controller: beta_u must lie in (0, 0.5]"),
        (min(c.weight_velocity, c.weight_position, c.weight_cop) >= 0
         and max(c.weight_velocity, c.weight_position, c.weight_cop) > 0,
         "controller: weights must be non-negative with one positive"),
        (p.n_steps >= 1 and p.step_duration >= 1, "plan: n_steps and step_duration must be >= 1"),
        (p.initial_double_support >= 0, "plan: initial_double_support must be >= 0"),
        (p.first_foot_sign in (-1, 1), "plan: first_foot_sign must be 1 or -1"),
        (p.cop_half_width_y > 0 and p.hallway_half_width > 0, "plan: half widths must be positive"),
        (e.seed >= 0, "experiment: seed must be non-negative"),
        (e.runs >= 1, "experiment: runs must be >= 1"),
        (len(e.worstcase_row) == 2 and any(e.worstcase_row), "experiment: worstcase_row needs two entries, not both zero"),
        (0 < e.worstcase_beta <= 0.5, "experiment: worstcase_beta must lie in (0, 0.5]"),
        (e.mrpi_eps_coarse > 0, "experiment: mrpi_eps_coarse must be positive"),
        (min(e.rpi_samples, e.rpi_steps, e.worstcase_i_max, e.mono_horizon) >= 1,
         "experiment: sample, step and horizon counts must be >= 1"),
        (min(e.rpi_random_starts, e.mono_trials_1d, e.mono_trials_nd) >= 0,
         "experiment: trial counts must be >= 0"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    g = c.gain.strip()
    if g not in ("reference", "deadbeat"):
        try:
            vals = [float(s) for s in g.split(",")]
        except ValueError:
            vals = []
        if len(vals) != 2:
            raise ConfigError(f"controller: gain must be 'reference', 'deadbeat' or two numbers, got {g!r}")
