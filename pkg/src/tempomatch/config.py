"""Run configuration: dataclasses mirroring the TOML file layout.

A value of None for a tunable marked "auto" in the file means the engine
derives it from the estimated constants (gains from the design bounds,
bias from the signal floor, dt from the stability guard). Every field is
plain data so a resolved configuration can be echoed back to JSON.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import asdict, dataclass, field as dc_field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

AUTO = None  # sentinel spelled "auto" in TOML files


@dataclass
class RunSettings:
    dt: float | None = None
    horizon: float = 1000.0
    seed: int = 0
    record_stride: int = 50
    final_window_frac: float = 0.25
    convergence_window_frac: float = 0.2
    theta2_tv_tol: float = 1e-3
    init: str = "default"  # or "circle-random"

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")
        if self.init not in ("default", "circle-random"):
            raise ConfigError(f"unknown init mode {self.init!r}")
        if not (0 < self.final_window_frac <= 0.5):
            raise ConfigError("final_window_frac must be in (0, 0.5]")


@dataclass
class FieldSpec:
    """Where an image or template comes from."""

    source: str = "garner"  # garner | pgm | constant
    order: int = 1
    pattern_seed: int = 0
    n: int = 32
    dots: int = 5
    dot_sigma: float = 0.11
    path: str | None = None
    value: float = 1.0
    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.source not in ("garner", "pgm", "constant"):
            raise ConfigError(f"unknown field source {self.source!r}")
        if self.source == "pgm" and not self.path:
            raise ConfigError("pgm field source needs a path")


@dataclass
class PerturbationConfig:
    kind: str = "rotate"
    theta1: float = 1.0
    theta2: float = 0.0
    theta1_range: tuple = (0.5, 2.0)
    theta2_range: tuple = (0.0, 2.0 * math.pi)

    def __post_init__(self):
        self.theta1_range = tuple(self.theta1_range)
        self.theta2_range = tuple(self.theta2_range)


@dataclass
class EncoderConfig:
    mode: str = "frequency-strips"
    strips: int = 8
    omega_base: float = 1.0
    carrier: str = "sin2"
    bias: float | None = None  # auto: lift the signal floor
    bias_floor_frac: float = 0.05
    n_table: int = 361
    period: float = 1.0  # sweep mode only

    def __post_init__(self):
        if self.mode not in ("frequency-strips", "sweep"):
            raise ConfigError("engine encoding supports frequency-strips or sweep")
        if self.carrier != "sin2":
            raise ConfigError("only the sin2 carrier is validated")
        if self.strips < 1:
            raise ConfigError("strip count must be >= 1")
        if self.n_table < 2:
            raise ConfigError("n_table must be >= 2")


@dataclass
class AdaptConfig:
    tau: float = 1.0
    k: float = 1.0
    gamma1: float | None = None
    gamma2: float | None = None
    epsilon: float | None = None
    timescale_ratio: float = 100.0
    gamma2_safety: float = 0.5
    epsilon_margin: float = 1.2
    epsilon_floor: float = 0.0


@dataclass
class ConstantsConfig:
    d: float | None = None
    d2: float | None = None
    d3: float | None = None
    d4: float | None = None
    delta: float | None = None
    method: str = "signal"  # signal: measured encoder sensitivity; pixel: worst-case per pixel
    lipschitz_safety: float = 1.5
    theta2_grid_points: int = 33
    delta_grid_points: int = 17

    def __post_init__(self):
        if self.method not in ("signal", "pixel"):
            raise ConfigError(f"unknown constants method {self.method!r}")


@dataclass
class HRConfig:
    a: float = 1.0
    b: float = 3.0
    c: float = 1.0
    d: float = 5.0
    s: float = 4.0
    x0: float = 1.6
    eps: float = 0.001
    current: float = 3.25
    gamma: float | None = None
    gamma_margin: float = 1.5
    delta_thresh: float = 0.1


@dataclass
class RunConfig:
    run: RunSettings = dc_field(default_factory=RunSettings)
    image: FieldSpec = dc_field(default_factory=FieldSpec)
    templates: list = dc_field(default_factory=lambda: [FieldSpec()])
    perturb: PerturbationConfig = dc_field(default_factory=PerturbationConfig)
    encoder: EncoderConfig = dc_field(default_factory=EncoderConfig)
    adapt: AdaptConfig = dc_field(default_factory=AdaptConfig)
    constants: ConstantsConfig = dc_field(default_factory=ConstantsConfig)
    hr: HRConfig = dc_field(default_factory=HRConfig)
    experiment: dict = dc_field(default_factory=dict)

    def copy(self) -> "RunConfig":
        return copy.deepcopy(self)

    def as_dict(self) -> dict:
        return asdict(self)

    def set_path(self, dotted: str, value):
        """Assign cfg.<a>.<b> = value by dotted path."""
        parts = dotted.split(".")
        obj = self
        for p in parts[:-1]:
            if not hasattr(obj, p):
                raise ConfigError(f"unknown config path {dotted!r}")
            obj = getattr(obj, p)
        if not hasattr(obj, parts[-1]):
            raise ConfigError(f"unknown config path {dotted!r}")
        setattr(obj, parts[-1], value)

    def get_path(self, dotted: str):
        obj = self
        for p in dotted.split("."):
            if not hasattr(obj, p):
                raise ConfigError(f"unknown config path {dotted!r}")
            obj = getattr(obj, p)
        return obj


def _clean_auto(d: dict) -> dict:
    return {k: (None if v == "auto" else v) for k, v in d.items()}


def config_from_dict(raw: dict) -> RunConfig:
    """Build a RunConfig from parsed TOML, mapping "auto" to None."""
    try:
        run = RunSettings(**_clean_auto(raw.get("run", {})))
        image = FieldSpec(**raw.get("image", {}))
        tmpl_raw = raw.get("template", [])
        if isinstance(tmpl_raw, dict):
            tmpl_raw = [tmpl_raw]
        templates = [FieldSpec(**t) for t in tmpl_raw] or [FieldSpec(**raw.get("image", {}))]
        perturb = PerturbationConfig(**raw.get("perturbation", {}))
        encoder = EncoderConfig(**_clean_auto(raw.get("encoder", {})))
        adapt = AdaptConfig(**_clean_auto(raw.get("adapt", {})))
        constants = ConstantsConfig(**_clean_auto(raw.get("constants", {})))
        hr = HRConfig(**_clean_auto(raw.get("hr", {})))
    except TypeError as exc:
        raise ConfigError(f"bad configuration key: {exc}") from None
    return RunConfig(
        run=run,
        image=image,
        templates=templates,
        perturb=perturb,
        encoder=encoder,
        adapt=adapt,
        constants=constants,
        hr=hr,
        experiment=raw.get("experiment", {}),
    )


def parse_override_value(text: str):
    """Interpret a --set value as a TOML literal, else a raw string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config(path, overrides=()) -> RunConfig:
    """Read a TOML config file and apply key=value overrides.

    Overrides address dataclass fields by dotted path, e.g.
    adapt.gamma2=0.004 or hr.gamma=16.2; values parse as TOML literals
    ("auto" maps to automatic selection).
    """
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} does not parse: {exc}") from None
    cfg = config_from_dict(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, text = item.partition("=")
        value = parse_override_value(text.strip())
        if value == "auto":
            value = None
        cfg.set_path(key.strip(), value)
    return cfg
