"""
biodelay Run Configuration

Versioned JSON schema for one CLI run. Sections are declared with typed
fields collected by a metaclass; unknown keys are rejected at every level.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Type, Union

from ..core.constants import (
    CONFIG_SCHEMA_VERSION,
    DECAY_GRID,
    DECAY_SIGMA_TOL,
    DEFAULT_DT,
    DEFAULT_FIT_DT,
    DEFAULT_H_POINTS,
    DEFAULT_H_RANGE,
    DEFAULT_N_MAX,
    DEFAULT_N_RANGE,
    DEFAULT_OMEGA_CAP,
    DEFAULT_OMEGA_MAX,
    DEFAULT_OMEGA_POINTS,
    LM_MAX_ITERATIONS,
)
from ..core.errors import DomainError
from ..core.fitting import FREE_PARAMETERS, FitSpec
from ..core.model import ZYMOMONAS_DILUTION, ZYMOMONAS_PARAMS, ModelParams
from ..core.simulation import ControlLaw, HistorySpec
from ..core.utils import canonical_json, read_text, sha256_text
from .fields import (
    BooleanField,
    Field,
    FieldDescriptor,
    FloatField,
    IntegerField,
    IntervalField,
    ListField,
    MappingField,
    SectionField,
    StringField,
    ValidationError,
)

logger = logging.getLogger(__name__)

COMMANDS = ("fit", "stability", "regions", "simulate")
CONTROL_TYPES = ("constant", "delayed_proportional", "proportional", "scheduled")


class SectionMeta(type):
    """Collects Field declarations into _fields, parents first."""

    def __new__(mcs, name: str, bases: tuple, namespace: Dict[str, Any]) -> Type:
        fields: Dict[str, Field] = {}
        for base in bases:
            if hasattr(base, "_fields"):
                fields.update(base._fields)
        for key, value in list(namespace.items()):
            if isinstance(value, Field):
                value.name = key
                fields[key] = value
                namespace[key] = FieldDescriptor(value)
        namespace["_fields"] = fields
        return super().__new__(mcs, name, bases, namespace)


class Section(metaclass=SectionMeta):
    """A validated block of configuration values."""

    _fields: Dict[str, Field] = {}

    def __init__(self, data: Dict[str, Any]):
        self._data = data
        self.check()

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "Section":
        """
        Validate a raw JSON object.

        Raises:
            ValidationError: On unknown keys, missing required keys or bad values
        """
        if not isinstance(raw, dict):
            raise ValidationError(cls.__name__, "Expected object", raw, "invalid")
        unknown = sorted(set(raw) - set(cls._fields))
        if unknown:
            raise ValidationError(unknown[0], f"Unknown key(s): {unknown}", raw, "unknown_key")
        data: Dict[str, Any] = {}
        for name, field in cls._fields.items():
            if name in raw:
                data[name] = field.validate(raw[name])
            elif field.required:
                raise ValidationError(name, field.error_messages["required"], None, "required")
            else:
                data[name] = field.get_default()
        return cls(data)

    def check(self) -> None:
        """Cross-field checks; override in sections that need them."""

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {}
        for name, value in self._data.items():
            if isinstance(value, Section):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            result[name] = value
        return result

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} {self.to_dict()}>"


def _model_field(name: str, **kwargs: Any) -> FloatField:
    return FloatField(default=getattr(ZYMOMONAS_PARAMS, name), **kwargs)


class ModelSection(Section):
    a = _model_field("a", min_value=0.0, exclusive_min=True)
    b = _model_field("b", min_value=0.0, exclusive_min=True)
    c = _model_field("c", min_value=0.0, exclusive_min=True)
    d = _model_field("d", min_value=0.0, exclusive_min=True)
    e = _model_field("e", min_value=0.0, exclusive_min=True)
    alpha = _model_field("alpha", min_value=0.0, exclusive_min=True)
    beta = _model_field("beta", min_value=0.0, exclusive_min=True)
    s0 = _model_field("s0", min_value=0.0, exclusive_min=True)
    tau = _model_field("tau", min_value=0.0)

    def to_params(self) -> ModelParams:
        return ModelParams.from_dict(self.to_dict())


class ControlSection(Section):
    """
    Control law; first/second nest one more section for scheduled laws.
    """

    type = StringField(default="constant", choices=CONTROL_TYPES)
    D = FloatField(default=ZYMOMONAS_DILUTION, min_value=0.0, max_value=1.0)
    k_r = FloatField(default=0.0)
    h = FloatField(default=0.0, min_value=0.0)
    switch_time = FloatField(default=None, null=True, min_value=0.0, exclusive_min=True)
    first = SectionField(lambda: ControlSection, default=None, null=True)
    second = SectionField(lambda: ControlSection, default=None, null=True)

    def check(self) -> None:
        if self.type == "scheduled":
            for name in ("first", "second", "switch_time"):
                if self._data.get(name) is None:
                    raise ValidationError(
                        name, "Scheduled control needs first, second and switch_time", None,
                        "required",
                    )
        try:
            self.to_law()
        except DomainError as e:
            raise ValidationError(e.condition, e.message, None, "domain")

    def to_law(self) -> ControlLaw:
        data: Dict[str, Any] = {"type": self.type}
        if self.type == "constant":
            data["D"] = self.D
        elif self.type == "delayed_proportional":
            data.update(k_r=self.k_r, h=self.h)
        elif self.type == "proportional":
            data["k_r"] = self.k_r
        else:
            data.update(
                first=self.first.to_law().to_dict(),
                second=self.second.to_law().to_dict(),
                switch_time=self.switch_time,
            )
        return ControlLaw.from_dict(data)


class HistorySection(Section):
    s_init = FloatField(default=10.0, min_value=0.0)
    x_init = FloatField(default=0.1, min_value=0.0)

    def to_history(self) -> HistorySpec:
        return HistorySpec(s_init=self.s_init, x_init=self.x_init)


class SimulationSection(Section):
    t_final = FloatField(default=80.0, min_value=0.0, exclusive_min=True)
    dt = FloatField(default=DEFAULT_DT, min_value=0.0, exclusive_min=True)
    decay_window = IntervalField(default=None, null=True, item_field=FloatField(min_value=0.0))


class FitSection(Section):
    data = StringField(default=None, null=True)
    free = ListField(StringField(choices=FREE_PARAMETERS), default=lambda: list(FREE_PARAMETERS))
    initial = SectionField(ModelSection, default=None, null=True)
    bounds = MappingField(IntervalField(), keys=FREE_PARAMETERS, default=dict)
    dilution = FloatField(default=ZYMOMONAS_DILUTION, min_value=0.0, max_value=1.0)
    weighted = BooleanField(default=False)
    dt = FloatField(default=DEFAULT_FIT_DT, min_value=0.0, exclusive_min=True)
    max_iter = IntegerField(default=LM_MAX_ITERATIONS, min_value=0)

    def to_spec(self, model: ModelParams) -> FitSpec:
        """
        FitSpec starting from initial (or the model section when absent).

        Raises:
            ValidationError: If the bounds and initial guess disagree
        """
        initial = self.initial.to_params() if self.initial is not None else model
        try:
            return FitSpec(
                free=tuple(self.free),
                initial=initial,
                bounds={k: tuple(v) for k, v in self.bounds.items()},
                dilution=self.dilution,
                weighted=self.weighted,
                dt=self.dt,
                max_iter=self.max_iter,
            )
        except DomainError as e:
            raise ValidationError(f"fit.{e.condition}", e.message, None, "domain")


class StabilitySection(Section):
    """Operating point and crossing-analysis options shared by stability and regions."""

    D = FloatField(default=ZYMOMONAS_DILUTION, min_value=0.0, max_value=1.0)
    x_target = FloatField(default=None, null=True, min_value=0.0, exclusive_min=True)
    n_max = IntegerField(default=DEFAULT_N_MAX, min_value=0)
    omega_cap = FloatField(default=DEFAULT_OMEGA_CAP, min_value=0.0, exclusive_min=True)


class RegionsSection(Section):
    sigmas = ListField(FloatField(min_value=0.0), min_length=1, default=lambda: [0.0])
    h_range = IntervalField(default=DEFAULT_H_RANGE, item_field=FloatField(min_value=0.0))
    k_range = IntervalField(default=None, null=True)
    n_range = IntervalField(
        default=DEFAULT_N_RANGE, item_field=IntegerField(min_value=0), closed=True
    )
    omega_max = FloatField(default=DEFAULT_OMEGA_MAX, min_value=0.0, exclusive_min=True)
    omega_points = IntegerField(default=DEFAULT_OMEGA_POINTS, min_value=16)
    h_points = IntegerField(default=DEFAULT_H_POINTS, min_value=2)
    decay_grid = IntegerField(default=DECAY_GRID, min_value=8)
    sigma_tol = FloatField(default=DECAY_SIGMA_TOL, min_value=0.0, exclusive_min=True)


class RunConfig(Section):
    version = IntegerField()
    command = StringField(choices=COMMANDS)
    model = SectionField(ModelSection, default=lambda: ModelSection.from_dict({}))
    control = SectionField(ControlSection, default=lambda: ControlSection.from_dict({}))
    history = SectionField(HistorySection, default=lambda: HistorySection.from_dict({}))
    simulation = SectionField(
        SimulationSection, default=lambda: SimulationSection.from_dict({})
    )
    fit = SectionField(FitSection, default=lambda: FitSection.from_dict({}))
    regions = SectionField(RegionsSection, default=lambda: RegionsSection.from_dict({}))
    stability = SectionField(StabilitySection, default=lambda: StabilitySection.from_dict({}))

    def check(self) -> None:
        if self.version != CONFIG_SCHEMA_VERSION:
            raise ValidationError(
                "version",
                f"Unsupported config version {self.version}; expected {CONFIG_SCHEMA_VERSION}",
                self.version,
                "version",
            )
        try:
            self.model.to_params()
        except DomainError as e:
            raise ValidationError(f"model.{e.condition}", e.message, None, "domain")


def parse_run_config(raw: Any, command: Optional[str] = None) -> RunConfig:
    """
    Validate a decoded JSON document, optionally forcing the command name.

    Raises:
        ValidationError: If the document does not match the schema
    """
    if not isinstance(raw, dict):
        raise ValidationError("config", "Top-level JSON value must be an object", raw)
    if command is not None:
        raw = {**raw, "command": raw.get("command", command)}
        if raw["command"] != command:
            raise ValidationError(
                "command", f"Config is for '{raw['command']}', not '{command}'", raw["command"]
            )
    config = RunConfig.from_dict(raw)
    assert isinstance(config, RunConfig)
    return config


def load_run_config(path: Union[str, Path], command: Optional[str] = None) -> RunConfig:
    """
    Read and validate a run configuration file.

    Raises:
        IOError: If the file cannot be read
        ValidationError: If it is not valid JSON or fails the schema
    """
    text = read_text(path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError("config", f"Invalid JSON in {path}: {e}", None, "json")
    config = parse_run_config(raw, command)
    logger.info(f"Loaded {config.command} configuration from {path}")
    return config


def default_run_config(command: str) -> RunConfig:
    return parse_run_config({"version": CONFIG_SCHEMA_VERSION, "command": command})


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON of the validated configuration."""
    return sha256_text(canonical_json(config.to_dict()))

