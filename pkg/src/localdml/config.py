"""Run-configuration schema for the command-line interface.

Each subcommand has its own model; unknown keys are rejected everywhere so a
misspelled option fails before any computation starts.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from .core.kernels import KERNEL_KINDS


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Columns(_Strict):
    y: str
    d: str
    v: str | None = None
    x: list[str] = Field(default_factory=list)


class FunctionalConfig(_Strict):
    """Target functional. ``bandwidth`` wins over ``c_h`` when both are given."""

    kind: Literal["ate", "cate", "rdd", "avg_deriv", "het_deriv"] = "ate"
    point: float | None = None
    bandwidth: float | None = Field(default=None, gt=0)
    c_h: float | None = Field(default=None, gt=0)
    kernel: Literal[KERNEL_KINDS] | None = None  # type: ignore[valid-type]

    @model_validator(mode="after")
    def _local_needs_window(self):
        if self.kind in ("cate", "het_deriv", "rdd"):
            if self.point is None:
                raise ValueError(f"functional kind {self.kind!r} needs 'point'")
            if self.bandwidth is None and self.c_h is None:
                raise ValueError(f"functional kind {self.kind!r} needs 'bandwidth' or 'c_h'")
        return self

    @property
    def kernel_kind(self) -> str:
        if self.kernel is not None:
            return self.kernel
        return "uniform" if self.kind == "rdd" else "epanechnikov"


class LearnerConfig(_Strict):
    kind: Literal["lasso", "forest", "nn"] = "lasso"
    dictionary: Literal["low", "interactions", "high"] = "low"
    params: dict[str, Any] = Field(default_factory=dict)


class RieszConfig(_Strict):
    dictionary: Literal["low", "interactions", "high"] = "low"
    penalty: float | None = Field(default=None, ge=0)
    c: float | None = Field(default=None, ge=0)
    strategy: Literal["localize", "direct"] = "localize"
    trim: float | None = Field(default=None, gt=0)
    normalize: bool = True


class EstimateConfig(_Strict):
    subcommand: Literal["estimate"] = "estimate"
    data: str
    columns: Columns
    functional: FunctionalConfig = Field(default_factory=FunctionalConfig)
    learner: LearnerConfig = Field(default_factory=LearnerConfig)
    riesz: RieszConfig = Field(default_factory=RieszConfig)
    n_folds: int = Field(default=5, ge=2)
    level: float = Field(default=0.05, gt=0, lt=1)
    seed: int = 0
    n_jobs: int = 1
    output_dir: str = "localdml-out"


class SimulateConfig(_Strict):
    subcommand: Literal["simulate"] = "simulate"
    learner: Literal["lasso", "forest", "nn", "oracle"] = "lasso"
    regime: Literal["low", "interactions", "high"] = "low"
    target: Literal["cate", "ate"] = "cate"
    points: list[float] = Field(default_factory=lambda: [-0.25, 0.0, 0.25])
    c_h: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    replications: int = Field(default=500, ge=1)
    n: int = Field(default=100, ge=10)
    n_folds: int = Field(default=5, ge=2)
    seed: int = 0
    kernel: Literal[KERNEL_KINDS] = "gaussian"  # type: ignore[valid-type]
    levels: list[float] = Field(default_factory=lambda: [0.2, 0.05])
    n_jobs: int = 0
    learner_params: dict[str, Any] = Field(default_factory=dict)
    riesz_params: dict[str, Any] = Field(default_factory=dict)
    output_dir: str = "localdml-out"

    def simulation_kwargs(self) -> dict:
        return self.model_dump(exclude={"subcommand", "output_dir"})


class ScalingProbeConfig(_Strict):
    bandwidths: list[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    n: int = Field(default=100_000, ge=10)
    seed: int = 0
    point: float | None = 0.0
    kernel: Literal[KERNEL_KINDS] = "epanechnikov"  # type: ignore[valid-type]


class BoundsConfig(_Strict):
    """``inputs`` is one set of bound inputs, or a list ordered by increasing ``n`` for the checklist."""

    subcommand: Literal["bounds"] = "bounds"
    inputs: dict[str, Any] | list[dict[str, Any]] | None = None
    sigma_h: float | None = Field(default=None, gt=0)
    probe: ScalingProbeConfig | None = None
    output_dir: str = "localdml-out"

    @model_validator(mode="after")
    def _something_to_do(self):
        from .bounds import BoundInputs

        if self.inputs is None and self.probe is None:
            raise ValueError("bounds needs 'inputs', 'probe', or both")
        docs = self.inputs if isinstance(self.inputs, list) else [self.inputs] if self.inputs else []
        for i, d in enumerate(docs):
            try:
                BoundInputs(**d)
            except TypeError as exc:
                raise ValueError(f"inputs[{i}]: {exc}") from None
        return self


RunConfig = Annotated[Union[EstimateConfig, SimulateConfig, BoundsConfig], Field(discriminator="subcommand")]
_ADAPTER = TypeAdapter(RunConfig)


class ConfigError(ValueError):
    """Schema violation; the message names every offending key."""


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        path = list(e["loc"])
        if path and path[0] in ("estimate", "simulate", "bounds"):
            path = path[1:]
        loc = ".".join(str(p) for p in path) or "<root>"
        if e["type"] == "extra_forbidden":
            parts.append(f"unknown key '{loc}'")
        else:
            parts.append(f"'{loc}': {e['msg']}")
    return "; ".join(parts)


def _wrap_bare_inputs(doc: Any, subcommand: str | None):
    # a bare bound-inputs object or list is shorthand for {"inputs": ...}
    bare = isinstance(doc, list) or (isinstance(doc, dict) and not {"subcommand", "inputs", "probe"} & doc.keys())
    return {"subcommand": "bounds", "inputs": doc} if subcommand == "bounds" and bare else doc


def validate_config(doc: Any, subcommand: str | None = None):
    """Validate a decoded document. A bare bound-inputs document is accepted for ``bounds``."""
    doc = _wrap_bare_inputs(doc, subcommand)
    if isinstance(doc, dict) and subcommand is not None:
        if doc.get("subcommand", subcommand) != subcommand:
            raise ConfigError(f"config is for '{doc['subcommand']}', not '{subcommand}'")
        doc = {"subcommand": subcommand, **doc}
    try:
        return _ADAPTER.validate_python(doc)
    except ValidationError as err:
        raise ConfigError(_describe(err)) from None


def parse_config(path, subcommand: str | None = None, overrides: list[str] | None = None):
    """Read a JSON config file, apply ``key.path=value`` overrides and validate."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    doc = _wrap_bare_inputs(doc, subcommand)
    for item in overrides or ():
        doc = apply_override(doc, item)
    return validate_config(doc, subcommand)


def apply_override(doc: dict, item: str) -> dict:
    """Set ``a.b.c=value``; the value is parsed as JSON when possible, else kept as a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if not isinstance(doc, dict):
        raise ConfigError("overrides need a JSON object at the top level")
    out = json.loads(json.dumps(doc))
    node = out
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-object")
    node[parts[-1]] = value
    return out


def dump_config(cfg) -> dict:
    """Every field, defaults included, in a form :func:`validate_config` accepts."""
    return cfg.model_dump(mode="json")
