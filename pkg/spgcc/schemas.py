"""
Pipeline configuration: pydantic models validated before any stage runs.

Values come from a TOML file, then from `section.key=value` overrides (override wins).
The short symbols of the method (K, M, h, w, L, η, α, λ, τ) are accepted as key aliases
and resolve to the long field names before validation.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Type

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from spgcc.config import (
    DEFAULT_EXPORT_BATCH_SIZE,
    DEFAULT_MAX_WORKERS,
    DEFAULT_WEIGHT_DECAY,
    OUTPUT_DIR,
)
from spgcc.errors import ConfigError


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SynthSettings(_Settings):
    height: int = Field(48, ge=1)
    width: int = Field(48, ge=1)
    bands: int = Field(8, ge=1)
    noise: float = Field(0.05, ge=0.0)
    block_size: int = Field(24, ge=1)


class VaeSettings(_Settings):
    epochs: int = Field(10, ge=0)
    batch: int = Field(64, ge=2)
    lr: float = Field(1e-3, gt=0.0)
    wd: float = Field(DEFAULT_WEIGHT_DECAY, ge=0.0)
    max_pixels: Optional[int] = Field(None, ge=2, description="train on a seeded subset of pixel cubes")
    export_batch: int = Field(DEFAULT_EXPORT_BATCH_SIZE, ge=1)
    max_workers: int = Field(DEFAULT_MAX_WORKERS, ge=1)


class GcnSettings(_Settings):
    hidden: int = Field(1024, ge=1)
    out: int = Field(512, ge=1)
    layers: int = Field(2, ge=2, validation_alias=AliasChoices("layers", "L"),
                        description="L, the number of graph convolution layers")


class TrainSettings(_Settings):
    lr: float = Field(1e-4, gt=0.0, le=1.0, validation_alias=AliasChoices("lr", "eta", "η"))
    wd: float = Field(DEFAULT_WEIGHT_DECAY, ge=0.0)
    alpha: float = Field(0.1, ge=0.0, validation_alias=AliasChoices("alpha", "α"))
    lambda_: float = Field(0.75, gt=0.0, le=1.0, validation_alias=AliasChoices("lambda", "lambda_", "λ"))
    tau: float = Field(0.5, gt=0.0, validation_alias=AliasChoices("tau", "τ"))
    epochs: int = Field(200, ge=1)
    kmeans_interval: int = Field(5, ge=1)
    use_psa: bool = True
    use_mwa: bool = True
    use_sla: bool = True
    use_clc: bool = True
    high_confidence: bool = True

    @model_validator(mode="after")
    def _one_loss_enabled(self) -> "TrainSettings":
        if not (self.use_sla or self.use_clc):
            raise ValueError("at least one of use_sla / use_clc must stay enabled")
        return self


class PipelineConfig(_Settings):
    cube_path: Optional[Path] = None
    labels_path: Optional[Path] = None
    output_dir: Path = OUTPUT_DIR
    seed: int = Field(0, ge=0, lt=2 ** 64)
    num_classes: int = Field(4, ge=2, validation_alias=AliasChoices("num_classes", "K"))
    pca_bands: int = Field(8, ge=1, validation_alias=AliasChoices("pca_bands", "h"))
    window: int = Field(11, ge=9, validation_alias=AliasChoices("window", "w"))
    num_superpixels: int = Field(64, ge=1, validation_alias=AliasChoices("num_superpixels", "M"))
    compactness: float = Field(1.0, gt=0.0)
    segmenter: Literal["slic", "grid"] = "slic"
    connectivity: Literal[4, 8] = 8
    features_source: Literal["vae", "spectral"] = "vae"
    synth: SynthSettings = Field(default_factory=SynthSettings)
    vae: VaeSettings = Field(default_factory=VaeSettings)
    gcn: GcnSettings = Field(default_factory=GcnSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)

    @field_validator("window")
    @classmethod
    def _odd_window(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"window must be odd, got {value}")
        return value

    @model_validator(mode="after")
    def _enough_superpixels(self) -> "PipelineConfig":
        if self.num_superpixels < self.num_classes:
            raise ValueError(
                f"num_superpixels ({self.num_superpixels}) must be at least num_classes ({self.num_classes})"
            )
        return self


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _parse_value(raw: str) -> Any:
    """Interpret an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        return raw


def _field_name(model: Optional[Type[BaseModel]], key: str) -> str:
    """Field name behind `key`, which may be the field name itself or one of its aliases."""
    if model is None:
        return key
    for name, info in model.model_fields.items():
        alias = info.validation_alias
        if key == name or (isinstance(alias, AliasChoices) and key in alias.choices):
            return name
    return key


def _section_model(model: Optional[Type[BaseModel]], name: str) -> Optional[Type[BaseModel]]:
    info = model.model_fields.get(name) if model is not None else None
    annotation = info.annotation if info is not None else None
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    return None


def _canonical_keys(data: Dict[str, Any], model: Optional[Type[BaseModel]] = None) -> Dict[str, Any]:
    """Rename alias keys to field names, section by section; a key given twice is an error."""
    model = PipelineConfig if model is None else model
    out: Dict[str, Any] = {}
    for key, value in data.items():
        name = _field_name(model, key)
        if name in out:
            raise ConfigError(f"'{key}' sets {name}, which is already given")
        section = _section_model(model, name)
        out[name] = _canonical_keys(value, section) if section is not None and isinstance(value, dict) else value
    return out


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for item in overrides:
        key, sep, raw = item.lstrip("-").partition("=")
        if not sep or not key:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        *sections, leaf = key.split(".")
        target: Dict[str, Any] = data
        model: Optional[Type[BaseModel]] = PipelineConfig
        for section in sections:
            name = _field_name(model, section)
            node = target.setdefault(name, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{item}': '{section}' is not a section")
            target, model = node, _section_model(model, name)
        target[_field_name(model, leaf)] = _parse_value(raw)
    return data


def _describe(error: ValidationError) -> str:
    parts: List[str] = []
    for issue in error.errors():
        where = ".".join(str(p) for p in issue["loc"]) or "config"
        parts.append(f"{where}: {issue['msg']}")
    return "; ".join(parts)


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = ()) -> PipelineConfig:
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file {path} not found") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    data = _canonical_keys(data)
    apply_overrides(data, overrides)
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e
