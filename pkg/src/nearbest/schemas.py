import json
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Sequence, Union

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    confloat,
    conint,
    constr,
    field_validator,
    model_validator,
)

from nearbest.constants import CONFIG_SCHEMA_VERSION, Mode
from nearbest.exceptions import ConfigError
from nearbest.expressions import parse_expression


def _to_complex(v: Any) -> complex:
    """A number, a ``[re, im]`` pair, or a string such as ``"1+2i"``."""
    if isinstance(v, bool):
        raise ValueError("Expected a number or [re, im] pair, got a boolean")
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, (list, tuple)):
        if len(v) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ValueError("Complex pairs must be [re, im] with two real numbers")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ValueError(f"Cannot read {v!r} as a complex number")
    raise ValueError(f"Expected a number or [re, im] pair, got {type(v).__name__}")


ComplexValue = Annotated[complex, BeforeValidator(_to_complex)]


# --- Arc schema ---

class PieceModel(BaseModel):
    kind:   Literal["segment", "circular_arc"] = "segment"
    start:  ComplexValue
    end:    Optional[ComplexValue] = None
    center: Optional[ComplexValue] = None
    sweep:  Optional[float] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_kind_fields(self) -> "PieceModel":
        if self.kind == "segment" and self.end is None:
            raise ValueError("A segment needs an 'end'")
        if self.kind == "circular_arc" and (self.center is None or self.sweep is None):
            raise ValueError("A circular arc needs 'center' and 'sweep'")
        return self


class ArcModel(BaseModel):
    pieces:   Optional[List[PieceModel]] = None
    vertices: Optional[List[ComplexValue]] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_one_form(self) -> "ArcModel":
        """
        Exactly one of 'pieces' and 'vertices'; a vertex list is a polyline
        and needs at least two points.
        """
        if (self.pieces is None) == (self.vertices is None):
            raise ValueError("Give the arc either as 'pieces' or as 'vertices', not both or neither")
        if self.vertices is not None and len(self.vertices) < 2:
            raise ValueError("A polyline needs at least two vertices")
        if self.pieces is not None and not self.pieces:
            raise ValueError("An arc needs at least one piece")
        return self

    @property
    def piece_count(self) -> int:
        return len(self.pieces) if self.pieces is not None else len(self.vertices) - 1


# --- Function schema ---

class BranchModel(BaseModel):
    formula: constr(min_length=1, strip_whitespace=True)  # type: ignore
    center:  ComplexValue = 0j
    radius:  Optional[confloat(gt=0)] = None  # type: ignore  # None: entire

    model_config = ConfigDict(extra="forbid")

    @field_validator("formula")
    @classmethod
    def check_formula(cls, v: str) -> str:
        parse_expression(v)
        return v


class SingularityModel(BaseModel):
    t:     float
    order: conint(ge=0) = 0  # type: ignore

    model_config = ConfigDict(extra="forbid")


class FunctionModel(BaseModel):
    branches:      List[BranchModel] = Field(min_length=1)
    singularities: List[SingularityModel] = []

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_counts(self) -> "FunctionModel":
        if len(self.branches) != len(self.singularities) + 1:
            raise ValueError(f"{len(self.singularities)} singularities need {len(self.singularities) + 1} "
                             f"branches, got {len(self.branches)}")
        params = [s.t for s in self.singularities]
        if any(b <= a for a, b in zip(params[:-1], params[1:])):
            raise ValueError("Singularity parameters must be strictly increasing")
        return self


# --- Experiment schema ---

class LemniscateModel(BaseModel):
    order:  conint(ge=1)  # type: ignore
    radius: confloat(gt=0) = 1.0  # type: ignore
    center: ComplexValue = 0j

    model_config = ConfigDict(extra="forbid")


class CompactSetModel(BaseModel):
    label: constr(min_length=1, pattern=r"^[A-Za-z0-9_]+$")  # type: ignore
    t_lo:  float
    t_hi:  float

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_interval(self) -> "CompactSetModel":
        if not self.t_lo < self.t_hi:
            raise ValueError(f"Compact set {self.label} needs t_lo < t_hi")
        return self


class ToleranceModel(BaseModel):
    map:             confloat(gt=0, lt=1) = 1e-8  # type: ignore
    lawson:          confloat(gt=0, lt=1) = 1e-8  # type: ignore
    lawson_max_iter: conint(ge=1) = 500  # type: ignore

    model_config = ConfigDict(extra="forbid")


class QuadratureModel(BaseModel):
    order:  conint(ge=2, le=64) = 16  # type: ignore
    panels: conint(ge=1, le=256) = 8  # type: ignore
    check:  bool = False

    model_config = ConfigDict(extra="forbid")


class OutputModel(BaseModel):
    directory:      Optional[str] = None
    prefix:         Optional[constr(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")] = None  # type: ignore
    record_timings: bool = False

    model_config = ConfigDict(extra="forbid")


class ExperimentConfig(BaseModel):
    schema_version:        Literal[1] = CONFIG_SCHEMA_VERSION
    name:                  constr(min_length=1, strip_whitespace=True) = "scenario"  # type: ignore
    mode:                  Mode
    arc:                   ArcModel
    function:              FunctionModel
    degrees:               List[conint(ge=0)] = Field(min_length=1)  # type: ignore
    lemniscates:           List[LemniscateModel] = []
    compact_sets:          List[CompactSetModel] = []
    sigma:                 confloat(gt=0, lt=1) = 0.5  # type: ignore
    nodes_per_degree:      conint(ge=4) = 20  # type: ignore
    strict_classification: bool = False
    tolerances:            ToleranceModel = ToleranceModel()
    quadrature:            QuadratureModel = QuadratureModel()
    output:                OutputModel = OutputModel()

    model_config = ConfigDict(extra="forbid", str_strip_whitespace=True)

    @field_validator("degrees")
    @classmethod
    def check_ascending(cls, v: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(v[:-1], v[1:])):
            raise ValueError("Degrees must be strictly ascending")
        return v

    @model_validator(mode="after")
    def check_scenario(self) -> "ExperimentConfig":
        """
        Cross-field rules:
          - singular parameters lie strictly inside the arc's parameter range
          - compact sets lie in the range and keep a positive margin from every singular parameter
          - constructing modes need degree >= 1, Theorem 2 one lemniscate per singularity
        """
        t_max = float(self.arc.piece_count)
        params = [s.t for s in self.function.singularities]
        for t in params:
            if not 0.0 < t < t_max:
                raise ValueError(f"Singularity parameter {t} is not inside (0, {t_max:g})")
        labels = set()
        for compact in self.compact_sets:
            if compact.label in labels:
                raise ValueError(f"Duplicate compact set label {compact.label}")
            labels.add(compact.label)
            if compact.t_lo < 0.0 or compact.t_hi > t_max:
                raise ValueError(f"Compact set {compact.label} leaves the arc's range [0, {t_max:g}]")
            for t in params:
                if compact.t_lo <= t <= compact.t_hi:
                    raise ValueError(f"Compact set {compact.label} contains the singular parameter {t}")
        if self.mode is not Mode.BESTAPPROX and self.degrees[0] < 1:
            raise ValueError("Constructing modes need degrees >= 1")
        if self.mode is Mode.THEOREM2 and len(self.lemniscates) != len(params):
            raise ValueError(f"Theorem 2 mode needs one lemniscate per singularity "
                             f"({len(params)}), got {len(self.lemniscates)}")
        return self

    @property
    def prefix(self) -> str:
        return self.output.prefix or self.name.replace(" ", "_")


def _line_of(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """Best-effort source line of a validation error location, following its keys in order."""
    pos, found = 0, None
    for part in loc:
        if isinstance(part, int):
            continue
        index = text.find(f'"{part}"', pos)
        if index < 0:
            break
        pos, found = index, index
    if found is None:
        return None
    return text.count("\n", 0, found) + 1


def format_validation_error(exc: ValidationError, text: str = "", source: str = "<config>") -> str:
    lines = []
    for error in exc.errors():
        loc = ".".join(str(p) for p in error["loc"]) or "<root>"
        line = _line_of(text, error["loc"]) if text else None
        where = f"{source}:{line}" if line else source
        lines.append(f"{where}: {loc}: {error['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """
    Validate a JSON config document.

    Raises:
        ConfigError: On JSON syntax errors (with line:column) or schema violations (with loc path and line)
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e, text, source))


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}")
    return parse_config(text, str(path))


def with_overrides(config: ExperimentConfig, tol: Optional[float] = None, panels: Optional[int] = None,
                   out: Optional[str] = None) -> ExperimentConfig:
    """Copy of ``config`` with CLI overrides applied; overridden values are validated."""
    tolerances, quadrature, output = config.tolerances, config.quadrature, config.output
    try:
        if tol is not None:
            tolerances = ToleranceModel(map=tol, lawson=tolerances.lawson, lawson_max_iter=tolerances.lawson_max_iter)
        if panels is not None:
            quadrature = QuadratureModel(order=quadrature.order, panels=panels, check=quadrature.check)
        if out is not None:
            output = OutputModel(directory=out, prefix=output.prefix, record_timings=output.record_timings)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e, source="<overrides>"))
    return config.model_copy(update={"tolerances": tolerances, "quadrature": quadrature, "output": output})
