from enum import Enum
from typing import Annotated, List, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator


def _as_pair(value):
    if isinstance(value, (int, float)):
        return [float(value), 0.0]
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


# complex numbers travel as [re, im]; a bare real number is accepted too
ComplexIn = Annotated[Tuple[float, float], BeforeValidator(_as_pair)]


def to_complex(pair: Tuple[float, float]) -> complex:
    return complex(pair[0], pair[1])


class ModelKind(str, Enum):
    random_setting = "random_setting"
    moshinsky_yafaev = "moshinsky_yafaev"
    polaron = "polaron"
    from_file = "from_file"


class SuiteName(str, Enum):
    assumptions = "assumptions"
    green = "green"
    robin = "robin"
    resolvents = "resolvents"
    relations = "relations"
    classify = "classify"
    polaron_bounds = "polaron_bounds"
    sweep = "sweep"
    polaron_experiment = "polaron_experiment"


class BoundaryParamsIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: ComplexIn = (0.0, 0.0)
    beta: ComplexIn = (1.0, 0.0)
    gamma: Optional[ComplexIn] = None
    delta: Optional[ComplexIn] = None

    @property
    def completed(self) -> bool:
        return self.gamma is not None and self.delta is not None


class RandomSettingIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=8, ge=1, le=256)
    n_boundary: int = Field(default=3, ge=1, le=64)
    weighted: bool = True

    @model_validator(mode="after")
    def _boundary_fits(self):
        if self.n_boundary > self.n:
            raise ValueError(f"n_boundary={self.n_boundary} exceeds n={self.n}")
        return self


class PolaronConfigIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_x: int = Field(default=16, ge=4)
    box_halfwidth: float = Field(default=4.0, gt=0)
    n_max: int = Field(default=2, ge=1)
    lambda0: float = Field(default=-1.0, lt=0)


class RelationSpec(BaseModel):
    """A relation given by an operator graph, coefficient operators, or pointwise functions."""

    model_config = ConfigDict(extra="forbid")

    kind: str = Field(default="random_symmetric", pattern="^(random_symmetric|random|operator|coefficients|pointwise)$")
    dim: Optional[int] = Field(default=None, ge=0)
    matrix: Optional[List[List[ComplexIn]]] = None
    alpha: Optional[List[List[ComplexIn]]] = None
    beta: Optional[List[List[ComplexIn]]] = None
    # pointwise relations: grid values of alpha/beta, or a named profile
    alpha_values: Optional[List[ComplexIn]] = None
    beta_values: Optional[List[ComplexIn]] = None
    profile: Optional[str] = Field(default=None, pattern="^(repulsive_cosine|dirichlet)$")


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alphas: List[ComplexIn] = Field(default_factory=lambda: [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)])
    betas: List[ComplexIn] = Field(default_factory=lambda: [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])
    gammas: List[ComplexIn] = Field(default_factory=lambda: [(1.0, 0.0)])
    deltas: List[ComplexIn] = Field(default_factory=lambda: [(0.0, 0.0)])


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    model: ModelKind
    suite: SuiteName
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    setting: RandomSettingIn = Field(default_factory=RandomSettingIn)
    polaron: PolaronConfigIn = Field(default_factory=PolaronConfigIn)
    setting_path: Optional[str] = None
    params: List[BoundaryParamsIn] = Field(default_factory=list)
    relation: Optional[RelationSpec] = None
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    lambdas: List[ComplexIn] = Field(default_factory=list)
    samples: int = Field(default=3, ge=1)
    attractive_c: float = Field(default=0.5, gt=0, lt=1)
    tolerance: Optional[float] = Field(default=None, gt=0)
    resolvent_tolerance: float = Field(default=1e-8, gt=0)
    report_path: Optional[str] = None
    csv_path: Optional[str] = None
    # spectrum command: which realization to diagonalize
    operator: str = Field(default="H01", pattern="^(L|T|H01|ibc|robin)$")

    @model_validator(mode="after")
    def _model_inputs(self):
        if self.model == ModelKind.random_setting and self.seed is None:
            raise ValueError("seed is mandatory for model=random_setting")
        if self.model == ModelKind.from_file and not self.setting_path:
            raise ValueError("setting_path is mandatory for model=from_file")
        if self.suite == SuiteName.polaron_bounds and self.model != ModelKind.polaron:
            raise ValueError("suite polaron_bounds needs model=polaron")
        if self.suite == SuiteName.polaron_experiment and self.model != ModelKind.polaron:
            raise ValueError("suite polaron_experiment needs model=polaron")
        return self

    def lambda_values(self) -> List[complex]:
        return [to_complex(pair) for pair in self.lambdas]

