from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field

# complex entries travel as [re, im]
ComplexPair = Tuple[float, float]
ComplexRows = List[List[ComplexPair]]


class SpaceDims(BaseModel):
    H: int = Field(ge=1)
    dH: int = Field(ge=1)


class SpaceWeights(BaseModel):
    H: List[float]
    dH: List[float]


class RelationDocument(BaseModel):
    name: str
    first: ComplexRows
    second: ComplexRows


class SettingDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dims: SpaceDims
    weights: SpaceWeights
    L: ComplexRows
    A: ComplexRows
    I: ComplexRows
    T: ComplexRows
    lambda0: float
    relations: List[RelationDocument] = Field(default_factory=list)
