"""
Architecture layout files for the configs command

    transformers_per_level = 2

    [[level]]
    resolution = 8
    heads = 16
"""
from pathlib import Path
from typing import List, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class LevelModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resolution: int = Field(ge=4)
    heads: int = Field(ge=1)

    @field_validator("resolution")
    @classmethod
    def resolution_even(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"resolution must be even, got {value}")
        return value


class LayoutModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    transformers_per_level: int = Field(ge=1)
    level: List[LevelModel] = Field(min_length=1)

    def pairs(self) -> List[Tuple[int, int]]:
        """(heads, resolution) per level"""
        return [(lvl.heads, lvl.resolution) for lvl in self.level]


def load_layout(path: Union[str, Path]) -> LayoutModel:
    """
    :raises OSError: if the file cannot be read
    :raises ValueError: on malformed TOML or a layout that fails validation
    """
    with Path(path).open("rb") as f:
        data = tomllib.load(f)
    return LayoutModel.model_validate(data)
