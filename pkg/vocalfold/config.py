"""Settings of the whole pipeline and their TOML file representation."""
import tomllib
from pathlib import Path
from typing import Self

from pydantic import Field, model_validator

from vocalfold.ann import TrainConfig
from vocalfold.features import NUM_FEATURES
from vocalfold.pca import ReductionMode
from vocalfold.signal_io import FrameConfig
from vocalfold.synth import SynthConfig
from vocalfold.util import BaseModel, EncodingError

__all__ = ("CONFIG_FILE_NAME", "EvaluationConfig", "FrameConfig", "ProjectConfig", "VocalfoldConfig")

CONFIG_FILE_NAME = "vocalfold.toml"


class EvaluationConfig(BaseModel):
    """Cross-validation protocol."""

    folds: int = Field(default=10, ge=2)
    """Number of cross-validation folds."""
    k_features: int = Field(default=36, ge=1)
    """Length of the reduced feature vector."""
    mode: ReductionMode = ReductionMode.project
    """Whether to project onto principal components or to select original features by their loadings."""
    seed: int = 0
    """Seed of the fold assignment."""


class ProjectConfig(BaseModel):
    """Various execution settings."""

    parallel: int = Field(default=1, ge=1)
    """Number of files or folds processed concurrently."""


class VocalfoldConfig(BaseModel):
    """Base that contains all config options and can be parsed from config files."""

    frames: FrameConfig = FrameConfig()
    train: TrainConfig = TrainConfig()
    synth: SynthConfig = SynthConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    project: ProjectConfig = ProjectConfig()

    @model_validator(mode="after")
    def check_feature_count(self) -> Self:
        """Validates that the reduced vector is not longer than the full one."""
        if self.evaluation.k_features > NUM_FEATURES:
            raise ValueError(f"The reduced feature vector cannot be longer than {NUM_FEATURES}.")
        return self

    @classmethod
    def from_file(cls, file: Path) -> Self:
        """Parses a config object from a toml file.

        Args:
            file: Path to the file, or a directory containing one called 'vocalfold.toml'.
        """
        if not file.is_file():
            if file.joinpath(CONFIG_FILE_NAME).is_file():
                file /= CONFIG_FILE_NAME
            else:
                raise EncodingError(f"There is no config file at '{file}'.")
        try:
            config_dict = tomllib.loads(file.read_text())
        except tomllib.TOMLDecodeError as e:
            raise EncodingError(
                f"The config file at '{file}' is not a properly formatted TOML file.", detail=str(e)
            ) from e
        return cls.model_validate(config_dict)

    @classmethod
    def load(cls, file: Path | None = None) -> Self:
        """Loads the given config file, the one in the working directory, or the defaults if there is neither."""
        if file is not None:
            return cls.from_file(file)
        if Path(CONFIG_FILE_NAME).is_file():
            return cls.from_file(Path(CONFIG_FILE_NAME))
        return cls()
