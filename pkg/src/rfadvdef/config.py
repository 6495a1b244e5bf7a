"""Experiment configuration schema shared by the HTTP service and the CLI.

The same pydantic model validates request bodies and config files; unknown
keys are rejected so schema violations surface with a field path. The config
hash embedded in every output file is the sha256 of the canonical JSON dump.
"""

import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .rfsynth import ModScheme


class DatasetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    schemes: list[str] = ["BPSK", "QPSK", "PSK8", "QAM16"]
    snr_db_min: float = 14.0
    snr_db_max: float = 20.0
    train_per_class: int = Field(2500, ge=1)
    test_per_class: int = Field(500, ge=1)
    seed: int = 7

    @field_validator("schemes")
    @classmethod
    def _known_schemes(cls, v):
        if not v:
            raise ValueError("schemes must not be empty")
        for name in v:
            if name not in ModScheme.__members__:
                raise ValueError(
                    f"unknown scheme {name!r}; choose from {sorted(ModScheme.__members__)}"
                )
        return v

    def scheme_enums(self):
        return [ModScheme[name] for name in self.schemes]


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    epochs: int = Field(40, ge=1)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    weight_decay: float = Field(1e-4, ge=0)
    seed: int = 7
    adv_eval_samples: int = Field(400, ge=1)


class AttackSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    epsilon: float = Field(0.1, ge=0)
    steps: int = Field(1, ge=1)
    step_size: Optional[float] = None
    targeting: Literal["untargeted", "targeted", "random_target"] = "untargeted"
    target_class: Optional[int] = None


class SuitesSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    classical: bool = True
    ae: bool = True
    greybox: bool = True
    adversarial_training: bool = False
    ks_suite: bool = True
    simplex_3class: bool = False


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dataset: DatasetSection = DatasetSection()
    train: TrainSection = TrainSection()
    attack: AttackSection = AttackSection()
    suites: SuitesSection = SuitesSection()
    out_dir: str = "runs/default"

    def config_hash(self) -> str:
        canon = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]
