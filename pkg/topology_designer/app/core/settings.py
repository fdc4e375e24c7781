from os import environ
from pathlib import Path
from typing import Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

load_dotenv()


class Config:
    LOG_LEVEL: str = environ.get("LOG_LEVEL", "INFO")
    DATA_PATH: str = environ.get("TOPOLOGY_DATA_PATH", "./topology_designer/data")

    # Remote chat-completion backend
    REMOTE_BASE_URL: str = environ.get("REMOTE_BASE_URL", "https://api.openai.com/v1")
    REMOTE_MODEL: str = environ.get("REMOTE_MODEL", "gpt-4o")
    REMOTE_API_KEY_ENV: str = environ.get("REMOTE_API_KEY_ENV", "OPENAI_API_KEY")
    REMOTE_TIMEOUT: float = float(environ.get("REMOTE_TIMEOUT", "60"))
    REMOTE_MAX_RETRIES: int = int(environ.get("REMOTE_MAX_RETRIES", "3"))
    REMOTE_MAX_IN_FLIGHT: int = int(environ.get("REMOTE_MAX_IN_FLIGHT", "4"))

    # Local sentence encoder for the optional embedding provider
    LOCAL_EMBEDDING_MODEL: str = environ.get("LOCAL_EMBEDDING_MODEL", "all-MiniLM-L6-v2")


def get_settings():
    return Config()


settings = get_settings()

PruneMode = Literal["single", "greedy"]


class ModelConfig(BaseModel):
    """Shapes and numeric precision of the topology generator."""

    d: int = Field(384, ge=1, description="Model embedding dimension.")
    d_raw: int = Field(384, ge=2, description="Raw sentence-embedding dimension.")
    d_h: int = Field(256, ge=1, description="Node/edge GRU hidden size.")
    n_max: int = Field(10, ge=1, description="Node cap; fixes the edge-feature width.")
    dtype: Literal["float32", "float64"] = "float32"
    seed: int = 0
    use_task_embedding: bool = Field(True, description="False drops the query from the fused context.")
    use_history_embedding: bool = Field(True, description="False drops the role history from the fused context.")


class TrainConfig(BaseModel):
    alpha: float = Field(0.2, ge=0.0, le=1.0)
    lr_phase1: float = Field(1e-3, ge=0.0)
    lr_phase2: float = Field(2e-4, ge=0.0)
    epochs_phase1: int = Field(300, ge=0)
    epochs_phase2: int = Field(150, ge=0)
    batch_size: int = Field(8, ge=1)
    seed: int = 0
    clip_norm: Optional[float] = Field(5.0, gt=0.0)
    show_progress: bool = False
    skip_fine_tune: bool = Field(False, description="Serve the cold-start checkpoint even when a fine-tuned one exists.")

    @model_validator(mode="after")
    def _phase2_is_slower(self):
        if self.lr_phase1 > 0 and self.lr_phase2 >= self.lr_phase1:
            raise ValueError("phase-2 learning rate must be lower than phase-1 learning rate")
        return self


class DecodePolicy(BaseModel):
    mode: Literal["greedy", "sample"] = "greedy"
    temperature: float = Field(1.0, gt=0.0)
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    n_max: int = Field(10, ge=1)
    seed: int = 0
    retries: int = Field(3, ge=0, description="Reseeded attempts after an empty topology.")


class BackendConfig(BaseModel):
    mode: Literal["mock", "remote", "scripted"] = "mock"
    echo: bool = False
    answers: dict[int, str] = Field(default_factory=dict, description="Per-node replies in scripted mode.")
    base_url: str = settings.REMOTE_BASE_URL
    model: str = settings.REMOTE_MODEL
    api_key_env: str = settings.REMOTE_API_KEY_ENV
    timeout: float = Field(settings.REMOTE_TIMEOUT, gt=0.0)
    max_retries: int = Field(settings.REMOTE_MAX_RETRIES, ge=0)
    max_in_flight: int = Field(settings.REMOTE_MAX_IN_FLIGHT, ge=1)
    temperature: float = 0.0


class EmbeddingConfig(BaseModel):
    mode: Literal["hashed", "file", "sentence-transformer"] = "hashed"
    path: Optional[str] = None
    model_name: str = settings.LOCAL_EMBEDDING_MODEL


class PathsConfig(BaseModel):
    role_pool: str = f"{settings.DATA_PATH}/role_pool.json"
    task_suite: str = f"{settings.DATA_PATH}/task_suite.json"
    data_dir: str = "./runs/data"
    checkpoint_dir: str = "./runs/checkpoints"
    output_dir: str = "./runs/outputs"


class RunConfig(BaseModel):
    seed: int = 0
    paths: PathsConfig = PathsConfig()
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    decode: DecodePolicy = DecodePolicy()
    backend: BackendConfig = BackendConfig()
    embedding: EmbeddingConfig = EmbeddingConfig()
    rounds: int = Field(3, ge=1, description="Communication rounds K.")
    strategy: Literal["majority-vote", "terminal-agent", "last-in-order", "summarizer"] = "summarizer"
    terminal_agent: Optional[int] = None
    replay_fraction: float = Field(0.25, ge=0.0, le=1.0)
    prune_mode: PruneMode = "greedy"
    workers: int = Field(1, ge=1)

    @field_validator("strategy", mode="before")
    @classmethod
    def _normalize_strategy(cls, value):
        return value.replace("_", "-") if isinstance(value, str) else value


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """Load a JSON or YAML run configuration; no path gives the defaults."""
    if path is None:
        return RunConfig()
    config_path = Path(path)
    with open(config_path, "r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    return RunConfig.model_validate(raw)
