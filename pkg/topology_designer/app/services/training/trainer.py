"""Epoch loop, two-phase schedule and likelihood evaluation."""
import math
import time
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from more_itertools import chunked
from pydantic import BaseModel, Field
from tqdm import tqdm

from topology_designer.app.core.errors import InputError, NonFiniteLossError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import TrainConfig
from topology_designer.app.core.state import TrainingExample
from topology_designer.app.services.curriculum import in_canonical_order
from topology_designer.app.services.embeddings import EmbeddingProvider, RoleRegistry, query_embedding
from topology_designer.app.services.generator import TopologyGenerator, guided_log_prob
from topology_designer.app.services.ndkernel import Tape, adam_step, backward, clip_grad_norm
from topology_designer.app.services.utils import derive_seed, write_json

from .loss import loss_on_tape

Phase = Literal["cold_start", "fine_tune"]


class EpochStats(BaseModel):
    epoch: int
    loss_total: float = Field(ge=0.0)
    loss_node: float = Field(ge=0.0)
    loss_edge: float = Field(ge=0.0)


class TrainReport(BaseModel):
    phase: Phase
    dataset_size: int
    epochs: list[EpochStats] = []
    wall_time: float = 0.0
    checkpoint_path: Optional[str] = None

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].loss_total if self.epochs else math.nan

    def to_json(self) -> dict:
        return {
            "phase": self.phase,
            "dataset_size": self.dataset_size,
            "loss_total": [e.loss_total for e in self.epochs],
            "loss_node": [e.loss_node for e in self.epochs],
            "loss_edge": [e.loss_edge for e in self.epochs],
            "wall_time": self.wall_time,
            "checkpoint_path": self.checkpoint_path,
        }


def write_report(path: str, report: TrainReport) -> None:
    write_json(path, report.to_json())


def _example_id(example: TrainingExample, position: int) -> str:
    return f"{example.task_id or 'example'}#{position}"


def train_phase(
    model: TopologyGenerator,
    dataset: Sequence[TrainingExample],
    cfg: TrainConfig,
    phase: Phase,
    registry: RoleRegistry,
    provider: EmbeddingProvider,
) -> tuple[TopologyGenerator, TrainReport]:
    """Train a copy of ``model``; the input model is left untouched."""
    if not dataset:
        raise InputError("training dataset is empty")
    lr = cfg.lr_phase1 if phase == "cold_start" else cfg.lr_phase2
    epochs = cfg.epochs_phase1 if phase == "cold_start" else cfg.epochs_phase2
    trained = model.snapshot()
    # canonical node order and raw query embeddings are fixed for the whole phase
    examples = [ex.model_copy(update={"graph": in_canonical_order(ex.graph)}) for ex in dataset]
    raw_queries = [query_embedding(ex.query, provider) for ex in examples]
    rng = np.random.default_rng(derive_seed(cfg.seed, f"shuffle/{phase}"))
    report = TrainReport(phase=phase, dataset_size=len(examples))
    started = time.perf_counter()
    log_every = max(1, epochs // 10)
    logger.info(f"🚀 {phase}: {len(examples)} examples, {epochs} epochs, lr={lr:g}, batch={cfg.batch_size}")

    for epoch in tqdm(range(1, epochs + 1), desc=phase, disable=not cfg.show_progress):
        sums = np.zeros(3)
        for batch in chunked(rng.permutation(len(examples)).tolist(), cfg.batch_size):
            grads: dict[str, np.ndarray] = {}
            for position in batch:
                tape = Tape(dtype=trained.dtype)
                total, terms = loss_on_tape(tape, trained, examples[position], registry, cfg.alpha, raw_queries[position])
                if not math.isfinite(terms.total):
                    raise NonFiniteLossError(_example_id(dataset[position], position), terms.total)
                for name, grad in backward(tape, total).items():
                    if name in grads:
                        grads[name] += grad
                    else:
                        grads[name] = grad.copy()
                sums += terms
            scale = 1.0 / len(batch)
            averaged = {name: (g * scale).astype(g.dtype) for name, g in grads.items()}
            for name in trained.params:
                averaged.setdefault(name, np.zeros_like(trained.params[name]))
            adam_step(trained.params, clip_grad_norm(averaged, cfg.clip_norm), lr)
        mean_total, mean_node, mean_edge = (sums / len(examples)).tolist()
        report.epochs.append(EpochStats(epoch=epoch, loss_total=mean_total, loss_node=mean_node, loss_edge=mean_edge))
        if epoch % log_every == 0 or epoch == epochs:
            logger.info(f"{phase} epoch {epoch}/{epochs}: L_total={mean_total:.4f} L_node={mean_node:.4f} L_edge={mean_edge:.4f}")

    report.wall_time = time.perf_counter() - started
    return trained, report


class EvalSummary(BaseModel):
    mean_log_prob: float
    by_source: dict[str, float]
    count: int


def evaluate(
    model: TopologyGenerator,
    dataset: Sequence[TrainingExample],
    registry: RoleRegistry,
    provider: EmbeddingProvider,
) -> EvalSummary:
    if not dataset:
        raise InputError("evaluation dataset is empty")
    frame = pd.DataFrame(
        {
            "source": [ex.source for ex in dataset],
            "log_prob": [
                guided_log_prob(model, ex.query, registry, in_canonical_order(ex.graph), provider) for ex in dataset
            ],
        }
    )
    by_source = frame.groupby("source", sort=True)["log_prob"].mean()
    return EvalSummary(
        mean_log_prob=float(frame["log_prob"].mean()),
        by_source={str(k): float(v) for k, v in by_source.items()},
        count=len(frame),
    )
