from .checkpoint import FORMAT_VERSION, load_checkpoint, payload_path, save_checkpoint
from .loss import LossTerms, example_loss, loss_on_tape
from .trainer import EpochStats, EvalSummary, Phase, TrainReport, evaluate, train_phase, write_report

__all__ = [
    "EpochStats",
    "EvalSummary",
    "FORMAT_VERSION",
    "LossTerms",
    "Phase",
    "TrainReport",
    "evaluate",
    "example_loss",
    "load_checkpoint",
    "loss_on_tape",
    "payload_path",
    "save_checkpoint",
    "train_phase",
    "write_report",
]
