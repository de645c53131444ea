"""Python access to the multi-frame cross-entropy training core.

Specs and configs cross the boundary as plain dicts (serialised to JSON);
arrays are float64 numpy arrays.
"""

import json

from ._mfce import (
    ConfigError,
    Corpus as _Corpus,
    Error,
    GeometryError,
    IoError,
    LabelError,
    ModelSpec,
    Network,
    ShapeError,
    SpecError,
    DivergenceError,
    ce_loss,
    epoch_accounting,
    intrinsic_length,
    mfce_loss,
    output_count,
    paper_shape_spec,
    toy_spec,
    utterance_padding,
    window_cost,
)
from . import _mfce

__all__ = [
    "ConfigError", "Corpus", "Error", "GeometryError", "IoError", "LabelError", "ModelSpec",
    "Network", "ShapeError", "SpecError", "DivergenceError", "ce_loss", "cost_report", "epoch_accounting", "generate_corpus",
    "intrinsic_length", "lr_at", "mfce_loss", "output_count", "paper_shape_spec", "run_cli",
    "spec_from_dict", "toy_spec", "utterance_padding", "window_cost",
]

Corpus = _Corpus


def spec_from_dict(spec: dict) -> ModelSpec:
    return ModelSpec.from_json(json.dumps(spec))


def lr_at(train: dict, epoch: int, intrinsic_length: int = 0) -> float:
    return _mfce.lr_at(json.dumps(train), epoch, intrinsic_length)


def cost_report(spec: ModelSpec, delta: int) -> dict:
    return json.loads(_mfce.cost_report_json(spec, delta))


def generate_corpus(config: dict) -> Corpus:
    return Corpus.generate(json.dumps(config))


def run_cli(*args: str) -> tuple[int, str, str]:
    """Runs a CLI command in-process; returns (exit code, stdout, stderr)."""
    return _mfce.run_cli([str(a) for a in args])
