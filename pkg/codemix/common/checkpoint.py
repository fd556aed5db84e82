"""Checkpoint container: a safetensors file of float64 parameters plus one JSON metadata document.

The metadata entry `codemix` holds (sorted keys) the format version, the training configuration, the
vocabulary and its hash, the transliteration rule table, the epoch and the best validation score, so a
checkpoint alone is enough to preprocess, encode and classify new data exactly as during training.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from safetensors import safe_open
from safetensors.numpy import save

from codemix.common.datasets.bpe import BpeVocab
from codemix.common.datasets.preprocess import RuleTable
from codemix.common.errors import CheckpointError, ConfigError, FormatError, VocabMismatchError
from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.utils.io_utils import write_bytes_atomic

CHECKPOINT_FORMAT_VERSION = 1
METADATA_KEY = "codemix"


@dataclass
class Checkpoint:
    model: CodeMixEnsemble
    vocab: BpeVocab
    rules: RuleTable | None = None
    epoch: int = 0
    best_score: float = 0.0

    @property
    def config(self) -> TrainConfig:
        return self.model.config


def checkpoint_to_bytes(checkpoint: Checkpoint) -> bytes:
    model = checkpoint.model
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": asdict(model.config),
        "vocab": json.loads(checkpoint.vocab.to_json()),
        "vocab_hash": checkpoint.vocab.hash,
        "rules": None if checkpoint.rules is None else dict(checkpoint.rules.rules),
        "epoch": int(checkpoint.epoch),
        "best_score": float(checkpoint.best_score),
        "param_names": list(model.params),
    }
    metadata = {METADATA_KEY: json.dumps(header, sort_keys=True, ensure_ascii=False)}
    tensors = {name: np.ascontiguousarray(p, dtype="<f8") for name, p in model.params.items()}
    return save(tensors, metadata=metadata)


def save_checkpoint(checkpoint: Checkpoint, path: str | Path):
    write_bytes_atomic(path, checkpoint_to_bytes(checkpoint))


def read_checkpoint_header(path: str | Path) -> dict:
    if not Path(path).is_file():
        raise FileNotFoundError(f"Checkpoint {path} does not exist.")
    try:
        with safe_open(str(path), framework="numpy") as f:
            metadata = f.metadata() or {}
    except Exception as e:
        raise CheckpointError(f"{path} is not a readable checkpoint: {e}") from e
    if METADATA_KEY not in metadata:
        raise CheckpointError(f"{path} has no `{METADATA_KEY}` metadata; not a codemix checkpoint.")
    try:
        header = json.loads(metadata[METADATA_KEY])
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path} has a corrupted header: {e}") from e
    version = header.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint format version {version!r}, expected {CHECKPOINT_FORMAT_VERSION}."
        )
    return header


def load_checkpoint(path: str | Path, vocab: BpeVocab | None = None, force: bool = False) -> Checkpoint:
    """Load a checkpoint. Nothing is returned unless every part of it is valid.

    When `vocab` is given and its hash differs from the one the checkpoint was trained with, this raises
    `VocabMismatchError`, or only warns when `force` is set (the checkpoint's own vocabulary is still used).
    """
    header = read_checkpoint_header(path)
    try:
        config = TrainConfig(**header["config"])
        ckpt_vocab = BpeVocab.from_json(json.dumps(header["vocab"], ensure_ascii=False))
        rules = None if header["rules"] is None else RuleTable(dict(header["rules"]))
        param_names = list(header["param_names"])
        epoch, best_score = int(header["epoch"]), float(header["best_score"])
    except (KeyError, TypeError, ConfigError, FormatError) as e:
        raise CheckpointError(f"{path} has an invalid header: {e}") from e
    if ckpt_vocab.hash != header.get("vocab_hash"):
        raise CheckpointError(f"{path}: the embedded vocabulary does not match its recorded hash.")

    if vocab is not None and vocab.hash != ckpt_vocab.hash:
        message = (
            f"{path} was trained with vocabulary {ckpt_vocab.hash[:12]} but vocabulary {vocab.hash[:12]} was given."
        )
        if not force:
            raise VocabMismatchError(message + " Pass `force` to use the checkpoint anyway.")
        logging.warning(message + " Continuing because `force` is set.")

    try:
        with safe_open(str(path), framework="numpy") as f:
            if sorted(f.keys()) != sorted(param_names):
                raise CheckpointError(f"{path}: stored tensors do not match the recorded parameter names.")
            params = {name: f.get_tensor(name).astype(np.float64) for name in param_names}
    except CheckpointError:
        raise
    except Exception as e:
        raise CheckpointError(f"{path} has unreadable tensors: {e}") from e

    try:
        model = CodeMixEnsemble(config, params=params)
    except ValueError as e:
        raise CheckpointError(f"{path}: {e}") from e
    return Checkpoint(model, ckpt_vocab, rules, epoch, best_score)
