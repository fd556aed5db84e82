"""Subword lookup table feeding both ensemble components.

Row `PAD_ID` is all-zero and never receives a gradient, so padded positions always embed to zeros.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from codemix.common.datasets.bpe import PAD_ID, BpeVocab, SubwordSequence
from codemix.common.errors import FormatError
from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.numerics.kernels import DualResult, Tensor, as_tensor, embedding_lookup

INIT_RANGE = 0.1


@dataclass
class EmbeddingTable:
    table: Tensor
    trainable: bool = True

    def __post_init__(self):
        self.table = as_tensor(self.table, 2, "table")
        if self.table.shape[0] <= PAD_ID:
            raise ValueError(f"Embedding table needs at least {PAD_ID + 1} rows. Got shape {self.table.shape}.")
        if np.any(self.table[PAD_ID] != 0.0):
            raise ValueError("The pad row of an embedding table must be all-zero.")

    @property
    def num_embeddings(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]


def init_table(num_embeddings: int, dim: int, rng: np.random.Generator) -> Tensor:
    """Uniform in [-INIT_RANGE, INIT_RANGE] with a zero pad row."""
    table = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(num_embeddings, dim))
    table[PAD_ID] = 0.0
    return table


def embed(seq: SubwordSequence | np.ndarray, table: EmbeddingTable) -> DualResult:
    """Gather the rows of `seq`'s ids. The backward drops the gradient of the pad row."""
    ids = seq.ids if isinstance(seq, SubwordSequence) else np.asarray(seq, dtype=np.int64)
    lookup = embedding_lookup(table.table, ids)

    def backward(grad: Tensor) -> dict[str, Tensor]:
        dtable = lookup.backward(grad)["table"]
        dtable[PAD_ID] = 0.0
        return {"table": dtable}

    return DualResult(lookup.output, backward)


def load_external(
    path: str | Path,
    vocab: BpeVocab,
    dim: int | None = None,
    trainable: bool = True,
    rng: np.random.Generator | None = None,
) -> EmbeddingTable:
    """Build a table from a `token<TAB>v1 v2 ... vD` file.

    Listed subwords get their vectors; every other row keeps the random initialization. When a subword
    is listed twice the last line wins. An empty file yields a fully random table of width `dim`, or of
    the default `TrainConfig.embedding_dim` when `dim` is None.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    vectors: dict[str, tuple[int, np.ndarray]] = {}
    width = dim
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise FormatError(f"expected `token<TAB>v1 v2 ...`, got {line!r}", line_no)
            token, values = line.split("\t", 1)
            try:
                vector = np.array([float(v) for v in values.split()], dtype=np.float64)
            except ValueError as e:
                raise FormatError(f"non-numeric vector component for {token!r}: {e}", line_no) from e
            if width is None:
                width = vector.shape[0]
            if vector.shape[0] != width or width == 0:
                raise FormatError(f"vector for {token!r} has dimension {vector.shape[0]}, expected {width}", line_no)
            if token in vectors:
                logging.warning(
                    f"{path}:{line_no}: duplicate vector for {token!r} (first seen on line {vectors[token][0]}); "
                    "the last occurrence wins."
                )
            vectors[token] = (line_no, vector)

    if width is None:
        width = TrainConfig.embedding_dim
        logging.warning(f"{path} holds no vectors; using a random table of dimension {width}.")
    table = init_table(len(vocab), width, rng)

    missing = 0
    for token, (line_no, vector) in vectors.items():
        idx = vocab.token_to_id.get(token)
        if idx is None:
            missing += 1
        elif idx == PAD_ID:
            logging.warning(f"{path}:{line_no}: ignoring a vector for the pad token.")
        else:
            table[idx] = vector
    if missing:
        logging.warning(f"{missing} token(s) of {path} are not in the vocabulary and were ignored.")
    logging.info(f"Loaded {len(vectors) - missing} external vector(s) of dimension {width} from {path}.")
    return EmbeddingTable(table, trainable)
