from typing import Iterator, Sequence

import numpy as np

from codemix.common.datasets.factory import EncodedTweet


def collate(items: Sequence[EncodedTweet]) -> dict[str, np.ndarray | list]:
    """Stack encoded tweets into a batch padded to the longest real length in the batch.

    The returned dictionary holds:
        "ids": (B, n_max) int64 subword ids, pad id after each example's `n` real positions.
        "n": (B,) int64 real lengths.
        "label": (B,) int64 gold classes, -1 for unlabeled examples.
        "uid": list of B example ids.
    """
    if not items:
        raise ValueError("Cannot collate an empty batch.")
    n = np.array([item.sequence.n for item in items], dtype=np.int64)
    n_max = int(n.max())
    return {
        "ids": np.stack([item.sequence.ids[:n_max] for item in items]),
        "n": n,
        "label": np.array([-1 if item.label is None else int(item.label) for item in items], dtype=np.int64),
        "uid": [item.uid for item in items],
    }


def iterate_batches(
    dataset: Sequence[EncodedTweet], batch_size: int, rng: np.random.Generator | None = None
) -> Iterator[dict[str, np.ndarray | list]]:
    """Yield collated batches; shuffled with `rng` when given, in dataset order otherwise."""
    order = np.arange(len(dataset)) if rng is None else rng.permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        yield collate([dataset[int(i)] for i in order[start : start + batch_size]])
