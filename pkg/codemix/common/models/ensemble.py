"""Combination of the two components' class distributions.

`product` multiplies the distributions element-wise, so either component can veto a class.
`weighted_average` mixes them linearly (`weight` on the CNN); it is kept for comparison runs.
"""

from dataclasses import dataclass

import numpy as np

from codemix.common.datasets.corpus import Sentiment
from codemix.common.errors import ContractError
from codemix.common.numerics.kernels import Tensor

PROBABILITY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Prediction:
    p_cnn: Tensor
    p_att: Tensor
    raw: Tensor  # unnormalized combination
    p_final: Tensor
    label: Sentiment
    tie_flag: bool

    def to_dict(self, uid: str | None = None) -> dict:
        d = {} if uid is None else {"uid": uid}
        d.update(
            {
                "p_cnn": self.p_cnn.tolist(),
                "p_att": self.p_att.tolist(),
                "p_final": self.p_final.tolist(),
                "class": self.label.label,
                "tie_flag": self.tie_flag,
            }
        )
        return d


def _check_probabilities(p, name: str) -> Tensor:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (len(Sentiment),):
        raise ContractError(f"`{name}` must have shape {(len(Sentiment),)}. Got {p.shape}.")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or abs(p.sum() - 1.0) > PROBABILITY_TOLERANCE:
        raise ContractError(f"`{name}` is not a probability vector: {p.tolist()}.")
    return p


def combine(p_cnn, p_att, mode: str = "product", weight: float = 0.5) -> Prediction:
    """Combine two class distributions and pick the class.

    The class is the argmax of the raw combination; exact ties go to the earliest class in the order
    negative, neutral, positive and set `tie_flag`. A product that vanishes everywhere yields a uniform
    `p_final` with `tie_flag` set.
    """
    p_cnn = _check_probabilities(p_cnn, "p_cnn")
    p_att = _check_probabilities(p_att, "p_att")
    if mode == "product":
        raw = p_cnn * p_att
    elif mode == "weighted_average":
        if not 0.0 <= weight <= 1.0:
            raise ContractError(f"`weight` must be in [0, 1]. Got {weight}.")
        raw = weight * p_cnn + (1.0 - weight) * p_att
    else:
        raise ValueError(f"Unknown ensemble mode {mode!r}. Expected 'product' or 'weighted_average'.")

    total = raw.sum()
    if total > 0.0:
        p_final = raw / total
        best = raw.max()
        tie_flag = int(np.count_nonzero(raw == best)) > 1
        label = Sentiment(int(np.argmax(raw)))
    else:
        p_final = np.full_like(raw, 1.0 / raw.shape[0])
        tie_flag = True
        label = Sentiment(0)
    return Prediction(p_cnn, p_att, raw, p_final, label, tie_flag)
