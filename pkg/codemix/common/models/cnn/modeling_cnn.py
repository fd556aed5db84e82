"""Multi-width convolutional sentence classifier.

Parallel convolutions of widths 2, 3 and 4 over the subword embeddings, ReLU, max-over-time pooling,
concatenation of the pooled vectors (width 2 block first), dropout, a fully connected layer and a softmax.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from codemix.common.errors import DimensionError
from codemix.common.numerics.kernels import (
    Tensor,
    as_tensor,
    conv1d_forward,
    dropout,
    linear_forward,
    max_over_time,
    relu,
    softmax,
)

CNN_WIDTHS = (2, 3, 4)
NUM_CLASSES = 3


@dataclass(frozen=True)
class ConvBank:
    width: int
    filters: Tensor  # (F, width, D)
    bias: Tensor  # (F,)


@dataclass(frozen=True)
class CnnParams:
    banks: tuple[ConvBank, ...]
    fc_W: Tensor  # noqa: N815  (3, 3F)
    fc_b: Tensor

    def __post_init__(self):
        widths = tuple(bank.width for bank in self.banks)
        if widths != CNN_WIDTHS:
            raise ValueError(f"Expected convolution banks of widths {CNN_WIDTHS}. Got {widths}.")
        counts = {bank.filters.shape[0] for bank in self.banks}
        if len(counts) != 1:
            raise DimensionError(f"All banks must have the same filter count. Got {sorted(counts)}.")
        for bank in self.banks:
            if bank.filters.shape[1] != bank.width or bank.bias.shape != (bank.filters.shape[0],):
                raise DimensionError(
                    f"Bank of width {bank.width} has filters {bank.filters.shape} and bias {bank.bias.shape}."
                )
        if self.fc_W.shape != (NUM_CLASSES, len(self.banks) * self.num_filters):
            raise DimensionError(f"fc_W has shape {self.fc_W.shape}, expected {(NUM_CLASSES, 3 * self.num_filters)}.")
        if self.fc_b.shape != (NUM_CLASSES,):
            raise DimensionError(f"fc_b has shape {self.fc_b.shape}, expected {(NUM_CLASSES,)}.")

    @property
    def num_filters(self) -> int:
        return self.banks[0].filters.shape[0]

    @property
    def dim(self) -> int:
        return self.banks[0].filters.shape[2]

    @classmethod
    def init(cls, dim: int, num_filters: int, rng: np.random.Generator) -> "CnnParams":
        banks = []
        for width in CNN_WIDTHS:
            bound = 1.0 / np.sqrt(width * dim)
            banks.append(
                ConvBank(
                    width,
                    rng.uniform(-bound, bound, size=(num_filters, width, dim)),
                    rng.uniform(-bound, bound, size=num_filters),
                )
            )
        fan_in = len(CNN_WIDTHS) * num_filters
        bound = 1.0 / np.sqrt(fan_in)
        return cls(
            tuple(banks),
            rng.uniform(-bound, bound, size=(NUM_CLASSES, fan_in)),
            rng.uniform(-bound, bound, size=NUM_CLASSES),
        )

    def state_dict(self) -> dict[str, Tensor]:
        state = {}
        for bank in self.banks:
            state[f"conv{bank.width}.filters"] = bank.filters
            state[f"conv{bank.width}.bias"] = bank.bias
        state["fc.weight"] = self.fc_W
        state["fc.bias"] = self.fc_b
        return state

    @classmethod
    def from_state_dict(cls, state: dict[str, Tensor]) -> "CnnParams":
        banks = tuple(ConvBank(w, state[f"conv{w}.filters"], state[f"conv{w}.bias"]) for w in CNN_WIDTHS)
        return cls(banks, state["fc.weight"], state["fc.bias"])


@dataclass(frozen=True)
class CnnOutput:
    """`pooled` is the sentence vector before the fully connected layer (and before dropout).

    `backward(dlogits)` returns the gradient w.r.t. the input rows under key "x" plus one gradient per
    `CnnParams.state_dict` entry.
    """

    pooled: Tensor
    logits: Tensor
    p_cnn: Tensor
    indices: tuple[np.ndarray, ...] = field(repr=False)
    backward: Callable[[Tensor], dict[str, Tensor]] = field(repr=False)


def cnn_forward(
    x: Tensor,
    params: CnnParams,
    n: int | None = None,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> CnnOutput:
    """Classify the first `n` rows of `x` (all rows when `n` is None).

    A bank whose width exceeds `n` sees the real rows zero-padded on the right to its width. Rows past
    `n` never enter a convolution, so padding cannot win the max.
    """
    x = as_tensor(x, 2, "x")
    n = x.shape[0] if n is None else int(n)
    if not 1 <= n <= x.shape[0]:
        raise DimensionError(f"Real length n={n} must be in [1, {x.shape[0]}] for x of shape {x.shape}.")

    real = x[:n]
    convs, acts, pools = [], [], []
    for bank in params.banks:
        xb = real if n >= bank.width else np.vstack([real, np.zeros((bank.width - n, x.shape[1]))])
        conv = conv1d_forward(xb, bank.filters, bank.bias)
        act = relu(conv.output)
        pool = max_over_time(act.output)
        convs.append(conv)
        acts.append(act)
        pools.append(pool)

    pooled = np.concatenate([pool.output for pool in pools])
    drop = dropout(pooled, dropout_rate, rng)
    fc = linear_forward(drop.output, params.fc_W, params.fc_b)
    probs = softmax(fc.output).output
    num_filters = params.num_filters

    def backward(dlogits: Tensor) -> dict[str, Tensor]:
        fc_grads = fc.backward(as_tensor(dlogits, 1, "dlogits"))
        dpooled = drop.backward(fc_grads["x"])["x"]
        grads = {}
        dx = np.zeros_like(x)
        for k, bank in enumerate(params.banks):
            dpool = dpooled[k * num_filters : (k + 1) * num_filters]
            dact = pools[k].backward(dpool)["featmap"]
            dconv = acts[k].backward(dact)["x"]
            conv_grads = convs[k].backward(dconv)
            # rows added as zero padding are not inputs
            dx[:n] += conv_grads["x"][:n]
            grads[f"conv{bank.width}.filters"] = conv_grads["filters"]
            grads[f"conv{bank.width}.bias"] = conv_grads["bias"]
        grads["fc.weight"] = fc_grads["W"]
        grads["fc.bias"] = fc_grads["b"]
        grads["x"] = dx
        return grads

    return CnnOutput(
        pooled=pooled,
        logits=fc.output,
        p_cnn=probs,
        indices=tuple(pool.aux["indices"] for pool in pools),
        backward=backward,
    )
