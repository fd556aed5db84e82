"""BiLSTM + dot-product self-attention sentence classifier.

The annotation of position i is k_i = [forward h_i ; backward h_i]. Every annotation is scored against
the annotation of the last real subword, e_i = k_i · k_n (no scaling), the scores are softmax-normalized
into weights a, and the sentence vector is h = Σ a_i k_i. h goes through dropout, a fully connected
layer and a softmax.

Only the n real positions are ever fed to the cells or attended over; padding is invisible.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from codemix.common.errors import DimensionError, EmptySequenceError
from codemix.common.numerics.kernels import (
    DualResult,
    Tensor,
    as_tensor,
    dropout,
    linear_forward,
    lstm_cell_forward,
    softmax,
)

NUM_CLASSES = 3
FORGET_BIAS_INIT = 1.0


@dataclass(frozen=True)
class LstmCellParams:
    weight: Tensor  # (4H, D + H), gate blocks i, f, o, g
    bias: Tensor  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.bias.shape[0] // 4

    @classmethod
    def init(cls, dim: int, hidden_size: int, rng: np.random.Generator) -> "LstmCellParams":
        bound = 1.0 / np.sqrt(hidden_size)
        weight = rng.uniform(-bound, bound, size=(4 * hidden_size, dim + hidden_size))
        bias = rng.uniform(-bound, bound, size=4 * hidden_size)
        bias[hidden_size : 2 * hidden_size] = FORGET_BIAS_INIT
        return cls(weight, bias)


@dataclass(frozen=True)
class BiLstmParams:
    forward: LstmCellParams
    backward: LstmCellParams
    fc_W: Tensor  # noqa: N815  (3, 2H)
    fc_b: Tensor

    def __post_init__(self):
        if self.forward.weight.shape != self.backward.weight.shape:
            raise DimensionError(
                f"Forward cell weight {self.forward.weight.shape} and backward cell weight "
                f"{self.backward.weight.shape} must have the same shape."
            )
        if self.fc_W.shape != (NUM_CLASSES, 2 * self.hidden_size):
            raise DimensionError(f"fc_W has shape {self.fc_W.shape}, expected {(NUM_CLASSES, 2 * self.hidden_size)}.")
        if self.fc_b.shape != (NUM_CLASSES,):
            raise DimensionError(f"fc_b has shape {self.fc_b.shape}, expected {(NUM_CLASSES,)}.")

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size

    @classmethod
    def init(cls, dim: int, hidden_size: int, rng: np.random.Generator) -> "BiLstmParams":
        forward = LstmCellParams.init(dim, hidden_size, rng)
        backward = LstmCellParams.init(dim, hidden_size, rng)
        bound = 1.0 / np.sqrt(2 * hidden_size)
        return cls(
            forward,
            backward,
            rng.uniform(-bound, bound, size=(NUM_CLASSES, 2 * hidden_size)),
            rng.uniform(-bound, bound, size=NUM_CLASSES),
        )

    def state_dict(self) -> dict[str, Tensor]:
        return {
            "lstm_fwd.weight": self.forward.weight,
            "lstm_fwd.bias": self.forward.bias,
            "lstm_bwd.weight": self.backward.weight,
            "lstm_bwd.bias": self.backward.bias,
            "fc.weight": self.fc_W,
            "fc.bias": self.fc_b,
        }

    @classmethod
    def from_state_dict(cls, state: dict[str, Tensor]) -> "BiLstmParams":
        return cls(
            LstmCellParams(state["lstm_fwd.weight"], state["lstm_fwd.bias"]),
            LstmCellParams(state["lstm_bwd.weight"], state["lstm_bwd.bias"]),
            state["fc.weight"],
            state["fc.bias"],
        )


def real_length(mask, total: int) -> int:
    """Number of real positions of a prefix mask (None means every position is real)."""
    if mask is None:
        return total
    if isinstance(mask, (int, np.integer)):
        n = int(mask)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (total,):
            raise DimensionError(f"mask has shape {mask.shape}, expected {(total,)}.")
        n = int(mask.sum())
        if not mask[:n].all():
            raise ValueError("mask must mark a prefix of the sequence as real.")
    if n > total:
        raise DimensionError(f"Real length {n} exceeds the sequence length {total}.")
    return n


def _run_cell(xs: Tensor, cell: LstmCellParams) -> tuple[Tensor, list[DualResult]]:
    hidden = cell.hidden_size
    h, c = np.zeros(hidden), np.zeros(hidden)
    states, steps = [], []
    for x_t in xs:
        step = lstm_cell_forward(x_t, h, c, cell.weight, cell.bias)
        h, c = step.output
        states.append(h)
        steps.append(step)
    return np.stack(states), steps


def _backprop_cell(dstates: Tensor, steps: list[DualResult], dim: int) -> tuple[Tensor, dict[str, Tensor]]:
    hidden = dstates.shape[1]
    dxs = np.zeros((len(steps), dim))
    dweight, dbias = None, None
    dh_next, dc_next = np.zeros(hidden), np.zeros(hidden)
    for t in range(len(steps) - 1, -1, -1):
        grads = steps[t].backward((dstates[t] + dh_next, dc_next))
        dxs[t] = grads["x"]
        dweight = grads["weight"] if dweight is None else dweight + grads["weight"]
        dbias = grads["bias"] if dbias is None else dbias + grads["bias"]
        dh_next, dc_next = grads["h_prev"], grads["c_prev"]
    return dxs, {"weight": dweight, "bias": dbias}


def bilstm_annotate(x: Tensor, mask, params: BiLstmParams) -> DualResult:
    """Annotations K (n x 2H) of the real positions, forward block first.

    Backward maps dK to the gradient w.r.t. `x` (zero on padded rows) and the cell parameters
    ("lstm_fwd.weight", "lstm_fwd.bias", "lstm_bwd.weight", "lstm_bwd.bias").
    """
    x = as_tensor(x, 2, "x")
    n = real_length(mask, x.shape[0])
    if n == 0:
        raise EmptySequenceError("bilstm_annotate: sequence has no real positions.")
    hidden = params.hidden_size
    real = x[:n]
    fwd_states, fwd_steps = _run_cell(real, params.forward)
    bwd_states, bwd_steps = _run_cell(real[::-1], params.backward)
    K = np.concatenate([fwd_states, bwd_states[::-1]], axis=1)  # noqa: N806

    def backward(dK: Tensor) -> dict[str, Tensor]:  # noqa: N803
        dK = as_tensor(dK, 2, "dK")  # noqa: N806
        dx_fwd, fwd_grads = _backprop_cell(dK[:, :hidden], fwd_steps, x.shape[1])
        dx_bwd, bwd_grads = _backprop_cell(dK[::-1, hidden:], bwd_steps, x.shape[1])
        dx = np.zeros_like(x)
        dx[:n] = dx_fwd + dx_bwd[::-1]
        return {
            "x": dx,
            "lstm_fwd.weight": fwd_grads["weight"],
            "lstm_fwd.bias": fwd_grads["bias"],
            "lstm_bwd.weight": bwd_grads["weight"],
            "lstm_bwd.bias": bwd_grads["bias"],
        }

    return DualResult(K, backward)


def attend(K: Tensor) -> DualResult:  # noqa: N803
    """Self-attention against the last annotation. Output is h; `aux` holds the scores e and weights a."""
    K = as_tensor(K, 2, "K")  # noqa: N806
    if K.shape[0] == 0:
        raise EmptySequenceError("attend: no annotations.")
    query = K[-1]
    e = K @ query
    a = softmax(e)
    h = a.output @ K

    def backward(dh: Tensor) -> dict[str, Tensor]:
        dh = as_tensor(dh, 1, "dh")
        dK = np.outer(a.output, dh)  # noqa: N806
        de = a.backward(K @ dh)["z"]
        dK += np.outer(de, query)
        dK[-1] += de @ K
        return {"K": dK}

    return DualResult(h, backward, {"e": e, "a": a.output})


@dataclass(frozen=True)
class AttnOutput:
    """`backward(dlogits)` returns the gradient w.r.t. the input rows under key "x" plus one gradient
    per `BiLstmParams.state_dict` entry.
    """

    K: Tensor  # noqa: N815
    e: Tensor
    a: Tensor
    h: Tensor
    logits: Tensor
    p_att: Tensor
    backward: Callable[[Tensor], dict[str, Tensor]] = field(repr=False)


def attn_forward(
    x: Tensor,
    mask,
    params: BiLstmParams,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> AttnOutput:
    annotate = bilstm_annotate(x, mask, params)
    attention = attend(annotate.output)
    drop = dropout(attention.output, dropout_rate, rng)
    fc = linear_forward(drop.output, params.fc_W, params.fc_b)
    probs = softmax(fc.output).output

    def backward(dlogits: Tensor) -> dict[str, Tensor]:
        fc_grads = fc.backward(as_tensor(dlogits, 1, "dlogits"))
        dh = drop.backward(fc_grads["x"])["x"]
        dK = attention.backward(dh)["K"]  # noqa: N806
        grads = annotate.backward(dK)
        grads["fc.weight"] = fc_grads["W"]
        grads["fc.bias"] = fc_grads["b"]
        return grads

    return AttnOutput(
        K=annotate.output,
        e=attention.aux["e"],
        a=attention.aux["a"],
        h=attention.output,
        logits=fc.output,
        p_att=probs,
        backward=backward,
    )
