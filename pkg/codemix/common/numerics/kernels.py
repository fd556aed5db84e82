"""Forward/backward kernels for every layer the two classifiers are built from.

All kernels share one contract: `kernel(**inputs) -> DualResult`. `result.output` is the forward value
and `result.backward(upstream)` maps a gradient shaped like the output to a dict holding one gradient
per differentiable input, keyed by the input's argument name and shaped like that input.

Everything is float64. Kernels never mutate their inputs.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import einops
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from codemix.common.errors import DimensionError, EmptySequenceError, OutOfVocabularyError, SequenceTooShortError

Tensor = np.ndarray

# Probabilities are floored before taking the log so the loss stays finite.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class DualResult:
    """A forward value together with the closure that back-propagates through it.

    `aux` carries by-products that are not differentiated (pooling indices, attention weights, ...).
    """

    output: Any
    backward: Callable[[Any], dict[str, Tensor]] = field(repr=False)
    aux: Mapping[str, Any] = field(default_factory=dict)


def as_tensor(x, ndim: int | None = None, name: str = "tensor") -> Tensor:
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"`{name}` must have {ndim} dimension(s), got shape {arr.shape}.")
    return arr


def sigmoid(x: Tensor) -> Tensor:
    # tanh form: exact identity, no overflow for large |x|.
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def linear_forward(x: Tensor, W: Tensor, b: Tensor) -> DualResult:  # noqa: N803
    x = as_tensor(x, 1, "x")
    W = as_tensor(W, 2, "W")  # noqa: N806
    b = as_tensor(b, 1, "b")
    if W.shape[1] != x.shape[0]:
        raise DimensionError(f"linear_forward: W has shape {W.shape} but x has shape {x.shape}.")
    if b.shape[0] != W.shape[0]:
        raise DimensionError(f"linear_forward: W has shape {W.shape} but b has shape {b.shape}.")

    out = W @ x + b

    def backward(grad: Tensor) -> dict[str, Tensor]:
        grad = as_tensor(grad, 1, "grad")
        return {"x": W.T @ grad, "W": np.outer(grad, x), "b": grad.copy()}

    return DualResult(out, backward)


def conv1d_forward(x: Tensor, filters: Tensor, bias: Tensor) -> DualResult:
    """Valid (unpadded), stride-1 convolution of a (T, D) sequence with (F, w, D) filters."""
    x = as_tensor(x, 2, "x")
    filters = as_tensor(filters, 3, "filters")
    bias = as_tensor(bias, 1, "bias")
    n_filters, width, dim = filters.shape
    if x.shape[1] != dim:
        raise DimensionError(f"conv1d_forward: filters have shape {filters.shape} but x has shape {x.shape}.")
    if bias.shape[0] != n_filters:
        raise DimensionError(f"conv1d_forward: filters have shape {filters.shape} but bias has shape {bias.shape}.")
    if x.shape[0] < width:
        raise SequenceTooShortError(
            f"conv1d_forward: sequence of length {x.shape[0]} is shorter than filter width {width}."
        )

    length = x.shape[0] - width + 1
    windows = einops.rearrange(sliding_window_view(x, width, axis=0), "l d w -> l w d")
    out = einops.einsum(windows, filters, "l w d, f w d -> l f") + bias

    def backward(grad: Tensor) -> dict[str, Tensor]:
        grad = as_tensor(grad, 2, "grad")
        dx = np.zeros_like(x)
        for j in range(width):
            dx[j : j + length] += grad @ filters[:, j, :]
        return {
            "x": dx,
            "filters": einops.einsum(grad, windows, "l f, l w d -> f w d"),
            "bias": grad.sum(axis=0),
        }

    return DualResult(out, backward)


def max_over_time(featmap: Tensor) -> DualResult:
    """Per-feature maximum over positions. Ties go to the smallest position (`np.argmax` semantics).

    `aux["indices"]` holds the winning position of every feature; backward routes each upstream
    component to exactly that position.
    """
    featmap = as_tensor(featmap, 2, "featmap")
    if featmap.shape[0] == 0:
        raise EmptySequenceError("max_over_time: feature map has no positions.")
    columns = np.arange(featmap.shape[1])
    indices = np.argmax(featmap, axis=0)
    values = featmap[indices, columns]

    def backward(grad: Tensor) -> dict[str, Tensor]:
        grad = as_tensor(grad, 1, "grad")
        dfeat = np.zeros_like(featmap)
        dfeat[indices, columns] = grad
        return {"featmap": dfeat}

    return DualResult(values, backward, {"indices": indices})


def relu(x: Tensor) -> DualResult:
    x = as_tensor(x)
    active = x > 0

    def backward(grad: Tensor) -> dict[str, Tensor]:
        # subgradient at exactly 0 is 0
        return {"x": np.asarray(grad, dtype=np.float64) * active}

    return DualResult(np.where(active, x, 0.0), backward)


def softmax(z: Tensor) -> DualResult:
    z = as_tensor(z, 1, "z")
    if z.shape[0] == 0:
        raise EmptySequenceError("softmax: empty input.")
    exp = np.exp(z - z.max())
    probs = exp / exp.sum()

    def backward(grad: Tensor) -> dict[str, Tensor]:
        grad = as_tensor(grad, 1, "grad")
        return {"z": probs * (grad - np.dot(grad, probs))}

    return DualResult(probs, backward)


def _check_gold(gold: int, n_classes: int) -> int:
    gold = int(gold)
    if not 0 <= gold < n_classes:
        raise IndexError(f"Gold class {gold} is out of range for {n_classes} classes.")
    return gold


def cross_entropy(probs: Tensor, gold: int) -> DualResult:
    probs = as_tensor(probs, 1, "probs")
    gold = _check_gold(gold, probs.shape[0])
    p_gold = probs[gold]
    loss = np.asarray(-np.log(max(p_gold, PROB_FLOOR)))

    def backward(grad) -> dict[str, Tensor]:
        dprobs = np.zeros_like(probs)
        if p_gold > PROB_FLOOR:
            dprobs[gold] = -float(grad) / p_gold
        return {"probs": dprobs}

    return DualResult(loss, backward)


def softmax_cross_entropy(logits: Tensor, gold: int) -> DualResult:
    """Fused softmax + cross-entropy; backward is the usual `probs - onehot(gold)`."""
    logits = as_tensor(logits, 1, "logits")
    gold = _check_gold(gold, logits.shape[0])
    probs = softmax(logits).output
    loss = np.asarray(-np.log(max(probs[gold], PROB_FLOOR)))

    def backward(grad) -> dict[str, Tensor]:
        dlogits = probs.copy()
        dlogits[gold] -= 1.0
        return {"logits": float(grad) * dlogits}

    return DualResult(loss, backward, {"probs": probs})


def lstm_cell_forward(x: Tensor, h_prev: Tensor, c_prev: Tensor, weight: Tensor, bias: Tensor) -> DualResult:
    """One step of the standard 4-gate LSTM.

    `weight` is (4H, D + H) acting on `[x; h_prev]` and `bias` is (4H,); gate blocks are stacked in
    the order input, forget, output, candidate. Output is the pair `(h, c)` and backward expects the
    pair `(dh, dc)` (either may be None).
    """
    x = as_tensor(x, 1, "x")
    h_prev = as_tensor(h_prev, 1, "h_prev")
    c_prev = as_tensor(c_prev, 1, "c_prev")
    weight = as_tensor(weight, 2, "weight")
    bias = as_tensor(bias, 1, "bias")
    hidden = h_prev.shape[0]
    if c_prev.shape != h_prev.shape:
        raise DimensionError(f"lstm_cell_forward: h_prev has shape {h_prev.shape} but c_prev has shape {c_prev.shape}.")
    if weight.shape != (4 * hidden, x.shape[0] + hidden):
        raise DimensionError(
            f"lstm_cell_forward: weight has shape {weight.shape} but x has shape {x.shape} "
            f"and h_prev has shape {h_prev.shape}."
        )
    if bias.shape != (4 * hidden,):
        raise DimensionError(f"lstm_cell_forward: weight has shape {weight.shape} but bias has shape {bias.shape}.")

    xh = np.concatenate([x, h_prev])
    z = weight @ xh + bias
    i = sigmoid(z[:hidden])
    f = sigmoid(z[hidden : 2 * hidden])
    o = sigmoid(z[2 * hidden : 3 * hidden])
    g = np.tanh(z[3 * hidden :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c

    def backward(grad) -> dict[str, Tensor]:
        dh, dc = grad
        dh = np.zeros(hidden) if dh is None else as_tensor(dh, 1, "dh")
        dc = np.zeros(hidden) if dc is None else as_tensor(dc, 1, "dc")
        dc_total = dc + dh * o * (1.0 - tanh_c**2)
        dz = np.concatenate(
            [
                dc_total * g * i * (1.0 - i),
                dc_total * c_prev * f * (1.0 - f),
                dh * tanh_c * o * (1.0 - o),
                dc_total * i * (1.0 - g**2),
            ]
        )
        dxh = weight.T @ dz
        return {
            "x": dxh[: x.shape[0]],
            "h_prev": dxh[x.shape[0] :],
            "c_prev": dc_total * f,
            "weight": np.outer(dz, xh),
            "bias": dz,
        }

    return DualResult((h, c), backward)


def embedding_lookup(table: Tensor, ids) -> DualResult:
    """Gather rows of `table`; backward scatter-adds, so repeated ids accumulate."""
    table = as_tensor(table, 2, "table")
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    bad = (ids < 0) | (ids >= table.shape[0])
    if bad.any():
        raise OutOfVocabularyError(int(ids[bad][0]), table.shape[0])
    rows = table[ids]

    def backward(grad: Tensor) -> dict[str, Tensor]:
        grad = as_tensor(grad, 2, "grad")
        dtable = np.zeros_like(table)
        np.add.at(dtable, ids, grad)
        return {"table": dtable}

    return DualResult(rows, backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> DualResult:
    """Inverted dropout. Identity when `rng` is None (inference) or `rate` is 0."""
    x = as_tensor(x)
    if rng is None or rate == 0.0:
        return DualResult(x, lambda grad: {"x": np.asarray(grad, dtype=np.float64)}, {"mask": None})
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward(grad: Tensor) -> dict[str, Tensor]:
        return {"x": np.asarray(grad, dtype=np.float64) * mask}

    return DualResult(x * mask, backward, {"mask": mask})
