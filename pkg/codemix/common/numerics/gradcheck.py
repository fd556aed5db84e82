"""Finite-difference verification of the analytic gradients in `kernels`.

The output of an op is reduced to a scalar with a fixed random projection `s = Σ r ∘ output`.
`backward(r)` then gives the analytic gradient of `s`, which is compared coordinate-wise against
finite differences of `s`.
"""

from typing import Callable, Iterable, Mapping

import numpy as np

from codemix.common.numerics.kernels import DualResult

# Central-difference stencils: (offset multiples of eps, coefficient), divided by `denominator * eps`.
_STENCILS = {
    2: (((1, 1.0), (-1, -1.0)), 2.0),
    4: (((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)), 12.0),
}


def _projection_like(output, rng: np.random.Generator):
    if isinstance(output, tuple):
        return tuple(_projection_like(o, rng) for o in output)
    output = np.asarray(output)
    if output.ndim == 0:
        return np.asarray(1.0)
    return rng.standard_normal(output.shape)


def _project(output, projection) -> float:
    if isinstance(output, tuple):
        return sum(_project(o, p) for o, p in zip(output, projection, strict=True))
    return float(np.sum(np.asarray(output) * projection))


def numeric_gradient(
    op: Callable[..., DualResult],
    inputs: Mapping[str, np.ndarray],
    name: str,
    projection,
    eps: float = 1e-6,
    order: int = 2,
) -> np.ndarray:
    """Finite-difference gradient of the projected output w.r.t. `inputs[name]`."""
    offsets, denominator = _STENCILS[order]
    base = np.array(inputs[name], dtype=np.float64)
    grad = np.zeros_like(base)
    for index in np.ndindex(base.shape):
        total = 0.0
        for multiple, coefficient in offsets:
            perturbed = base.copy()
            perturbed[index] += multiple * eps
            total += coefficient * _project(op(**{**inputs, name: perturbed}).output, projection)
        grad[index] = total / (denominator * eps)
    return grad


def grad_check(
    op: Callable[..., DualResult],
    inputs: Mapping[str, np.ndarray],
    eps: float = 1e-6,
    floor: float = 1e-8,
    order: int = 2,
    wrt: Iterable[str] | None = None,
    seed: int = 0,
) -> float:
    """Return the maximum relative error between analytic and numeric gradients.

    The error of one coordinate is |analytic − numeric| / max(floor, |analytic| + |numeric|), maximised
    over every coordinate of every checked input. By default all inputs the op's backward returns a
    gradient for are checked; `wrt` restricts the set. `order` is 2 (central difference) or 4
    (five-point stencil).

    Callers must keep inputs away from the kinks of ReLU and max-pooling: a perturbation that flips an
    activation or a pooling winner makes the numeric gradient meaningless there.
    """
    if order not in _STENCILS:
        raise ValueError(f"`order` must be one of {sorted(_STENCILS)}. Got {order}.")
    rng = np.random.default_rng(seed)
    base = op(**inputs)
    projection = _projection_like(base.output, rng)
    analytic = base.backward(projection)
    names = list(wrt) if wrt is not None else [k for k in analytic if k in inputs]

    worst = 0.0
    for name in names:
        numeric = numeric_gradient(op, inputs, name, projection, eps=eps, order=order)
        expected = np.asarray(analytic[name], dtype=np.float64)
        if expected.shape != numeric.shape:
            raise ValueError(f"Gradient for `{name}` has shape {expected.shape}, input has {numeric.shape}.")
        error = np.abs(expected - numeric) / np.maximum(floor, np.abs(expected) + np.abs(numeric))
        if error.size:
            worst = max(worst, float(error.max()))
    return worst
