import numpy as np

from codemix.common.datasets.bpe import PAD_ID
from codemix.common.numerics.kernels import Tensor


class Adam:
    """Adam with bias-corrected moments, updating a dictionary of float64 arrays in place.

    Parameters named in `frozen` are never touched. Row `PAD_ID` of every parameter named in
    `embedding_names` is excluded from updates.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        frozen: set[str] | None = None,
        embedding_names: list[str] | None = None,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.frozen = set() if frozen is None else set(frozen)
        self.embedding_names = set() if embedding_names is None else set(embedding_names)
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items() if k not in self.frozen}
        self.v = {k: np.zeros_like(v) for k, v in params.items() if k not in self.frozen}

    def step(self, grads: dict[str, Tensor]):
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for name in self.m:
            grad = grads.get(name)
            if grad is None:
                continue
            if name in self.embedding_names:
                grad = grad.copy()
                grad[PAD_ID] = 0.0
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            update = self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if name in self.embedding_names:
                update[PAD_ID] = 0.0
            self.params[name] -= update
