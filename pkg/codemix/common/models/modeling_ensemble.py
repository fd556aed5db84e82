"""CNN + BiLSTM-attention ensemble over subword embeddings.

All trainable weights live in one flat, ordered `params` dictionary of float64 arrays:

    cnn.embedding / attention.embedding   (V, D), or a single `embedding` with `share_embedding`
    cnn.conv{2,3,4}.filters / .bias       (F, w, D) / (F,)
    cnn.fc.weight / .bias                 (3, 3F) / (3,)
    attention.lstm_{fwd,bwd}.weight / .bias   (4H, D + H) / (4H,)
    attention.fc.weight / .bias           (3, 2H) / (3,)

The component parameter dataclasses are built as views over this dictionary at every forward, so the
optimizer can update the arrays in place.

Training treats the components independently: the loss of one example is the sum of the two
cross-entropies. The ensemble combination (`combine`) only happens at inference.
"""

from dataclasses import dataclass, field

import numpy as np

from codemix.common.models.attention.modeling_attention import AttnOutput, BiLstmParams, attn_forward
from codemix.common.models.cnn.modeling_cnn import CnnOutput, CnnParams, cnn_forward
from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.models.embedding import EmbeddingTable, embed, init_table
from codemix.common.models.ensemble import Prediction, combine
from codemix.common.numerics.kernels import DualResult, Tensor, softmax_cross_entropy
from codemix.common.utils.utils import make_rng

COMPONENTS = ("cnn", "attention")


@dataclass(frozen=True)
class EnsembleOutput:
    cnn: CnnOutput
    attention: AttnOutput
    prediction: Prediction
    cnn_lookup: DualResult = field(repr=False)
    attention_lookup: DualResult = field(repr=False)


class CodeMixEnsemble:
    name = "codemix_ensemble"

    def __init__(
        self,
        config: TrainConfig | None = None,
        vocab_size: int | None = None,
        params: dict[str, Tensor] | None = None,
        embedding: EmbeddingTable | Tensor | None = None,
    ):
        """
        Args:
            config: Configuration instance or None, in which case the default `TrainConfig` is used.
            vocab_size: Number of embedding rows. Required unless `params` is given.
            params: Existing weights (e.g. from a checkpoint). When None, fresh weights are drawn from the
                "init" random stream of `config.seed`.
            embedding: Optional initial embedding table (e.g. from external vectors), copied into every
                embedding table of a fresh model.
        """
        if config is None:
            config = TrainConfig()
        self.config = config
        if params is None:
            if vocab_size is None:
                raise ValueError("`vocab_size` is required to initialize a fresh model.")
            params = self._init_params(vocab_size, embedding)
        else:
            params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        if self.embedding_name("cnn") not in params:
            raise ValueError(f"Missing parameter `{self.embedding_name('cnn')}`.")
        expected = self.expected_shapes(params[self.embedding_name("cnn")].shape[0])
        if list(params) != list(expected):
            raise ValueError(f"Expected parameters {list(expected)}. Got {list(params)}.")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"Parameter `{name}` has shape {params[name].shape}, expected {shape}.")
        self.params = params

    def embedding_name(self, component: str) -> str:
        return "embedding" if self.config.share_embedding else f"{component}.embedding"

    @property
    def embedding_names(self) -> list[str]:
        return list(dict.fromkeys(self.embedding_name(c) for c in COMPONENTS))

    @property
    def frozen_names(self) -> set[str]:
        return set() if self.config.embedding_trainable else set(self.embedding_names)

    @property
    def vocab_size(self) -> int:
        return self.params[self.embedding_names[0]].shape[0]

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def expected_shapes(self, vocab_size: int) -> dict[str, tuple[int, ...]]:
        cfg = self.config
        d, h, f = cfg.embedding_dim, cfg.hidden_size, cfg.num_filters
        shapes = {}
        if cfg.share_embedding:
            shapes["embedding"] = (vocab_size, d)
        else:
            shapes["cnn.embedding"] = (vocab_size, d)
        for w in (2, 3, 4):
            shapes[f"cnn.conv{w}.filters"] = (f, w, d)
            shapes[f"cnn.conv{w}.bias"] = (f,)
        shapes["cnn.fc.weight"] = (3, 3 * f)
        shapes["cnn.fc.bias"] = (3,)
        if not cfg.share_embedding:
            shapes["attention.embedding"] = (vocab_size, d)
        for direction in ("fwd", "bwd"):
            shapes[f"attention.lstm_{direction}.weight"] = (4 * h, d + h)
            shapes[f"attention.lstm_{direction}.bias"] = (4 * h,)
        shapes["attention.fc.weight"] = (3, 2 * h)
        shapes["attention.fc.bias"] = (3,)
        return shapes

    def _init_params(self, vocab_size: int, embedding: EmbeddingTable | Tensor | None) -> dict[str, Tensor]:
        cfg = self.config
        rng = make_rng(cfg.seed, "init")
        cnn = CnnParams.init(cfg.embedding_dim, cfg.num_filters, rng)
        attention = BiLstmParams.init(cfg.embedding_dim, cfg.hidden_size, rng)

        def new_table() -> Tensor:
            table = init_table(vocab_size, cfg.embedding_dim, rng)
            if embedding is None:
                return table
            source = embedding.table if isinstance(embedding, EmbeddingTable) else embedding
            return np.array(source, dtype=np.float64)

        params = {}
        if cfg.share_embedding:
            params["embedding"] = new_table()
        else:
            params["cnn.embedding"] = new_table()
        params.update({f"cnn.{k}": v for k, v in cnn.state_dict().items()})
        if not cfg.share_embedding:
            params["attention.embedding"] = new_table()
        params.update({f"attention.{k}": v for k, v in attention.state_dict().items()})
        return params

    def component_state(self, component: str) -> dict[str, Tensor]:
        prefix = f"{component}."
        return {k[len(prefix) :]: v for k, v in self.params.items() if k.startswith(prefix)}

    def embedding_table(self, component: str) -> EmbeddingTable:
        """View of `component`'s embedding table over `params`; frozen tables are not trainable."""
        name = self.embedding_name(component)
        return EmbeddingTable(self.params[name], trainable=name not in self.frozen_names)

    def cnn_params(self) -> CnnParams:
        return CnnParams.from_state_dict(self.component_state("cnn"))

    def attention_params(self) -> BiLstmParams:
        return BiLstmParams.from_state_dict(self.component_state("attention"))

    def _run_components(
        self, ids, n: int, dropout_rng: np.random.Generator | None
    ) -> tuple[CnnOutput, AttnOutput, DualResult, DualResult]:
        ids = np.asarray(ids, dtype=np.int64)[:n]
        rate = self.config.dropout_rate
        x_cnn = embed(ids, self.embedding_table("cnn"))
        x_att = embed(ids, self.embedding_table("attention"))
        cnn = cnn_forward(x_cnn.output, self.cnn_params(), n, rate, dropout_rng)
        attention = attn_forward(x_att.output, n, self.attention_params(), rate, dropout_rng)
        return cnn, attention, x_cnn, x_att

    def forward(
        self,
        ids,
        n: int,
        dropout_rng: np.random.Generator | None = None,
        mode: str | None = None,
    ) -> EnsembleOutput:
        """Run both components on the first `n` ids. Dropout is active only when `dropout_rng` is given."""
        cnn, attention, x_cnn, x_att = self._run_components(ids, n, dropout_rng)
        prediction = combine(
            cnn.p_cnn,
            attention.p_att,
            mode=mode or self.config.ensemble_mode,
            weight=self.config.ensemble_weight,
        )
        return EnsembleOutput(cnn, attention, prediction, x_cnn, x_att)

    def loss_and_grads(
        self, ids, n: int, label: int, dropout_rng: np.random.Generator | None = None
    ) -> tuple[float, dict[str, Tensor]]:
        """Loss (sum of both components' cross-entropies) of one example and its gradients.

        Gradients of frozen embeddings are omitted; the pad row of every embedding gradient is zero.
        """
        cnn, attention, x_cnn, x_att = self._run_components(ids, n, dropout_rng)
        loss = 0.0
        grads: dict[str, Tensor] = {}
        for component, result, lookup in (("cnn", cnn, x_cnn), ("attention", attention, x_att)):
            ce = softmax_cross_entropy(result.logits, label)
            loss += float(ce.output)
            component_grads = result.backward(ce.backward(1.0)["logits"])
            dx = component_grads.pop("x")
            for k, g in component_grads.items():
                grads[f"{component}.{k}"] = g
            if self.embedding_table(component).trainable:
                name = self.embedding_name(component)
                dtable = lookup.backward(dx)["table"]
                grads[name] = grads[name] + dtable if name in grads else dtable
        return loss, grads

    def predict(self, ids, n: int, mode: str | None = None) -> EnsembleOutput:
        return self.forward(ids, n, dropout_rng=None, mode=mode)

    def state_dict(self) -> dict[str, Tensor]:
        return dict(self.params)
