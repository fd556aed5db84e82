import logging
from dataclasses import replace

from codemix.common.datasets.bpe import BpeVocab
from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.models.embedding import load_external
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.utils.utils import make_rng


def make_model(cfg: TrainConfig, vocab: BpeVocab) -> CodeMixEnsemble:
    """Make a freshly initialized ensemble for `vocab`.

    When `cfg.embedding_path` is set, the embedding table(s) start from the external vectors (subwords the
    file does not list keep a random row drawn from the "external_init" stream of `cfg.seed`).
    """
    embedding = None
    if cfg.embedding_path is not None:
        embedding = load_external(
            cfg.embedding_path,
            vocab,
            dim=cfg.embedding_dim,
            trainable=cfg.embedding_trainable,
            rng=make_rng(cfg.seed, "external_init"),
        )
        cfg = replace(cfg, embedding_trainable=embedding.trainable)
    elif not cfg.embedding_trainable:
        logging.warning("`embedding_trainable=false` without `embedding_path` freezes a random embedding table.")
    return CodeMixEnsemble(cfg, vocab_size=len(vocab), embedding=embedding)
