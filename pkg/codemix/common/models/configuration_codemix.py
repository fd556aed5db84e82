from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml
from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from codemix import available_ensemble_modes, available_lang_tags
from codemix.common.errors import ConfigError


@dataclass
class TrainConfig:
    """Configuration of the CNN + BiLSTM-attention ensemble and of its training run.

    Defaults are sized for desk-scale corpora (a few thousand tweets). The parameters you will most likely
    need to change are `epochs`, `vocab_size` and, for a Hinglish corpus with a rule table,
    `translit_lang`.

    Args:
        seed: Seed of every random stream (initialization, shuffling, dropout).
        epochs: Maximum number of passes over the training set.
        batch_size: Number of tweets per optimizer step.
        learning_rate: Adam step size. 0 freezes every parameter.
        adam_beta1: Adam first-moment decay.
        adam_beta2: Adam second-moment decay.
        adam_eps: Adam denominator epsilon.
        dropout_rate: Dropout applied to both sentence vectors (CNN pooled vector and attention vector h)
            right before their fully connected layers. Must be in [0, 1).
        max_len: Maximum number of real subwords per tweet; longer tweets are truncated.
        vocab_size: Target BPE vocabulary size, reserved ids included.
        embedding_dim: Subword embedding width D.
        hidden_size: LSTM hidden size H of each direction.
        num_filters: Filter count F of each convolution bank.
        share_embedding: Whether both components read from one embedding table. By default each component
            has its own.
        ensemble_mode: "product" (element-wise product of the two distributions) or "weighted_average".
        ensemble_weight: Weight of the CNN distribution in "weighted_average" mode.
        early_stop_patience: Stop after this many epochs without a validation weighted-F1 improvement.
        translit_lang: Language tag whose tokens the transliteration rule table applies to.
        embedding_path: Optional `token<TAB>v1 ... vD` file used to initialize the embedding table(s).
        embedding_trainable: Whether the embedding table(s) are updated during training.
        wandb_enable: Mirror the per-epoch log to Weights & Biases.
        wandb_project: Weights & Biases project name.
    """

    seed: int = 1000
    epochs: int = 20
    batch_size: int = 32

    # Optimizer.
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    dropout_rate: float = 0.2

    # Tokenization.
    max_len: int = 128
    vocab_size: int = 8000

    # Architecture.
    embedding_dim: int = 64
    hidden_size: int = 64
    num_filters: int = 64
    share_embedding: bool = False

    # Ensemble.
    ensemble_mode: str = "product"
    ensemble_weight: float = 0.5

    early_stop_patience: int = 5

    translit_lang: str = "lang2"
    embedding_path: Optional[str] = None
    embedding_trainable: bool = True

    wandb_enable: bool = False
    wandb_project: str = "codemix"

    def __post_init__(self):
        """Input validation (not exhaustive)."""
        for name in (
            "epochs",
            "batch_size",
            "max_len",
            "vocab_size",
            "embedding_dim",
            "hidden_size",
            "num_filters",
            "early_stop_patience",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"`{name}` must be positive. Got {getattr(self, name)}.")
        if self.learning_rate < 0:
            raise ConfigError(f"`learning_rate` must be non-negative. Got {self.learning_rate}.")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"`dropout_rate` must be in [0, 1). Got {self.dropout_rate}.")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"`{name}` must be in [0, 1). Got {getattr(self, name)}.")
        if self.adam_eps <= 0:
            raise ConfigError(f"`adam_eps` must be positive. Got {self.adam_eps}.")
        if self.ensemble_mode not in available_ensemble_modes:
            raise ConfigError(
                f"`ensemble_mode` must be one of {available_ensemble_modes}. Got {self.ensemble_mode!r}."
            )
        if not 0.0 <= self.ensemble_weight <= 1.0:
            raise ConfigError(f"`ensemble_weight` must be in [0, 1]. Got {self.ensemble_weight}.")
        if self.translit_lang not in available_lang_tags:
            raise ConfigError(f"`translit_lang` must be one of {available_lang_tags}. Got {self.translit_lang!r}.")


@dataclass
class RunConfig:
    """Fully resolved inputs of one `train` invocation: the training configuration plus file paths."""

    train: TrainConfig = field(default_factory=TrainConfig)
    train_path: Optional[str] = None
    val_path: Optional[str] = None
    vocab_path: Optional[str] = None
    out_checkpoint: Optional[str] = None
    translit_rules: Optional[str] = None
    log_csv: Optional[str] = None

    def to_yaml(self) -> str:
        return OmegaConf.to_yaml(OmegaConf.structured(self))


def resolve_train_config(
    config_path: str | Path | None = None,
    overrides: list[str] | None = None,
    **flags,
) -> TrainConfig:
    """Merge, later wins: `TrainConfig` defaults, a YAML or JSON file of flat keys, `key=value`
    overrides, then explicit flags (None values are ignored). Unknown keys raise `ConfigError`.
    """
    try:
        cfg = OmegaConf.structured(TrainConfig)
        if config_path is not None:
            file_cfg = OmegaConf.load(config_path)
            if not isinstance(file_cfg, DictConfig):
                raise ConfigError(f"{config_path} must hold a mapping of flat `TrainConfig` keys.")
            cfg = OmegaConf.merge(cfg, file_cfg)
        if overrides:
            cfg = OmegaConf.merge(cfg, OmegaConf.from_dotlist(list(overrides)))
        flags = {k: v for k, v in flags.items() if v is not None}
        if flags:
            cfg = OmegaConf.merge(cfg, flags)
        return OmegaConf.to_object(cfg)
    except (OmegaConfBaseException, yaml.YAMLError) as e:
        raise ConfigError(str(e)) from e
