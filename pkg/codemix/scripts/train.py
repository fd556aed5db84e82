"""Train the ensemble.

Usage example:

```
python -m codemix train --train train.txt --val val.txt --vocab vocab.json \
    --config configs/default.yaml --out-checkpoint outputs/model.safetensors epochs=30 dropout_rate=0.3
```

Trailing `key=value` arguments override the config file; `--seed` overrides both.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from tqdm import trange

from codemix.common.checkpoint import Checkpoint, save_checkpoint
from codemix.common.datasets.bpe import BpeVocab, load_vocab
from codemix.common.datasets.factory import TweetDataset, make_dataset
from codemix.common.datasets.preprocess import RuleTable, load_rules
from codemix.common.datasets.utils import iterate_batches
from codemix.common.errors import NumericalError
from codemix.common.logger import Logger, log_output_dir
from codemix.common.models.configuration_codemix import RunConfig, TrainConfig, resolve_train_config
from codemix.common.models.factory import make_model
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.optim import Adam
from codemix.common.utils.utils import format_big_number, make_rng
from codemix.scripts.eval import eval_model


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list[dict] = field(default_factory=list)


def update_model(
    model: CodeMixEnsemble, batch: dict, optimizer: Adam, dropout_rng: np.random.Generator
) -> dict:
    """One optimizer step on a batch. Returns a dictionary of items for logging.

    Example gradients are summed in batch order and divided by the batch size, so the step only depends
    on the batch contents and the dropout stream.
    """
    start_time = time.time()
    batch_size = len(batch["uid"])
    total_loss = 0.0
    grads: dict[str, np.ndarray] = {}
    for ids, n, label in zip(batch["ids"], batch["n"], batch["label"], strict=True):
        loss, example_grads = model.loss_and_grads(ids, int(n), int(label), dropout_rng)
        total_loss += loss
        for name, g in example_grads.items():
            if name in grads:
                grads[name] += g
            else:
                grads[name] = g.copy()
    loss = total_loss / batch_size
    if math.isfinite(loss):
        optimizer.step({name: g / batch_size for name, g in grads.items()})
    return {"loss": loss, "batch_size": batch_size, "update_s": time.time() - start_time}


def log_train_info(logger: Logger, info: dict, epoch: int, num_samples: int):
    log_items = [
        f"epch:{epoch}",
        # number of samples seen during training
        f"smpl:{format_big_number(num_samples)}",
        f"loss:{info['train_loss']:.3f}",
        f"val_wf1:{info['val_weighted_f1']:.3f}",
        f"val_mf1:{info['val_macro_f1']:.3f}",
        f"acc:{info['train_accuracy']:.3f}",
        # in seconds
        f"epch_s:{info['epoch_s']:.3f}",
    ]
    logging.info(" ".join(log_items))
    logger.log_epoch(info)


def train(
    cfg: TrainConfig,
    train_set: TweetDataset,
    vocab: BpeVocab,
    val_set: TweetDataset | None = None,
    rules: RuleTable | None = None,
    out_checkpoint: str | Path | None = None,
    log_csv: str | Path | None = None,
    job_name: str = "codemix",
    enable_progbar: bool = False,
) -> TrainResult:
    """Train both components jointly and keep the parameters of the best validation epoch.

    The loss of an example is the sum of the two components' cross-entropies; a batch loss is the mean
    over its examples. Training stops early after `cfg.early_stop_patience` epochs without a strict
    improvement of the validation weighted F1. Without a validation set the training set is scored
    instead.
    """
    if len(train_set) == 0:
        raise ValueError("Cannot train on an empty training set.")
    if not train_set.is_labeled:
        raise ValueError("Every training tweet needs a gold label.")
    if val_set is None or len(val_set) == 0:
        logging.warning("No validation set; early stopping and model selection use the training set.")
        val_set = None

    logging.info("make_model")
    model = make_model(cfg, vocab)
    optimizer = Adam(
        model.params,
        lr=cfg.learning_rate,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        eps=cfg.adam_eps,
        frozen=model.frozen_names,
        embedding_names=model.embedding_names,
    )
    shuffle_rng = make_rng(cfg.seed, "shuffle")
    dropout_rng = make_rng(cfg.seed, "dropout")

    logger = Logger(log_csv, job_name, cfg)
    num_learnable_params = sum(p.size for k, p in model.params.items() if k not in model.frozen_names)
    logging.info(f"{train_set.num_samples=} ({format_big_number(train_set.num_samples)})")
    logging.info(f"{len(vocab)=}")
    logging.info(f"{num_learnable_params=} ({format_big_number(num_learnable_params)})")
    logging.info(f"{model.num_parameters=} ({format_big_number(model.num_parameters)})")

    best_score, best_epoch, best_params = -1.0, 0, None
    epochs_without_improvement = 0
    num_samples = 0
    logging.info("Start training")
    for epoch in trange(1, cfg.epochs + 1, desc="Epochs", leave=False, disable=not enable_progbar):
        start_time = time.time()
        epoch_loss = 0.0
        for batch_idx, batch in enumerate(iterate_batches(train_set, cfg.batch_size, shuffle_rng)):
            info = update_model(model, batch, optimizer, dropout_rng)
            if not math.isfinite(info["loss"]):
                raise NumericalError(
                    f"Non-finite training loss at epoch {epoch}, batch {batch_idx} "
                    f"(tweets {batch['uid'][0]}..{batch['uid'][-1]})."
                )
            epoch_loss += info["loss"] * info["batch_size"]
            num_samples += info["batch_size"]

        train_eval = eval_model(model, train_set)
        val_eval = train_eval if val_set is None else eval_model(model, val_set)
        val_report = val_eval["ensemble"]["report"]
        row = {
            "epoch": epoch,
            "train_loss": float(epoch_loss / len(train_set)),
            "val_weighted_f1": float(val_report.weighted_f1),
            "val_macro_f1": float(val_report.macro_f1),
            "train_accuracy": float(train_eval["ensemble"]["report"].accuracy),
            "epoch_s": time.time() - start_time,
        }
        log_train_info(logger, row, epoch, num_samples)

        if row["val_weighted_f1"] > best_score:
            best_score, best_epoch = row["val_weighted_f1"], epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= cfg.early_stop_patience:
                logging.info(f"Early stopping after epoch {epoch}: no improvement since epoch {best_epoch}.")
                break

    for name, value in best_params.items():
        model.params[name][...] = value
    checkpoint = Checkpoint(model, vocab, rules, best_epoch, best_score)
    logging.info(f"Best validation weighted F1 {best_score:.4f} at epoch {best_epoch}")

    logger.finish()
    if log_csv is not None:
        log_output_dir(log_csv)
    if out_checkpoint is not None:
        logging.info(f"Checkpoint model of epoch {best_epoch}")
        save_checkpoint(checkpoint, out_checkpoint)
        log_output_dir(out_checkpoint)
    return TrainResult(checkpoint, logger.rows)


def train_cli(args) -> int:
    cfg = resolve_train_config(args.config, args.overrides, seed=args.seed)
    out_checkpoint = Path(args.out_checkpoint)
    log_csv = args.log_csv or str(out_checkpoint.with_suffix(".csv"))
    run = RunConfig(
        train=cfg,
        train_path=args.train,
        val_path=args.val,
        vocab_path=args.vocab,
        out_checkpoint=str(out_checkpoint),
        translit_rules=args.translit_rules,
        log_csv=log_csv,
    )
    logging.info("Resolved configuration:\n" + run.to_yaml())

    vocab = load_vocab(args.vocab)
    rules = load_rules(args.translit_rules) if args.translit_rules else None

    logging.info("make_dataset")
    train_set = make_dataset(args.train, vocab, rules, cfg.translit_lang, cfg.max_len)
    val_set = make_dataset(args.val, vocab, rules, cfg.translit_lang, cfg.max_len) if args.val else None

    train(
        cfg,
        train_set,
        vocab,
        val_set=val_set,
        rules=rules,
        out_checkpoint=out_checkpoint,
        log_csv=log_csv,
        job_name=out_checkpoint.stem,
        enable_progbar=True,
    )
    return 0
