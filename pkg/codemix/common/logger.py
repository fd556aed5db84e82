import csv
import io
import logging
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np
from termcolor import colored

from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.utils.import_utils import _wandb_available
from codemix.common.utils.io_utils import write_text_atomic

TRAIN_LOG_COLUMNS = ["epoch", "train_loss", "val_weighted_f1", "val_macro_f1", "train_accuracy"]


def log_output_dir(out_dir):
    logging.info(colored("Output dir:", "yellow", attrs=["bold"]) + f" {out_dir}")


def cfg_to_group(cfg: TrainConfig, return_list=False):
    """Return a group name for logging. Optionally returns group name as list."""
    lst = [
        f"ensemble:{cfg.ensemble_mode}",
        f"dim:{cfg.embedding_dim}",
        f"seed:{cfg.seed}",
    ]
    return lst if return_list else "-".join(lst)


class Logger:
    """Per-epoch training log. Rows are kept in memory and written as CSV by `finish`, and mirrored to
    wandb when `cfg.wandb_enable` is set.
    """

    def __init__(self, log_path: str | Path | None, job_name: str, cfg: TrainConfig):
        self._log_path = None if log_path is None else Path(log_path)
        self._job_name = job_name
        self._cfg = cfg
        self.rows: list[dict] = []
        self._wandb = None
        if not cfg.wandb_enable:
            logging.info(colored("Logs will be saved locally.", "yellow", attrs=["bold"]))
        elif not _wandb_available:
            logging.warning("`wandb_enable=true` but wandb is not installed; logs will be saved locally.")
        else:
            os.environ["WANDB_SILENT"] = "true"
            import wandb

            wandb.init(
                project=cfg.wandb_project,
                name=job_name,
                tags=cfg_to_group(cfg, return_list=True),
                dir=None if self._log_path is None else str(self._log_path.parent),
                config=asdict(cfg),
                save_code=False,
                job_type="train_eval",
            )
            logging.info(colored("Logs will be synced with wandb.", "blue", attrs=["bold"]))
            logging.info(f"Track this run --> {colored(wandb.run.get_url(), 'yellow', attrs=['bold'])}")
            self._wandb = wandb

    def log_epoch(self, row: dict):
        missing = set(TRAIN_LOG_COLUMNS) - set(row)
        if missing:
            raise ValueError(f"Training log row is missing {sorted(missing)}.")
        self.rows.append({k: row[k] for k in TRAIN_LOG_COLUMNS})
        if self._wandb is not None:
            self._wandb.log({f"train/{k}": v for k, v in row.items() if k != "epoch"}, step=row["epoch"])

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TRAIN_LOG_COLUMNS)
        for row in self.rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row.values()])
        return buffer.getvalue()

    def finish(self):
        if self._log_path is not None:
            write_text_atomic(self._log_path, self.to_csv())
        if self._wandb is not None:
            self._wandb.finish()
