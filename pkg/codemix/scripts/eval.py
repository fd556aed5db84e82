"""Evaluate a trained checkpoint on a labeled corpus.

Usage example:

```
python -m codemix eval --data test.txt --checkpoint outputs/model.safetensors --out-report report.json
```

The report holds the ensemble metrics (macro and weighted F1 side by side) and, under `components`,
the metrics of the CNN and attention components alone. All three confusion matrices are printed.
`--ensemble-mode` scores the checkpoint under the other combination rule without retraining.
"""

import json
import logging
import time

from tqdm import tqdm

from codemix.common.checkpoint import load_checkpoint
from codemix.common.datasets.bpe import load_vocab
from codemix.common.datasets.factory import TweetDataset, make_dataset
from codemix.common.errors import ConfigError
from codemix.common.evaluation.metrics import confusion, format_confusion, metrics
from codemix.common.logger import log_output_dir
from codemix.common.models.modeling_ensemble import CodeMixEnsemble, EnsembleOutput
from codemix.common.utils.io_utils import write_text_atomic


def run_inference(
    model: CodeMixEnsemble, dataset: TweetDataset, mode: str | None = None, enable_progbar: bool = False
) -> list[EnsembleOutput]:
    return [
        model.predict(item.sequence.ids, item.sequence.n, mode=mode)
        for item in tqdm(dataset, desc="Inference", disable=not enable_progbar, leave=False)
    ]


def eval_model(
    model: CodeMixEnsemble, dataset: TweetDataset, mode: str | None = None, enable_progbar: bool = False
) -> dict:
    """Score the ensemble and each component on a labeled dataset.

    Returns:
        {"ensemble": {"confusion", "report"}, "components": {"cnn": {...}, "attention": {...}}, "eval_s"}
    """
    if len(dataset) == 0:
        raise ValueError("Cannot evaluate on an empty dataset.")
    if not dataset.is_labeled:
        raise ConfigError("Evaluation needs gold labels for every tweet; use `predict` for unlabeled data.")
    start = time.time()
    outputs = run_inference(model, dataset, mode, enable_progbar)
    golds = [int(label) for label in dataset.labels]
    preds = {
        "ensemble": [int(out.prediction.label) for out in outputs],
        "cnn": [int(out.cnn.p_cnn.argmax()) for out in outputs],
        "attention": [int(out.attention.p_att.argmax()) for out in outputs],
    }
    results = {}
    for name, pred in preds.items():
        cm = confusion(golds, pred)
        results[name] = {"confusion": cm, "report": metrics(cm)}
    return {
        "ensemble": results["ensemble"],
        "components": {"cnn": results["cnn"], "attention": results["attention"]},
        "eval_s": time.time() - start,
    }


def report_to_dict(info: dict, mode: str) -> dict:
    def entry(result):
        return {**result["report"].to_dict(), "confusion": result["confusion"].to_list()}

    return {
        "ensemble_mode": mode,
        **entry(info["ensemble"]),
        "components": {name: entry(result) for name, result in info["components"].items()},
    }


def eval_cli(args) -> int:
    vocab = load_vocab(args.vocab) if args.vocab else None
    checkpoint = load_checkpoint(args.checkpoint, vocab=vocab, force=args.force)
    cfg = checkpoint.config
    dataset = make_dataset(args.data, checkpoint.vocab, checkpoint.rules, cfg.translit_lang, cfg.max_len)
    if len(dataset) == 0:
        raise ValueError(f"{args.data} holds no tweets.")
    mode = args.ensemble_mode or cfg.ensemble_mode

    info = eval_model(checkpoint.model, dataset, mode, enable_progbar=True)
    report = report_to_dict(info, mode)
    if args.out_report:
        write_text_atomic(args.out_report, json.dumps(report, indent=2) + "\n")
        log_output_dir(args.out_report)

    print(format_confusion(info["ensemble"]["confusion"], title=f"ensemble ({mode})"))
    for name, result in info["components"].items():
        print()
        print(format_confusion(result["confusion"], title=name))
    ens = info["ensemble"]["report"]
    print()
    print(f"accuracy:{ens.accuracy:.4f} macro_f1:{ens.macro_f1:.4f} weighted_f1:{ens.weighted_f1:.4f}")
    logging.info(f"Evaluated {len(dataset)} tweets in {info['eval_s']:.3f}s")
    return 0
