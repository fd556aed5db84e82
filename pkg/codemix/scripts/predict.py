"""Classify a corpus (labels optional) and write one JSON object per tweet.

Usage example:

```
python -m codemix predict --data test.txt --checkpoint outputs/model.safetensors --out predictions.jsonl
```

Each line holds the uid, both component distributions, the combined distribution, the class, the
tie flag and the attention weights over the tweet's real subwords.
"""

import json
import logging

from codemix.common.checkpoint import load_checkpoint
from codemix.common.datasets.bpe import load_vocab
from codemix.common.datasets.factory import TweetDataset, make_dataset
from codemix.common.logger import log_output_dir
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.utils.io_utils import atomic_write
from codemix.scripts.eval import run_inference


def predictions_to_jsonl(model: CodeMixEnsemble, dataset: TweetDataset, mode: str | None = None) -> list[str]:
    lines = []
    for item, out in zip(dataset, run_inference(model, dataset, mode), strict=True):
        record = out.prediction.to_dict(item.uid)
        record["attention"] = out.attention.a.tolist()
        lines.append(json.dumps(record, ensure_ascii=False))
    return lines


def predict_cli(args) -> int:
    vocab = load_vocab(args.vocab) if args.vocab else None
    checkpoint = load_checkpoint(args.checkpoint, vocab=vocab, force=args.force)
    cfg = checkpoint.config
    dataset = make_dataset(args.data, checkpoint.vocab, checkpoint.rules, cfg.translit_lang, cfg.max_len)
    lines = predictions_to_jsonl(checkpoint.model, dataset, args.ensemble_mode)
    with atomic_write(args.out) as f:
        for line in lines:
            f.write(line + "\n")
    log_output_dir(args.out)
    logging.info(f"Wrote {len(lines)} predictions")
    return 0
