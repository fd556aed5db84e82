"""Export the sentence vectors of both components with their 2-D PCA projections, ready for plotting.

Usage example:

```
python -m codemix export-vectors --data test.txt --checkpoint outputs/model.safetensors --out vectors.csv
```
"""

from codemix.common.checkpoint import load_checkpoint
from codemix.common.datasets.bpe import load_vocab
from codemix.common.datasets.factory import make_dataset
from codemix.common.evaluation.projection import export_vectors
from codemix.common.logger import log_output_dir


def export_vectors_cli(args) -> int:
    vocab = load_vocab(args.vocab) if args.vocab else None
    checkpoint = load_checkpoint(args.checkpoint, vocab=vocab, force=args.force)
    cfg = checkpoint.config
    dataset = make_dataset(args.data, checkpoint.vocab, checkpoint.rules, cfg.translit_lang, cfg.max_len)
    export_vectors(checkpoint.model, dataset, args.out)
    log_output_dir(args.out)
    return 0
