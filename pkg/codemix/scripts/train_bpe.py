"""Learn a BPE subword vocabulary from a (cleaned) training corpus.

Usage example:

```
python -m codemix train-bpe --corpus train.txt --vocab-size 8000 --out vocab.json
```
"""

import logging

from codemix.common.datasets.bpe import bpe_train, save_vocab
from codemix.common.datasets.factory import load_clean_corpus
from codemix.common.datasets.preprocess import load_rules
from codemix.common.errors import ConfigError
from codemix.common.logger import log_output_dir


def train_bpe_cli(args) -> int:
    rules = load_rules(args.translit_rules) if args.translit_rules else None
    corpus = load_clean_corpus(args.corpus, rules, args.translit_lang)
    if not corpus:
        raise ValueError(f"{args.corpus} holds no tweets.")
    logging.info(f"Training a vocabulary of {args.vocab_size} tokens on {len(corpus)} tweets")
    try:
        vocab = bpe_train(corpus, args.vocab_size)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    save_vocab(vocab, args.out)
    log_output_dir(args.out)
    print(f"vocab_size:{len(vocab)} merges:{len(vocab.merges)} hash:{vocab.hash[:12]}")
    return 0
