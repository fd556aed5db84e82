import logging
from dataclasses import dataclass
from pathlib import Path

from codemix.common.datasets.bpe import BpeVocab, SubwordSequence, encode
from codemix.common.datasets.corpus import CleanTweet, LangTag, Sentiment, parse_corpus
from codemix.common.datasets.preprocess import RuleTable, preprocess_tweet


@dataclass(frozen=True)
class EncodedTweet:
    uid: str
    tweet: CleanTweet
    sequence: SubwordSequence

    @property
    def label(self) -> Sentiment | None:
        return self.tweet.label


class TweetDataset:
    """Cleaned and subword-encoded tweets, in file order."""

    def __init__(self, items: list[EncodedTweet]):
        self.items = items

    @property
    def num_samples(self) -> int:
        return len(self.items)

    @property
    def is_labeled(self) -> bool:
        return all(item.label is not None for item in self.items)

    @property
    def labels(self) -> list[Sentiment | None]:
        return [item.label for item in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, idx: int) -> EncodedTweet:
        return self.items[idx]

    def __iter__(self):
        return iter(self.items)


def encode_tweets(
    tweets: list[CleanTweet], vocab: BpeVocab, max_len: int = 128
) -> TweetDataset:
    return TweetDataset([EncodedTweet(t.uid, t, encode(t, vocab, max_len)) for t in tweets])


def load_clean_corpus(
    path: str | Path,
    rules: RuleTable | None = None,
    translit_lang: str | LangTag = LangTag.LANG2,
) -> list[CleanTweet]:
    """Parse a corpus file and run the cleaning pipeline (transliterate, then remove noise)."""
    lang = LangTag(translit_lang)
    return [preprocess_tweet(tweet, rules, lang) for tweet in parse_corpus(path)]


def make_dataset(
    path: str | Path,
    vocab: BpeVocab,
    rules: RuleTable | None = None,
    translit_lang: str | LangTag = LangTag.LANG2,
    max_len: int = 128,
) -> TweetDataset:
    """Parse, clean and encode a corpus file: the full preprocessing pipeline."""
    clean = load_clean_corpus(path, rules, translit_lang)
    dataset = encode_tweets(clean, vocab, max_len)

    truncated = sum(item.sequence.n == max_len for item in dataset)
    if truncated:
        logging.warning(f"{truncated} tweet(s) of {path} reached `max_len={max_len}` subwords and may be truncated.")
    return dataset
