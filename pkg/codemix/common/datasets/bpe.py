"""Byte-pair-encoding subword vocabulary trained on the cleaned corpus.

Conventions:
- Words (cleaned tokens) are segmented independently; merges never cross a word.
- Consecutive words are separated by the reserved boundary id, which decodes to a single space, so
  `decode(encode(t))` reproduces the normalized text `" ".join(t.tokens)` exactly.
- Reserved ids: pad=0, unknown=1, placeholder=2 (the all-noise tweet token), boundary=3.
"""

import hashlib
import heapq
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from codemix.common.datasets.corpus import CleanTweet
from codemix.common.datasets.preprocess import PLACEHOLDER_TOKEN
from codemix.common.errors import FormatError

VOCAB_FORMAT_VERSION = 1

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
BOUNDARY_TOKEN = "▁"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, PLACEHOLDER_TOKEN, BOUNDARY_TOKEN)
PAD_ID, UNK_ID, PLACEHOLDER_ID, BOUNDARY_ID = range(len(RESERVED_TOKENS))


@dataclass(frozen=True)
class BpeVocab:
    """Ordered merge rules plus the subword <-> id maps: the tokenizer's entire state."""

    merges: tuple[tuple[str, str], ...]
    tokens: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)
    _ranks: dict[tuple[str, str], int] = field(init=False, repr=False, compare=False)
    _cache: dict[str, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.tokens[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise FormatError(f"Vocabulary must start with the reserved tokens {RESERVED_TOKENS}.")
        token_to_id = {token: i for i, token in enumerate(self.tokens)}
        if len(token_to_id) != len(self.tokens):
            raise FormatError("Vocabulary contains duplicate tokens.")
        object.__setattr__(self, "token_to_id", token_to_id)
        object.__setattr__(self, "_ranks", {pair: rank for rank, pair in enumerate(self.merges)})
        object.__setattr__(self, "_cache", {})

    def __len__(self) -> int:
        return len(self.tokens)

    def segment(self, word: str) -> tuple[str, ...]:
        """Split one word into subwords by replaying the merges in training order."""
        symbols = list(word)
        while len(symbols) > 1:
            ranked = [(self._ranks.get(pair), i) for i, pair in enumerate(zip(symbols, symbols[1:]))]
            ranked = [(rank, i) for rank, i in ranked if rank is not None]
            if not ranked:
                break
            best = self.merges[min(ranked)[0]]
            symbols = _merge_symbols(symbols, best)
        return tuple(symbols)

    def word_ids(self, word: str) -> tuple[int, ...]:
        if word == PLACEHOLDER_TOKEN:
            return (PLACEHOLDER_ID,)
        ids = self._cache.get(word)
        if ids is None:
            ids = tuple(i for symbol in self.segment(word) for i in self._symbol_ids(symbol))
            self._cache[word] = ids
        return ids

    def _symbol_ids(self, symbol: str) -> tuple[int, ...]:
        """Ids of one segmented symbol. Reserved ids are never produced from word text."""
        idx = self.token_to_id.get(symbol, UNK_ID)
        if idx >= len(RESERVED_TOKENS):
            return (idx,)
        if len(symbol) > 1:
            # merges rebuilt the text of a reserved token (e.g. a literal "<pad>"): spell it out
            return tuple(i for ch in symbol for i in self._symbol_ids(ch))
        return (UNK_ID,)

    def to_json(self) -> str:
        payload = {
            "version": VOCAB_FORMAT_VERSION,
            "merges": [list(pair) for pair in self.merges],
            "tokens": list(self.tokens),
        }
        return json.dumps(payload, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BpeVocab":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"Vocabulary is not valid JSON: {e}") from e
        if payload.get("version") != VOCAB_FORMAT_VERSION:
            raise FormatError(
                f"Unsupported vocabulary version {payload.get('version')!r}, expected {VOCAB_FORMAT_VERSION}."
            )
        return cls(tuple(tuple(pair) for pair in payload["merges"]), tuple(payload["tokens"]))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SubwordSequence:
    """Fixed-length id sequence; `mask` is True on the first `n` (real) positions."""

    ids: np.ndarray
    mask: np.ndarray
    n: int

    def __post_init__(self):
        if self.ids.shape != self.mask.shape:
            raise ValueError(f"ids {self.ids.shape} and mask {self.mask.shape} must have the same shape.")
        if int(self.mask.sum()) != self.n or not self.mask[: self.n].all():
            raise ValueError("mask must mark exactly the first `n` positions.")


def _merge_symbols(symbols: list[str], pair: tuple[str, str]) -> list[str]:
    merged = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            merged.append(pair[0] + pair[1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return merged


def bpe_train(corpus: list[CleanTweet], vocab_size: int = 8000) -> BpeVocab:
    """Learn merges: repeatedly merge the most frequent adjacent pair until the vocabulary holds
    `vocab_size` tokens or no pair occurs at least twice. Ties go to the lexicographically smallest pair.
    """
    word_counts = Counter(token for tweet in corpus for token in tweet.tokens if token != PLACEHOLDER_TOKEN)
    if not word_counts:
        raise ValueError("Cannot train a vocabulary on an empty corpus.")

    words = sorted(word_counts)
    freqs = [word_counts[w] for w in words]
    seqs = [list(w) for w in words]
    alphabet = sorted({symbol for seq in seqs for symbol in seq} - set(RESERVED_TOKENS))
    base_size = len(RESERVED_TOKENS) + len(alphabet)
    if vocab_size <= base_size:
        raise ValueError(
            f"vocab_size={vocab_size} must exceed the {len(alphabet)} distinct characters plus "
            f"{len(RESERVED_TOKENS)} reserved tokens ({base_size})."
        )

    tokens = list(RESERVED_TOKENS) + alphabet
    known = set(tokens)
    merges: list[tuple[str, str]] = []

    # Incremental pair statistics: counts, the words each pair occurs in, and a max-heap with lazy
    # invalidation (an entry is stale when its count no longer matches `stats`).
    stats: Counter = Counter()
    where: defaultdict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, (seq, freq) in enumerate(zip(seqs, freqs, strict=True)):
        for pair in zip(seq, seq[1:]):
            stats[pair] += freq
            where[pair].add(wi)
    heap = [(-count, pair) for pair, count in stats.items()]
    heapq.heapify(heap)

    while len(tokens) < vocab_size and heap:
        neg_count, pair = heapq.heappop(heap)
        if -neg_count != stats.get(pair, 0):
            continue
        if -neg_count < 2:
            break
        merges.append(pair)
        merged = pair[0] + pair[1]
        if merged not in known:
            known.add(merged)
            tokens.append(merged)

        touched = set()
        for wi in sorted(where.pop(pair)):
            seq, freq = seqs[wi], freqs[wi]
            for old in zip(seq, seq[1:]):
                stats[old] -= freq
                touched.add(old)
            seq = _merge_symbols(seq, pair)
            for new in zip(seq, seq[1:]):
                stats[new] += freq
                where[new].add(wi)
                touched.add(new)
            seqs[wi] = seq
        for p in sorted(touched):
            if stats[p] > 0:
                heapq.heappush(heap, (-stats[p], p))
            else:
                del stats[p]

    logging.info(f"Trained BPE vocabulary: {len(tokens)} tokens, {len(merges)} merges.")
    return BpeVocab(tuple(merges), tuple(tokens))


def encode(tweet: CleanTweet, vocab: BpeVocab, max_len: int = 128) -> SubwordSequence:
    """Subword ids of a cleaned tweet, truncated to `max_len` real positions then padded to `max_len`."""
    ids: list[int] = []
    for i, token in enumerate(tweet.tokens):
        if i > 0:
            ids.append(BOUNDARY_ID)
        ids.extend(vocab.word_ids(token))
        if len(ids) >= max_len:
            break
    n = min(len(ids), max_len)
    padded = np.full(max_len, PAD_ID, dtype=np.int64)
    padded[:n] = ids[:n]
    mask = np.zeros(max_len, dtype=bool)
    mask[:n] = True
    return SubwordSequence(padded, mask, n)


def decode(ids, vocab: BpeVocab) -> str:
    pieces = []
    for token_id in np.asarray(ids, dtype=np.int64).tolist():
        if token_id == PAD_ID:
            continue
        pieces.append(" " if token_id == BOUNDARY_ID else vocab.tokens[token_id])
    return "".join(pieces)


def save_vocab(vocab: BpeVocab, path: str | Path):
    from codemix.common.utils.io_utils import write_text_atomic

    write_text_atomic(path, vocab.to_json())


def load_vocab(path: str | Path) -> BpeVocab:
    return BpeVocab.from_json(Path(path).read_text(encoding="utf-8"))
