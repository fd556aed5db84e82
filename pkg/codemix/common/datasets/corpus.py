"""Reader/writer for the code-mixed corpus distribution format.

A corpus file is UTF-8 text made of blank-line separated blocks:

```
meta <uid> <label>
<token>\t<lang>
<token>\t<lang>
...
```

The label is optional (unlabeled test blocks are `meta <uid>`).
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

from codemix.common.errors import CorpusParseError, UnknownLabelError


class Sentiment(IntEnum):
    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2

    @classmethod
    def from_name(cls, name: str) -> "Sentiment":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise UnknownLabelError(
                f"Unknown label {name!r}. Expected one of {[s.name.lower() for s in cls]}."
            ) from None

    @property
    def label(self) -> str:
        return self.name.lower()


class LangTag(str, Enum):
    LANG1 = "lang1"
    LANG2 = "lang2"
    OTHER = "other"

    @classmethod
    def from_raw(cls, tag: str) -> "LangTag":
        """Normalize the tag sets of the different language pairs."""
        return _RAW_TAGS.get(tag.strip().lower(), cls.OTHER)


_RAW_TAGS = {
    "lang1": LangTag.LANG1,
    "eng": LangTag.LANG1,
    "lang2": LangTag.LANG2,
    "hin": LangTag.LANG2,
    "spa": LangTag.LANG2,
}


@dataclass(frozen=True)
class RawTweet:
    uid: str
    tokens: tuple[tuple[str, LangTag], ...]
    label: Sentiment | None = None
    # tags as written in the corpus (e.g. `Hin`, `spa`); empty for tweets built in code
    raw_tags: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class CleanTweet:
    uid: str
    tokens: tuple[str, ...]
    label: Sentiment | None = None

    @property
    def text(self) -> str:
        """Normalized text: surviving tokens joined by single spaces."""
        return " ".join(self.tokens)


_KNOWN_TAGS = {"lang1", "lang2", "other", "eng", "hin", "spa", "o", "ne", "fw", "mixed", "ambiguous", "unk"}


def _looks_like_meta(fields: list[str]) -> bool:
    # `meta\tEng` is a token line for the word "meta"; `meta 12` or `meta 12 positive` opens a block.
    if not fields or fields[0] != "meta":
        return False
    return len(fields) == 3 or (len(fields) == 2 and fields[1].lower() not in _KNOWN_TAGS)


def _parse_meta(line: str, line_no: int) -> tuple[str, Sentiment | None]:
    fields = line.split()
    if fields[0] != "meta" or len(fields) not in (2, 3):
        raise CorpusParseError(f"expected `meta <uid> [<label>]`, got {line!r}", line_no)
    try:
        label = Sentiment.from_name(fields[2]) if len(fields) == 3 else None
    except UnknownLabelError as e:
        raise UnknownLabelError(str(e), line_no) from None
    return fields[1], label


def parse_corpus_text(text: str) -> list[RawTweet]:
    tweets = []
    uid, label, tokens, raw_tags, meta_line = None, None, [], [], 0

    def close_block(line_no: int):
        if not tokens:
            raise CorpusParseError(f"block `meta {uid}` has no tokens", line_no)
        tweets.append(RawTweet(uid, tuple(tokens), label, tuple(raw_tags)))

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.rstrip("\r")
        if not line.strip():
            if uid is not None:
                close_block(meta_line)
                uid, label, tokens, raw_tags = None, None, [], []
            continue
        if uid is None:
            if not line.startswith("meta"):
                raise CorpusParseError(f"expected a `meta` line to open a block, got {line!r}", line_no)
            uid, label = _parse_meta(line, line_no)
            meta_line = line_no
            continue
        if _looks_like_meta(line.split()):
            raise CorpusParseError("new `meta` line without a blank separator", line_no)
        if "\t" not in line:
            raise CorpusParseError(f"expected `<token>\\t<lang>`, got {line!r}", line_no)
        token, tag = line.rsplit("\t", 1)
        if not token:
            raise CorpusParseError("empty token", line_no)
        tokens.append((token, LangTag.from_raw(tag)))
        raw_tags.append(tag.strip())

    if uid is not None:
        close_block(meta_line)
    return tweets


def parse_corpus(path: str | Path) -> list[RawTweet]:
    return parse_corpus_text(Path(path).read_text(encoding="utf-8"))


def serialize_corpus(tweets: list[RawTweet]) -> str:
    blocks = []
    for tweet in tweets:
        meta = f"meta {tweet.uid}" if tweet.label is None else f"meta {tweet.uid} {tweet.label.label}"
        tags = tweet.raw_tags or tuple(tag.value for _, tag in tweet.tokens)
        lines = [meta] + [f"{token}\t{tag}" for (token, _), tag in zip(tweet.tokens, tags, strict=True)]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)
