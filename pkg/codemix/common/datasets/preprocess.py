"""Tweet normalization: back-transliteration followed by noise removal.

1. `transliterate` rewrites tokens of one designated language with a longest-match rule table
   (Latin substrings -> native-script substrings). Without a table it is the identity. The designated
   tag depends on the corpus: Hinglish files tag Hindi `Hin`, which normalizes to `lang2`. Tokens
   whose corpus tag names Spanish are never rewritten, whatever the designated tag.
2. `remove_noise` drops usernames, URLs and emoticons; hashtags are kept verbatim.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path

import emoji

from codemix.common.datasets.corpus import CleanTweet, LangTag, RawTweet
from codemix.common.errors import FormatError

# Stands in for a tweet whose every token was noise, so every labeled example stays classifiable.
PLACEHOLDER_TOKEN = "<empty>"

ASCII_EMOTICONS = frozenset({":)", ":(", ":D", ":d", ";)", ":-)", ":-(", ":-D", ":-d"})

_URL_PATTERN = re.compile(r"^(?:[a-zA-Z][a-zA-Z0-9+.\-]*://|www\.)", re.IGNORECASE)

# raw corpus tags whose tokens keep their spelling
UNTRANSLITERATED_TAGS = frozenset({"spa"})


@dataclass(frozen=True)
class RuleTable:
    """Longest-match-first substring rewrite rules."""

    rules: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if any(not source for source in self.rules):
            raise FormatError("Rule sources must be non-empty strings.")

    @property
    def max_source_len(self) -> int:
        return max((len(s) for s in self.rules), default=0)

    def apply(self, text: str) -> str:
        out = []
        i = 0
        longest = self.max_source_len
        while i < len(text):
            for size in range(min(longest, len(text) - i), 0, -1):
                target = self.rules.get(text[i : i + size])
                if target is not None:
                    out.append(target)
                    i += size
                    break
            else:
                out.append(text[i])
                i += 1
        return "".join(out)

    def to_text(self) -> str:
        return "".join(f"{source}\t{target}\n" for source, target in sorted(self.rules.items()))


def parse_rules(text: str) -> RuleTable:
    rules = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise FormatError(f"expected `source<TAB>target`, got {line!r}", line_no)
        rules[parts[0]] = parts[1]
    return RuleTable(rules)


def load_rules(path: str | Path) -> RuleTable:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def transliterate(tweet: RawTweet, rules: RuleTable | None = None, lang: LangTag = LangTag.LANG2) -> RawTweet:
    """Rewrite the tokens tagged `lang` with `rules`; tokens of every other tag pass through."""
    if rules is None or not rules.rules:
        return tweet
    raw_tags = tweet.raw_tags or ("",) * len(tweet.tokens)
    tokens = tuple(
        (rules.apply(text) if tag == lang and raw.lower() not in UNTRANSLITERATED_TAGS else text, tag)
        for (text, tag), raw in zip(tweet.tokens, raw_tags, strict=True)
    )
    return RawTweet(tweet.uid, tokens, tweet.label, tweet.raw_tags)


def is_username(token: str) -> bool:
    return token.startswith("@")


def is_url(token: str) -> bool:
    return _URL_PATTERN.match(token) is not None


def is_ascii_emoticon(token: str) -> bool:
    return token in ASCII_EMOTICONS


def strip_emoji(token: str) -> str:
    return emoji.replace_emoji(token, replace="")


def remove_noise(tweet: RawTweet | CleanTweet) -> CleanTweet:
    """Drop usernames, URLs and emoticons, keeping survivors (hashtags included) in order.

    Accepts an already clean tweet too; the operation is idempotent.
    """
    if isinstance(tweet, RawTweet):
        texts = [text for text, _ in tweet.tokens]
    else:
        texts = list(tweet.tokens)

    kept = []
    for text in texts:
        if text.startswith("#"):
            kept.append(text)
            continue
        text = strip_emoji(text)
        if not text.strip() or is_username(text) or is_url(text) or is_ascii_emoticon(text):
            continue
        kept.append(text)

    if not kept:
        kept = [PLACEHOLDER_TOKEN]
    return CleanTweet(tweet.uid, tuple(kept), tweet.label)


def preprocess_tweet(tweet: RawTweet, rules: RuleTable | None = None, lang: LangTag = LangTag.LANG2) -> CleanTweet:
    return remove_noise(transliterate(tweet, rules, lang))
