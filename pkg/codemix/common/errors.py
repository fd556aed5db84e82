"""Exceptions raised across codemix.

Each error subclasses the closest builtin so callers may catch either the specific class or the
builtin (e.g. `except ValueError`).
"""


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class SequenceTooShortError(ValueError):
    """A sequence is shorter than the window applied to it."""


class EmptySequenceError(ValueError):
    """An operation that needs at least one position got none."""


class OutOfVocabularyError(IndexError):
    """A subword id is not a row of the embedding table."""

    def __init__(self, token_id: int, vocab_size: int):
        super().__init__(f"Subword id {token_id} is out of vocabulary (table has {vocab_size} rows).")
        self.token_id = token_id
        self.vocab_size = vocab_size


class CorpusParseError(ValueError):
    """Malformed block in a corpus file."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownLabelError(ValueError):
    """A label string outside {negative, neutral, positive}."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class FormatError(ValueError):
    """Malformed auxiliary file (external vectors, rule table, vocabulary)."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ContractError(ValueError):
    """An input violates an operation's contract (e.g. not a probability vector)."""


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""


class CheckpointError(RuntimeError):
    """A checkpoint cannot be read: truncated, corrupted or of another format version."""


class VocabMismatchError(CheckpointError):
    """The checkpoint was trained with a different vocabulary."""


class NumericalError(ArithmeticError):
    """Training produced a non-finite value."""
