"""Exception types shared across the package."""


class XRulesError(Exception):
    """Base class for all xrules errors."""


class EmptyBoxError(XRulesError):
    """A rule's terms describe an empty region (lower bound >= upper bound)."""


class DimMismatchError(XRulesError):
    """Input width does not match what the model/tree/ruleset expects."""


class LengthMismatchError(XRulesError):
    """Paired sequences (predictions vs. labels) differ in length."""


class MissingLabelColumnError(XRulesError):
    """CSV header does not contain the requested label column."""


class RaggedRowError(XRulesError):
    """A CSV data row has a different arity than the header."""

    def __init__(self, line_number: int, expected: int, got: int):
        super().__init__(
            f"line {line_number}: expected {expected} cells, got {got}"
        )
        self.line_number = line_number


class EmptyDatasetError(XRulesError):
    """Dataset unusable: no rows survive cleaning, or a degenerate label set."""


class TooFewRowsError(XRulesError):
    """Not enough rows for the requested split or subsample."""


class LabelOutOfRangeError(XRulesError):
    """A label index is >= the declared class count."""


class UnknownCategoryError(XRulesError):
    """Strict-mode transform met a category value unseen during fit."""


class LayerOutOfRangeError(XRulesError):
    """A hidden-layer index does not exist in the model."""


class FormatError(XRulesError):
    """A persisted file is truncated, corrupt, or has the wrong version."""


class NonFiniteLossError(XRulesError):
    """Training loss became NaN/inf (divergence)."""
