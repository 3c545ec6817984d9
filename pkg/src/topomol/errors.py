"""Exception types shared across the package."""


class TopomolError(Exception):
    """Base class for all package errors."""


class ParseError(TopomolError):
    """SMILES parsing failure; carries the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnsupportedToken(ParseError):
    pass


class UnbalancedBranch(ParseError):
    pass


class DanglingRingClosure(ParseError):
    pass


class SchemaError(TopomolError):
    """Invalid graph JSON; carries a JSON path to the offending field."""

    def __init__(self, message, path):
        super().__init__(f"{message} (at {path})")
        self.path = path


class IoError(TopomolError):
    pass


class AllRowsFailed(TopomolError):
    pass


class EmptySplit(TopomolError):
    pass


class EigenNonConvergence(TopomolError):
    pass


class SizeLimit(TopomolError):
    pass


class EmptyRange(TopomolError):
    pass


class RaggedRows(TopomolError):
    pass


class NonNumericCell(TopomolError):
    pass


class LengthMismatch(TopomolError):
    pass


class ZeroNorm(TopomolError):
    pass


class ShapeMismatch(TopomolError):
    pass


class VocabOverflow(TopomolError):
    pass


class ZeroNormEmbedding(TopomolError):
    pass


class BatchTooSmall(TopomolError):
    pass


class IndexOutOfRange(TopomolError):
    pass


class NonFiniteLoss(TopomolError):
    pass


class DegenerateVariance(TopomolError):
    pass


class ConfigError(TopomolError):
    """Run-configuration validation failure; message names the offending key path."""
