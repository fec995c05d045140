"""Exception and warning types shared across the package."""


class TaxexError(Exception):
    """Base class for all errors raised by this package."""


class TaxexWarning(UserWarning):
    """Base class for recoverable conditions (clamped values, short supply)."""


# -- taxonomy ----------------------------------------------------------------

class MissingPairError(TaxexError):
    """A cross-set type pair has no relation entry."""


class AsymmetryError(TaxexError):
    """Subtype/Supertype duals (or symmetric relations) disagree."""


class UnsupportedTopologyError(TaxexError):
    """Relation structure outside the supported pairwise shapes."""


class UnknownLabelError(TaxexError):
    """An observed label does not belong to the side's type set."""


class InconsistentGoldError(TaxexError):
    """A both-side gold pair does not correspond to any output label."""


class EmptyAllowedSetError(TaxexError):
    """No output label is consistent with an observation."""


# -- corpus ------------------------------------------------------------------

class ParseError(TaxexError):
    """Malformed input file; carries a line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCorpusError(TaxexError):
    """A corpus with no sentences where one is required."""


class NoSubtypesError(TaxexError):
    """Subtype setup requested with an empty fine-type selection."""


class DisjointSubsetsError(TaxexError):
    """Overlapping setup requested with non-intersecting subsets."""


# -- training / losses -------------------------------------------------------

class DivergenceError(TaxexError):
    """Training loss became non-finite."""


class NonFiniteError(TaxexError):
    """A loss input could not be evaluated even after clamping."""


class UnnormalizableError(TaxexError):
    """A restricted distribution has no mass left to renormalize."""


class LabelSpaceMismatchError(TaxexError):
    """Two corpora do not share the same output label space."""
