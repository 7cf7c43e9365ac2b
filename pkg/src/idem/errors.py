"""Exception types shared across the package."""


class IdemError(Exception):
    """Base class for idem-specific failures."""


class FormatError(IdemError):
    """Malformed input file, header, labels, or configuration."""


class EmptyComparisonError(IdemError):
    """A comparison universe with no qualifying pairs, or a probe without partners."""


class ResolutionError(IdemError):
    """A target rate finer than the comparison set can resolve."""


class DivergenceError(IdemError):
    """Non-finite parameters encountered during training."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        msg = f"non-finite parameters at training step {step}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
