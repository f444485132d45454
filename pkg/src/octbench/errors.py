"""Exception types raised across the package.

Everything derives from :class:`OctBenchError` so the CLI can turn any
data-level failure into a clean exit code. Missing files surface as the
builtin :class:`FileNotFoundError` and write failures as :class:`OSError`.
"""


class OctBenchError(Exception):
    """Base class for all package errors."""


# imaging

class ImageDecodeError(OctBenchError, ValueError):
    """File exists but is not a decodable PNG/JPG."""


class InvalidDimensions(OctBenchError, ValueError):
    pass


class OutOfBounds(OctBenchError, ValueError):
    pass


class DimMismatch(OctBenchError, ValueError):
    pass


# dataset

class ManifestError(OctBenchError, ValueError):
    pass


class MissingColumn(ManifestError):
    pass


class DuplicateSampleId(ManifestError):
    pass


class SplitLeak(ManifestError):
    """A patient id occurs in more than one split."""


class EmptyManifest(ManifestError):
    pass


class UnknownSample(OctBenchError, KeyError):
    pass


class MissingFrame(OctBenchError):
    def __init__(self, sample_id, index):
        super().__init__(f"sample {sample_id!r} is missing frame {index}")
        self.sample_id = sample_id
        self.index = index


class IncompleteSubmission(OctBenchError):
    """Raised with the full list of defects, never just the first one."""

    def __init__(self, defects):
        self.defects = list(defects)
        head = "; ".join(self.defects[:10])
        more = f" (+{len(self.defects) - 10} more)" if len(self.defects) > 10 else ""
        super().__init__(f"incomplete submission, {len(self.defects)} defect(s): {head}{more}")


# preprocess / augment / baselines

class NoForeground(OctBenchError, ValueError):
    pass


class RegionSpansWidth(OctBenchError, ValueError):
    pass


class InvalidRange(OctBenchError, ValueError):
    pass


class InvalidFraction(OctBenchError, ValueError):
    pass


class InvalidDirection(OctBenchError, ValueError):
    pass


class WrongInputSize(OctBenchError, ValueError):
    pass


class InvalidParams(OctBenchError, ValueError):
    pass


class InvalidSteps(OctBenchError, ValueError):
    pass


class InvalidScale(OctBenchError, ValueError):
    pass


# metrics

class TooSmall(OctBenchError, ValueError):
    pass


class TooFewSamples(OctBenchError, ValueError):
    pass


class NumericalFailure(OctBenchError, ArithmeticError):
    pass


class EmbeddingParseError(OctBenchError, ValueError):
    pass


class InconsistentDim(EmbeddingParseError):
    pass


# harness

class DuplicateSubmissionId(OctBenchError, ValueError):
    pass


class EmptyInput(OctBenchError, ValueError):
    pass


class ConfigError(OctBenchError, ValueError):
    pass
