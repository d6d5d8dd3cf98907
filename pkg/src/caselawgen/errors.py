"""Exception types shared across the engine."""


class CaselawgenError(Exception):
    """Base class for all engine errors."""


# corpus
class FileNotFound(CaselawgenError):
    pass


class EmptyCorpus(CaselawgenError):
    pass


class NotFound(CaselawgenError):
    """Paragraph lookup failed; signals a dangling citation."""


class EmptyQuery(CaselawgenError):
    pass


# providers
class ProviderUnavailable(CaselawgenError):
    """Transport kept failing after all retries."""


class ResponseEmpty(CaselawgenError):
    pass


class DimensionMismatch(CaselawgenError):
    pass


class UnknownStage(CaselawgenError):
    pass


# indexer
class ParseMismatch(CaselawgenError):
    """Keyphrase response line count did not match the batch size."""


class VersionMismatch(CaselawgenError):
    pass


class CorruptIndex(CaselawgenError):
    pass


# retrieval
class EmptyIndex(CaselawgenError):
    pass


class NoCandidates(CaselawgenError):
    """Every record scored below the similarity threshold."""


# clustering
class TooFewPoints(CaselawgenError):
    pass


# outline
class FormatViolation(CaselawgenError):
    pass


class EmptyToc(CaselawgenError):
    pass


class NotALeaf(CaselawgenError):
    pass


class UnknownNode(CaselawgenError):
    pass


# contentgen
class EmptyRetrieval(CaselawgenError):
    pass


# report
class UnknownLeafId(CaselawgenError):
    pass


class BadTemplate(CaselawgenError):
    pass


class CorruptSession(CaselawgenError):
    pass


# evalsuite
class ScoreParseFailure(CaselawgenError):
    pass
