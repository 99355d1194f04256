"""Exception hierarchy shared across the pipeline."""


class CiForgeError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(CiForgeError):
    """Invalid or inconsistent run configuration."""


# --- statute ingestion ---------------------------------------------------


class EmptyDocument(CiForgeError):
    """Source document contains no nodes."""


class DuplicateId(CiForgeError):
    """Two source nodes canonicalize to the same identifier."""


class MalformedId(CiForgeError):
    """Identifier fails the section-id grammar."""


# --- model gateway --------------------------------------------------------


class GatewayError(CiForgeError):
    """Base class for chat gateway failures."""


class AuthMissing(GatewayError):
    """Live call attempted without endpoint or API key configured."""


class RateLimited(GatewayError):
    """Remote kept rejecting the request after the retry budget."""


class ReplayMiss(GatewayError):
    """Replay mode found no cassette entry for a request fingerprint."""


class MalformedRemoteResponse(GatewayError):
    """Remote payload does not follow the chat-completions shape."""


# --- case synthesis and corpus -------------------------------------------


class UnparseableResponse(CiForgeError):
    """Model response lacks the sections needed to build a case."""


class EmptyCandidatePool(CiForgeError):
    """A seed norm ended up with no surviving candidate cases."""


class NetworkError(CiForgeError):
    """Court-case service could not be reached."""


class SnapshotMissing(CiForgeError):
    """Local snapshot path does not exist."""


class InsufficientNegatives(CiForgeError):
    """Not enough irrelevant cases to balance the positive pools."""


class SplitLeak(CiForgeError):
    """A test background also appears in a training split."""


# --- evaluation ------------------------------------------------------------


class MissingNorm(CiForgeError):
    """A case's norm id cannot be resolved against the norm lookup."""


class LengthMismatch(CiForgeError):
    """Prediction and gold sequences differ in length."""


class TaskMismatch(CiForgeError):
    """Inputs do not carry the labels the requested task needs, or two
    reports being compared were scored on different tasks."""
