"""Exception hierarchy shared across the package."""


class TourGuideError(Exception):
    """Base class for all package errors."""


class ParseError(TourGuideError):
    """Museum/persona/config document is syntactically malformed."""


class ValidationError(TourGuideError):
    """One or more museum invariants are violated.

    Carries the full list of violations, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownArtwork(TourGuideError):
    pass


class UnknownArea(TourGuideError):
    pass


class OutOfBounds(TourGuideError):
    pass


class OccupiedEndpoint(TourGuideError):
    pass


class NoPath(TourGuideError):
    pass


class MalformedResponse(TourGuideError):
    """Backend payload carries neither text nor a recognizable tool call."""


class BackendError(TourGuideError):
    """Retriable backend failure (network, timeout, auth)."""


class NetworkError(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


class AuthError(BackendError):
    pass


class EmptyCorpus(TourGuideError):
    pass
