"""Exception types shared across the package."""

from __future__ import annotations


class CampusSmsError(Exception):
    """Base class for all domain errors."""


class MalformedRecipient(CampusSmsError):
    """Recipient is not a '+' followed by 8-15 digits."""


class EmptyBody(CampusSmsError):
    """Message or command body is empty after trimming."""


class UnknownMessage(CampusSmsError):
    """No message row with the given id."""


class IllegalEdge(CampusSmsError):
    """Requested status transition is not in the lifecycle lattice."""

    def __init__(self, from_status: int, to_status: int):
        super().__init__(f"illegal status edge {int(from_status)}->{int(to_status)}")
        self.from_status = int(from_status)
        self.to_status = int(to_status)


class UnknownGroup(CampusSmsError):
    """No group with the given id."""


class EmptyGroup(CampusSmsError):
    """Group resolves to zero recipients."""


class UnknownRecipient(CampusSmsError):
    """No recipient profile with the given key."""


class UnknownPlaceholder(CampusSmsError):
    """Template placeholder cannot be resolved for a recipient."""

    def __init__(self, placeholder: str, msisdn: str | None = None):
        detail = f"unknown placeholder {{{placeholder}}}"
        if msisdn:
            detail += f" for {msisdn}"
        super().__init__(detail)
        self.placeholder = placeholder
        self.msisdn = msisdn


class NotClaimedByWorker(CampusSmsError):
    """Outcome report for a message the worker no longer holds."""


class UnknownHandset(CampusSmsError):
    """No registered handset with the given msisdn."""


class TooLong(CampusSmsError):
    """Text exceeds the maximum concatenated-SMS length."""


class TransportError(CampusSmsError):
    """Delivery client could not reach the feed service."""


class MalformedDocument(CampusSmsError):
    """Wire document does not match the fixed XML schema."""


class ScenarioError(CampusSmsError):
    """Scenario file is invalid or a scenario step failed to apply."""
