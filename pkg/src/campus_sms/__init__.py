"""Campus SMS scheduling and delivery system.

A central message store with an audited status lifecycle, a web feed
service speaking a fixed XML protocol to polling delivery workers, a
deterministic simulated GSM network with virtual handset inboxes, and a
keyword command router for pull/interactive SMS.
"""

__version__ = "0.1.0"

from campus_sms.models import (
    AttemptOutcome,
    AttemptRecord,
    GroupProfile,
    MarksRecord,
    Message,
    QuizQuestion,
    RecipientProfile,
    StatusFlag,
)

__all__ = [
    "AttemptOutcome",
    "AttemptRecord",
    "GroupProfile",
    "MarksRecord",
    "Message",
    "QuizQuestion",
    "RecipientProfile",
    "StatusFlag",
    "__version__",
]
