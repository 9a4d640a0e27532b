"""Storage backends behind one interface."""

from __future__ import annotations

from campus_sms.storage.base import MessageStore
from campus_sms.storage.memory import MemoryStore
from campus_sms.storage.sqlite import SqliteStore

__all__ = ["MessageStore", "MemoryStore", "SqliteStore", "open_store"]


def open_store(path: str) -> MessageStore:
    """Open a store: "memory" for the dict backend, anything else is a
    sqlite path (":memory:" gives a throwaway sqlite database)."""
    if path == "memory":
        return MemoryStore()
    return SqliteStore(path)
