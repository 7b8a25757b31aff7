"""Script/REPL shell over a world plus the management HTTP API."""

from .session import Session
from .mgmt import ManagementServer

__all__ = ["Session", "ManagementServer"]
