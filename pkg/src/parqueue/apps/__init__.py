"""Example applications built on the job-queue runtime."""

from __future__ import annotations

from ..runtime import HandlerRegistry
from . import factor, matsquare, queens


def registry_for(app: str) -> HandlerRegistry:
    """Build a fresh handler registry for the named application, as used
    by worker processes that join a cluster over TCP."""
    if app == "factor":
        return factor.registry()
    if app == "matsquare":
        return matsquare.MatrixSquare().registry()
    if app == "queens":
        return queens.Queens().registry()
    raise ValueError(f"unknown application {app!r}")
