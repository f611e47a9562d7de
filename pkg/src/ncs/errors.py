"""Exception hierarchy shared across the engine.

Every error raised on purpose derives from NcsError so the CLI can map
failures onto its exit codes without guessing.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EVALUATOR = 3
EXIT_INTERNAL = 4


class NcsError(Exception):
    """Base class for all engine errors."""

    exit_code = EXIT_INTERNAL


class DomainError(NcsError):
    """Input outside the supported domain (bad coefficient, degenerate pool, ...)."""

    exit_code = EXIT_USAGE


class StructureError(NcsError):
    """Malformed architecture descriptor or stage chain."""

    exit_code = EXIT_USAGE


class ConfigError(NcsError):
    """Unreadable or inconsistent configuration / state file."""

    exit_code = EXIT_USAGE


class EvaluatorError(NcsError):
    """An evaluator failed to produce the requested accuracy values."""

    exit_code = EXIT_EVALUATOR


class ProtocolError(EvaluatorError):
    """An external trainer broke the wire protocol (timeout, bad frame, error status)."""

    exit_code = EXIT_EVALUATOR


class InvariantError(NcsError):
    """An internal invariant was violated; indicates a bug, not bad input."""

    exit_code = EXIT_INTERNAL
