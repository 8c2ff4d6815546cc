"""Resource caps shared by the exhaustive searches.

Every search in this package is brute force over a finite space, so each
one checks its size against a cap before starting.  Caps are read from the
environment on every call, which lets the CLI and tests adjust them without
threading a config object through every function.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

__all__ = ["Limits", "ResourceLimitError", "current_limits"]


class ResourceLimitError(RuntimeError):
    """A requested search exceeds a configured cap."""


@dataclass(frozen=True)
class Limits:
    max_states: int = 4096
    max_statements: int = 65536
    max_worlds: int = 5
    # buttons and switches of a toy multiverse, each
    max_generators: int = 4
    # worlds * variables for exhaustive valuation search (2**bits valuations)
    max_valuation_bits: int = 20

    def require(self, what: str, value: int, cap: int) -> None:
        if value > cap:
            raise ResourceLimitError(f"{what} = {value} exceeds cap {cap}")


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def current_limits() -> Limits:
    return Limits(
        max_states=_env_int("MULTIVERSE_KIT_MAX_STATES", Limits.max_states),
        max_statements=_env_int("MULTIVERSE_KIT_MAX_STATEMENTS", Limits.max_statements),
        max_worlds=_env_int("MULTIVERSE_KIT_MAX_WORLDS", Limits.max_worlds),
        max_generators=_env_int("MULTIVERSE_KIT_MAX_GENERATORS", Limits.max_generators),
        max_valuation_bits=_env_int(
            "MULTIVERSE_KIT_MAX_VALUATION_BITS", Limits.max_valuation_bits
        ),
    )
