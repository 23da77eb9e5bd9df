"""Size caps shared by every exponential routine.

Defaults can be overridden with the ``SLICECOUNT_BUDGET`` environment
variable, either as a JSON object or as ``key=value`` pairs separated by
commas, e.g. ``SLICECOUNT_BUDGET="dtw_vertices=7,states=500000"``.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass


class BudgetError(RuntimeError):
    """Raised when an input exceeds a configured size cap."""

    def __init__(self, stage: str, size: int, cap: int, hint: str = "") -> None:
        msg = f"{stage}: size {size} exceeds cap {cap}"
        if hint:
            msg += f" ({hint})"
        super().__init__(msg)
        self.stage = stage
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class Budget:
    iso_vertices: int = 10
    path_vertices: int = 12
    dtw_vertices: int = 6
    alphabet: int = 200_000
    states: int = 2_000_000
    transitions: int = 2_000_000
    oracle_vertices: int = 8
    oracle_edges: int = 14
    oracle_slices: int = 6
    oracle_terms: int = 2_000_000

    def check(self, field: str, size: int, stage: str, hint: str = "") -> None:
        cap = getattr(self, field)
        if size > cap:
            raise BudgetError(stage, size, cap, hint)


def _parse(text: str) -> dict[str, int]:
    text = text.strip()
    if not text:
        return {}
    if text.startswith("{"):
        return {k: int(v) for k, v in json.loads(text).items()}
    out = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        out[key.strip()] = int(value)
    return out


def current() -> Budget:
    """Budget with environment overrides applied."""
    overrides = _parse(os.environ.get("SLICECOUNT_BUDGET", ""))
    known = {f.name for f in dataclasses.fields(Budget)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown budget keys: {sorted(unknown)}")
    return Budget(**overrides)
