"""The four augmentation paths and per-query additive scores."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple


class Path(str, Enum):
    """Augmentation path a query can be routed to."""

    DB = "DB"
    Doc = "Doc"
    Hybrid = "Hybrid"
    LLM = "LLM"

    def __str__(self):
        return self.value


# Cheapest precise path first, then broader/costlier paths.
DEFAULT_PRIORITY: tuple[Path, ...] = (Path.DB, Path.Doc, Path.Hybrid, Path.LLM)


class FiredRule(NamedTuple):
    rule_id: str
    target_path: Path
    delta: int


@dataclass(frozen=True)
class PathScores:
    """Additive scores for all four paths plus firing provenance."""

    scores: Mapping[Path, int]
    fired_rules: tuple[FiredRule, ...] = field(default_factory=tuple)

    def __post_init__(self):
        missing = [p for p in Path if p not in self.scores]
        if missing:
            raise ValueError(f"scores missing paths: {missing}")
        object.__setattr__(self, "scores", dict(self.scores))
        object.__setattr__(self, "fired_rules", tuple(self.fired_rules))

    def __getitem__(self, path: Path) -> int:
        return self.scores[path]

    @classmethod
    def zero(cls) -> "PathScores":
        return cls(scores={p: 0 for p in Path})


def validate_priority(order: Iterable[Path]) -> tuple[Path, ...]:
    """Check that ``order`` is a permutation of the four paths."""
    order = tuple(Path(p) for p in order)
    if sorted(order, key=lambda p: p.value) != sorted(Path, key=lambda p: p.value):
        raise ValueError(f"not a permutation of paths: {order}")
    return order


def select_path(scores: PathScores, priority_order: Iterable[Path]) -> Path:
    """Argmax over path scores; ties resolve to the earliest path in priority."""
    order = validate_priority(priority_order)
    best = max(scores.scores.values())
    for p in order:
        if scores[p] == best:
            return p
    raise AssertionError("unreachable: priority covers all paths")
