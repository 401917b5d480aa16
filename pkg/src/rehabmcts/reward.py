"""Attempt scoring: outcome class, time efficiency, normalised reward."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class OutcomeKind(str, Enum):
    SUCCESS = "success"  # collected and released over the basket
    UNSUCCESSFUL = "unsuccessful"  # collected, not placed
    FAIL = "fail"  # never reached


@dataclass(frozen=True)
class AttemptOutcome:
    kind: OutcomeKind
    elapsed_ms: float
    released_over_basket: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", OutcomeKind(self.kind))
        if not self.elapsed_ms >= 0:
            raise ValueError(f"elapsed_ms must be >= 0, got {self.elapsed_ms}")
        if self.kind is OutcomeKind.SUCCESS and not self.released_over_basket:
            raise ValueError("a successful attempt must be released over the basket")


@dataclass(frozen=True)
class TimingConfig:
    t_best_ms: float = 2000.0
    t_max_ms: float = 15000.0

    def __post_init__(self):
        if not 0 < self.t_best_ms < self.t_max_ms:
            raise ValueError(
                f"need 0 < t_best_ms < t_max_ms, got {self.t_best_ms}, {self.t_max_ms}"
            )


_SCORES = {OutcomeKind.SUCCESS: 1, OutcomeKind.UNSUCCESSFUL: 0, OutcomeKind.FAIL: -1}


def outcome_score(outcome: AttemptOutcome) -> int:
    return _SCORES[outcome.kind]


def time_efficiency(elapsed_ms: float, cfg: TimingConfig = TimingConfig()) -> float:
    """1 at or below the best time, 0 at or beyond the time limit, linear between."""
    if elapsed_ms < 0:
        raise ValueError(f"elapsed_ms must be >= 0, got {elapsed_ms}")
    e = (cfg.t_max_ms - elapsed_ms) / (cfg.t_max_ms - cfg.t_best_ms)
    return min(1.0, max(0.0, e))


def normalized_reward(outcome: AttemptOutcome, cfg: TimingConfig = TimingConfig()) -> tuple[float, float]:
    """Return ``(signed, delta)`` with signed in [-1, 1] and delta in [0, 1].

    Only the +1 branch is scaled by time efficiency; scaling the -1 branch
    would erase the failure penalty, since failures run to the time limit.
    """
    score = outcome_score(outcome)
    signed = score * time_efficiency(outcome.elapsed_ms, cfg) if score > 0 else float(score)
    return signed, (signed + 1.0) / 2.0
