"""Simulated players for closed-loop runs.

A player has a comfort centre and a logistic competence field around it:
the chance of reaching a target falls off smoothly once the target is
farther than ``competence_radius_mm`` from the centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .reward import AttemptOutcome, OutcomeKind, TimingConfig
from .session import AttemptRecord, Engine, EngineConfig, SessionLog


@dataclass(frozen=True)
class PlayerModel:
    comfort_center_mm: tuple = (0.0, -600.0, 200.0)
    competence_radius_mm: float = 800.0
    steepness: float = 0.03  # per mm
    place_success_prob: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "comfort_center_mm", tuple(float(v) for v in self.comfort_center_mm))
        if len(self.comfort_center_mm) != 3:
            raise ValueError("comfort_center_mm needs three coordinates")
        if not self.competence_radius_mm > 0:
            raise ValueError(f"competence_radius_mm must be > 0, got {self.competence_radius_mm}")
        if not self.steepness > 0:
            raise ValueError(f"steepness must be > 0, got {self.steepness}")
        if not 0.0 <= self.place_success_prob <= 1.0:
            raise ValueError(f"place_success_prob must lie in [0, 1], got {self.place_success_prob}")

    def reach_probability(self, target_mm) -> float:
        d = math.dist(target_mm, self.comfort_center_mm)
        z = self.steepness * (self.competence_radius_mm - d)
        # numerically safe logistic
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)


def attempt(target_mm, model: PlayerModel, cfg: TimingConfig, rng: np.random.Generator,
            workspace_mm: float = 729.0) -> AttemptOutcome:
    """Simulate one reach.

    Always consumes three uniforms (reach, placement, timing) so that the
    draw sequence does not depend on the outcome.
    """
    u_reach, u_place, u_time = (float(u) for u in rng.random(3))
    if math.hypot(*target_mm) > workspace_mm + 1e-9:
        return AttemptOutcome(OutcomeKind.FAIL, cfg.t_max_ms)
    p = model.reach_probability(target_mm)
    if not u_reach < p:
        return AttemptOutcome(OutcomeKind.FAIL, cfg.t_max_ms)
    span = cfg.t_max_ms - cfg.t_best_ms
    elapsed = cfg.t_best_ms + span * (1.0 - p) * (0.5 + u_time)
    elapsed = min(cfg.t_max_ms, max(cfg.t_best_ms, elapsed))
    if u_place < model.place_success_prob:
        return AttemptOutcome(OutcomeKind.SUCCESS, elapsed, True)
    return AttemptOutcome(OutcomeKind.UNSUCCESSFUL, elapsed, False)


@dataclass
class SessionResult:
    log: SessionLog
    engine: Engine = field(repr=False)

    @property
    def tree(self):
        return self.engine.tree


def run_session(config: EngineConfig, model: PlayerModel, n_fruits: int, seed: int) -> SessionResult:
    """Spawn, attempt, score and back up ``n_fruits`` times.

    The engine and the player draw from independent streams spawned from
    ``seed``.
    """
    if n_fruits < 0:
        raise ValueError(f"n_fruits must be >= 0, got {n_fruits}")
    engine_ss, player_ss = np.random.SeedSequence(seed).spawn(2)
    engine = Engine(config, seed=seed)
    engine.rng = np.random.default_rng(engine_ss)
    player_rng = np.random.default_rng(player_ss)
    log = SessionLog(seed=seed, config_hash=config.digest())
    reach = config.segments.total_mm
    for _ in range(n_fruits):
        decision = engine.spawn()
        outcome = attempt(decision.target_mm, model, config.timing, player_rng, reach)
        signed, delta = engine.record(decision, outcome)
        log.append(AttemptRecord.build(decision, outcome, signed, delta))
    return SessionResult(log, engine)
