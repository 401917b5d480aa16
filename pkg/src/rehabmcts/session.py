"""Adaptive spawn engine and the persisted session log.

A session log is JSON Lines: one ``session`` header record followed by one
``attempt`` record per spawned fruit. Keys are written in a fixed order and
floats in shortest round-trip form, so equal sessions serialise to equal
bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, is_dataclass

import numpy as np

from .kinematics import ArmSegments, ReachLimit
from .reward import AttemptOutcome, TimingConfig, normalized_reward
from .spawner import SpawnDecision, SpawnPolicyConfig, Workspace, choose_spawn_path
from .tree import SearchParams, Tree

LOG_FORMAT = "rehabmcts-session"
LOG_VERSION = 1

ATTEMPT_FIELDS = (
    "fruit_id", "path_bins", "target_mm", "spawn_time_ms", "ambiguity",
    "outcome", "elapsed_ms", "released_over_basket", "signed_reward", "delta",
)


@dataclass(frozen=True)
class EngineConfig:
    search: SearchParams = field(default_factory=SearchParams)
    spawn: SpawnPolicyConfig = field(default_factory=SpawnPolicyConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    segments: ArmSegments = field(default_factory=ArmSegments)
    propagation_k: float = 2.0

    def __post_init__(self):
        if len(self.search.bins) != 4:
            raise ValueError(f"the arm tree has four levels, got bins={self.search.bins}")
        if not self.propagation_k > 0:
            raise ValueError(f"propagation_k must be > 0, got {self.propagation_k}")
        self.spawn.reach_limit.validate(self.segments)

    def as_dict(self) -> dict:
        return _plain(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(obj):
    if is_dataclass(obj):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


class Engine:
    """One session's tree, workspace, RNG stream and clock."""

    def __init__(self, config: EngineConfig = EngineConfig(), seed: int | None = None):
        self.config = config
        self.seed = config.search.rng_seed if seed is None else seed
        self.rng = np.random.default_rng(self.seed)
        self.tree = Tree(config.search, k=config.propagation_k)
        self.workspace = Workspace(config.search.bins, config.segments, config.spawn.reach_limit)
        self.clock_ms = 0.0
        self._count = 0

    def spawn(self) -> SpawnDecision:
        self._count += 1
        return choose_spawn_path(self.tree, self.workspace, self.config.spawn, self.rng,
                                 fruit_id=f"f{self._count:05d}", spawn_time=self.clock_ms)

    def record(self, decision: SpawnDecision, outcome: AttemptOutcome) -> tuple[float, float]:
        """Score an attempt and back it up (vertically and into prospects)."""
        signed, delta = normalized_reward(outcome, self.config.timing)
        self.tree.update(self.tree.path_indices(decision.path_bins), delta, signed)
        self.clock_ms = decision.spawn_time + outcome.elapsed_ms
        return signed, delta


@dataclass
class AttemptRecord:
    fruit_id: str
    path_bins: tuple
    target_mm: tuple
    spawn_time_ms: float
    ambiguity: float
    outcome: str
    elapsed_ms: float
    released_over_basket: bool
    signed_reward: float
    delta: float

    @classmethod
    def build(cls, decision: SpawnDecision, outcome: AttemptOutcome, signed: float, delta: float):
        return cls(decision.fruit_id, tuple(decision.path_bins), tuple(decision.target_mm),
                   decision.spawn_time, decision.ambiguity, outcome.kind.value,
                   float(outcome.elapsed_ms), bool(outcome.released_over_basket), signed, delta)

    def to_json(self) -> str:
        row = {"record": "attempt"}
        for name in ATTEMPT_FIELDS:
            v = getattr(self, name)
            row[name] = list(v) if isinstance(v, tuple) else v
        return json.dumps(row)


@dataclass
class SessionLog:
    seed: int
    config_hash: str
    source: str = "simulation"
    started_ms: float = 0.0
    ended_ms: float = 0.0
    attempts: list[AttemptRecord] = field(default_factory=list)

    def append(self, rec: AttemptRecord) -> None:
        self.attempts.append(rec)
        self.ended_ms = rec.spawn_time_ms + rec.elapsed_ms

    def __len__(self):
        return len(self.attempts)

    def dumps(self) -> str:
        head = {"record": "session", "format": LOG_FORMAT, "version": LOG_VERSION,
                "seed": self.seed, "config_hash": self.config_hash, "source": self.source,
                "started_ms": self.started_ms, "ended_ms": self.ended_ms,
                "n_attempts": len(self.attempts)}
        return "\n".join([json.dumps(head)] + [a.to_json() for a in self.attempts]) + "\n"

    @classmethod
    def loads(cls, text: str) -> SessionLog:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("record") != "session" or rows[0].get("format") != LOG_FORMAT:
            raise ValueError("not a session log")
        h = rows[0]
        log = cls(h["seed"], h["config_hash"], h["source"], h["started_ms"], h["ended_ms"])
        for r in rows[1:]:
            if r.get("record") != "attempt":
                raise ValueError(f"unexpected record {r.get('record')!r}")
            log.attempts.append(AttemptRecord(**{
                k: tuple(r[k]) if k in ("path_bins", "target_mm") else r[k] for k in ATTEMPT_FIELDS
            }))
        if h["n_attempts"] != len(log.attempts):
            raise ValueError(f"header announces {h['n_attempts']} attempts, found {len(log.attempts)}")
        return log

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> SessionLog:
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


__all__ = ["AttemptRecord", "Engine", "EngineConfig", "SessionLog", "ReachLimit"]
