"""Run configuration: a flat dotted-key TOML file plus command-line overrides.

Recognised keys and defaults are listed in ``KEYS``. Example::

    search.cp = 1.4142
    search.bins = [12, 8, 12, 6]
    timing.t_max_ms = 15000
    player.comfort_center_mm = [0, -600, 200]
    run.sessions = 20

Precedence: command-line flag, then ``REHABMCTS_OUTPUT_DIR`` (output
directory only), then the file, then the defaults.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .ingest import ReplayConfig
from .kinematics import ArmSegments, ReachLimit
from .player import PlayerModel
from .reward import TimingConfig
from .session import EngineConfig
from .spawner import SpawnPolicyConfig
from .tree import SearchParams

OUTPUT_ENV = "REHABMCTS_OUTPUT_DIR"

_SEG, _PL = ArmSegments(), PlayerModel()

# key -> (type, default)
KEYS: dict[str, tuple[type, object]] = {
    "search.cp": (float, math.sqrt(2.0)),
    "search.visit_threshold": (int, 1),
    "search.bins": (list, [12, 8, 12, 6]),
    "prospects.k": (float, 2.0),
    "spawn.epsilon": (float, 0.1),
    "spawn.decision_budget_ms": (float, 10.0),
    "spawn.t_path_mm": (float, None),  # None: full arm length
    "timing.t_best_ms": (float, 2000.0),
    "timing.t_max_ms": (float, 15000.0),
    "arm.upper_mm": (float, _SEG.upper_mm),
    "arm.forearm_mm": (float, _SEG.forearm_mm),
    "arm.hand_mm": (float, _SEG.hand_mm),
    "player.comfort_center_mm": (list, list(_PL.comfort_center_mm)),
    "player.competence_radius_mm": (float, _PL.competence_radius_mm),
    "player.steepness": (float, _PL.steepness),
    "player.place_success_prob": (float, _PL.place_success_prob),
    "replay.side": (str, "right"),
    "replay.grab_radius_mm": (float, 50.0),
    "replay.basket_mm": (list, None),  # None: default basket pose
    "replay.basket_radius_mm": (float, 100.0),
    "run.seed": (int, 0),
    "run.sessions": (int, 1),
    "run.fruits": (int, 200),
    "run.block_size": (int, 50),
    "run.output_dir": (str, "rehab_out"),
}


class ConfigError(ValueError):
    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {m}" for k, m in problems))


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value):
    kind = KEYS[key][0]
    if value is None:
        return None
    if kind is list:
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split()]
        if not isinstance(value, (list, tuple)):
            raise ValueError("expected a list")
        return [float(v) if key != "search.bins" else int(v) for v in value]
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if kind is float:
        if isinstance(value, bool):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    return str(value)


def load_config_file(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return _flatten(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([(str(path), str(exc))]) from None


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError([(text, "override must look like key=value")])
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    engine: EngineConfig = field(default_factory=EngineConfig)
    player: PlayerModel = field(default_factory=PlayerModel)
    replay: ReplayConfig = field(default_factory=ReplayConfig)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def output_dir(self) -> str:
        return self.values["run.output_dir"]

    @classmethod
    def build(cls, file_values: dict | None = None, overrides: dict | None = None,
              env: dict | None = None) -> RunConfig:
        env = os.environ if env is None else env
        raw = {k: d for k, (_, d) in KEYS.items()}
        layers = [file_values or {}]
        if env.get(OUTPUT_ENV):
            layers.append({"run.output_dir": env[OUTPUT_ENV]})
        layers.append({k: v for k, v in (overrides or {}).items() if v is not None})
        problems = []
        for layer in layers:
            for k, v in layer.items():
                if k not in KEYS:
                    problems.append((k, "unknown key"))
                    continue
                try:
                    raw[k] = _coerce(k, v)
                except (TypeError, ValueError) as exc:
                    problems.append((k, str(exc)))
        if problems:
            raise ConfigError(problems)
        return cls._assemble(raw)

    @classmethod
    def _assemble(cls, v: dict) -> RunConfig:
        problems = []

        def make(section, fn):
            try:
                return fn()
            except (TypeError, ValueError) as exc:
                problems.append((section, str(exc)))

        search = make("search", lambda: SearchParams(cp=v["search.cp"], visit_threshold=v["search.visit_threshold"],
                                                     bins=tuple(v["search.bins"]), rng_seed=v["run.seed"]))
        segs = make("arm", lambda: ArmSegments(v["arm.upper_mm"], v["arm.forearm_mm"], v["arm.hand_mm"]))
        timing = make("timing", lambda: TimingConfig(v["timing.t_best_ms"], v["timing.t_max_ms"]))
        reach = None
        if segs is not None:
            t_path = v["spawn.t_path_mm"] if v["spawn.t_path_mm"] is not None else segs.total_mm
            reach = make("spawn.t_path_mm", lambda: (ReachLimit(t_path).validate(segs), ReachLimit(t_path))[1])
        spawn = make("spawn", lambda: SpawnPolicyConfig(v["spawn.epsilon"], v["spawn.decision_budget_ms"],
                                                        reach or ReachLimit()))
        player = make("player", lambda: PlayerModel(tuple(v["player.comfort_center_mm"]),
                                                    v["player.competence_radius_mm"], v["player.steepness"],
                                                    v["player.place_success_prob"]))
        rkw = {"side": v["replay.side"], "grab_radius_mm": v["replay.grab_radius_mm"],
               "basket_radius_mm": v["replay.basket_radius_mm"]}
        if v["replay.basket_mm"] is not None:
            if len(v["replay.basket_mm"]) != 3:
                problems.append(("replay.basket_mm", "needs three coordinates"))
            rkw["basket_mm"] = tuple(v["replay.basket_mm"])
        replay = make("replay", lambda: ReplayConfig(**rkw))
        for key in ("run.sessions", "run.fruits"):
            if v[key] < 0:
                problems.append((key, "must be >= 0"))
        if v["run.block_size"] < 1:
            problems.append(("run.block_size", "must be >= 1"))
        if v["run.seed"] < 0:
            problems.append(("run.seed", "must be >= 0"))
        engine = None
        if not problems:
            engine = make("engine", lambda: EngineConfig(search, spawn, timing, segs, v["prospects.k"]))
        if problems:
            raise ConfigError(problems)
        return cls(v, engine, player, replay)
