"""Adaptive reach-target generation for upper-limb rehabilitation games.

A constant-depth Monte-Carlo tree over discretised shoulder/elbow angles
scores each reach attempt, spreads the result onto unexplored neighbouring
bins, and spawns the next target where the player's success is least
certain.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .kinematics import ArmPose, ArmSegments, JointAngles, ReachLimit, forward_kinematics
from .player import PlayerModel, run_session
from .reward import AttemptOutcome, OutcomeKind, TimingConfig, normalized_reward
from .session import Engine, EngineConfig, SessionLog
from .spawner import SpawnPolicyConfig, choose_spawn_path
from .tree import SearchParams, Tree, best_child, select_path, uct_value

__all__ = [
    "BACKEND", "ArmPose", "ArmSegments", "AttemptOutcome", "Engine", "EngineConfig", "JointAngles",
    "OutcomeKind", "PlayerModel", "ReachLimit", "SearchParams", "SessionLog", "SpawnPolicyConfig",
    "TimingConfig", "Tree", "best_child", "choose_spawn_path", "forward_kinematics",
    "normalized_reward", "run_session", "select_path", "uct_value",
]
