"""Arm kinematics for the four-joint reach model.

Frame: right-handed, Y up, shoulder (P1) at the origin, rest pose hangs
along -Y. Composition is yaw about world Y, pitch about the yawed X axis,
roll about the upper-arm axis (right-hand rule around shoulder->elbow),
then elbow flexion about the rolled local X axis, which swings the forearm
towards +Z at rest. The hand is a rigid extension of the forearm.

All lengths are millimetres, all angles radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

JOINTS = ("yaw", "pitch", "roll", "elbow")

JOINT_LIMITS: dict[str, tuple[float, float]] = {
    "yaw": (-math.pi / 2, math.pi / 2),
    "pitch": (-math.pi / 6, math.pi / 2),
    "roll": (-math.pi / 2, math.pi / 2),
    "elbow": (0.0, math.pi / 2),
}

# Below this angle from a singular configuration the IK roll/yaw split is
# reported as low confidence.
DEGENERACY_RAD = math.radians(1.0)
_LIMIT_SNAP = 1e-9


class KinematicsError(ValueError):
    pass


class ConstraintError(KinematicsError):
    """An angle lies outside its joint range."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class DegenerateInputError(KinematicsError):
    pass


@dataclass(frozen=True)
class JointAngles:
    yaw_rad: float = 0.0
    pitch_rad: float = 0.0
    roll_rad: float = 0.0
    elbow_rad: float = 0.0

    @classmethod
    def from_degrees(cls, yaw=0.0, pitch=0.0, roll=0.0, elbow=0.0) -> JointAngles:
        return cls(*(math.radians(a) for a in (yaw, pitch, roll, elbow)))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.yaw_rad, self.pitch_rad, self.roll_rad, self.elbow_rad)


@dataclass(frozen=True)
class ArmSegments:
    upper_mm: float = 285.0
    forearm_mm: float = 260.0
    hand_mm: float = 184.0

    def __post_init__(self):
        for name in ("upper_mm", "forearm_mm", "hand_mm"):
            if not getattr(self, name) > 0:
                raise KinematicsError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def total_mm(self) -> float:
        return self.upper_mm + self.forearm_mm + self.hand_mm


@dataclass(frozen=True)
class ReachLimit:
    """Maximum admissible shoulder-to-fingertip distance."""

    t_path_mm: float = 729.0

    def validate(self, segs: ArmSegments) -> None:
        if not 0 < self.t_path_mm <= segs.total_mm + 1e-9:
            raise KinematicsError(
                f"t_path_mm must lie in (0, {segs.total_mm}], got {self.t_path_mm}"
            )

    @classmethod
    def for_segments(cls, segs: ArmSegments) -> ReachLimit:
        return cls(segs.total_mm)


class ArmPose(NamedTuple):
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray

    def vectors(self) -> dict[str, float]:
        """Lengths of the shoulder/elbow/wrist/fingertip distance vectors."""
        return {
            "p1p2": float(np.linalg.norm(self.p2 - self.p1)),
            "p2p3": float(np.linalg.norm(self.p3 - self.p2)),
            "p3p4": float(np.linalg.norm(self.p4 - self.p3)),
            "p1p4": float(np.linalg.norm(self.p4 - self.p1)),
        }


@dataclass(frozen=True)
class Violation:
    joint: str
    value: float
    bound: float
    side: str  # "above" or "below"

    def __str__(self):
        rel = "exceeds" if self.side == "above" else "below"
        return f"{self.joint} {math.degrees(self.value):.3f} deg {rel} {math.degrees(self.bound):.3f} deg"


def check_constraints(angles: JointAngles) -> list[Violation]:
    out = []
    for joint, value in zip(JOINTS, angles.as_tuple()):
        lo, hi = JOINT_LIMITS[joint]
        if not value >= lo:  # also catches NaN
            out.append(Violation(joint, value, lo, "below"))
        elif value > hi:
            out.append(Violation(joint, value, hi, "above"))
    return out


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(c), np.zeros_like(c)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(c), np.zeros_like(c)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def _frames(yaw, pitch, roll, elbow):
    upper = _rot_y(yaw) @ _rot_x(pitch) @ _rot_y(-roll)
    fore = upper @ _rot_x(-elbow)
    return upper, fore


def fk_points(yaw, pitch, roll, elbow, segs: ArmSegments = ArmSegments()):
    """Vectorised forward kinematics without range checks.

    Accepts scalars or broadcastable arrays; returns (p2, p3, p4) arrays of
    shape (..., 3).
    """
    yaw, pitch, roll, elbow = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (yaw, pitch, roll, elbow))
    )
    upper, fore = _frames(yaw, pitch, roll, elbow)
    down = np.array([0.0, -1.0, 0.0])
    p2 = segs.upper_mm * (upper @ down)
    fdir = fore @ down
    p3 = p2 + segs.forearm_mm * fdir
    p4 = p3 + segs.hand_mm * fdir
    return p2, p3, p4


def forward_kinematics(angles: JointAngles, segs: ArmSegments = ArmSegments()) -> ArmPose:
    violations = check_constraints(angles)
    if violations:
        raise ConstraintError(violations)
    p2, p3, p4 = fk_points(*angles.as_tuple(), segs=segs)
    return ArmPose(np.zeros(3), p2, p3, p4)


def reach_distance(pose: ArmPose) -> float:
    return float(np.linalg.norm(pose.p4 - pose.p1))


@dataclass(frozen=True)
class IKResult:
    angles: JointAngles
    low_confidence_roll: bool


def angles_from_positions(p1, p2, p3) -> IKResult:
    """Recover joint angles from shoulder, elbow and wrist positions.

    The upper-arm direction fixes yaw and pitch; the forearm direction seen
    from the upper-arm frame fixes elbow flexion and roll. With the arm
    close to the yaw axis (pitch near 0) or nearly straight (elbow near 0)
    the yaw/roll split is ill-conditioned and ``low_confidence_roll`` is set.
    """
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    a, b = p2 - p1, p3 - p2
    la, lb = np.linalg.norm(a), np.linalg.norm(b)
    if not (la > 1e-9 and lb > 1e-9):
        raise DegenerateInputError("coincident joint positions")
    u, f = a / la, b / lb

    # u = (-sin(p) sin(yaw), -cos(p), -sin(p) cos(yaw))
    s = math.hypot(u[0], u[2])
    if s < 1e-15:
        yaw = 0.0
        sp = 0.0
    else:
        yaw = math.atan2(-u[0], -u[2])
        sp = s
        # keep yaw inside its range by flipping the sign of pitch
        if yaw > math.pi / 2 + 1e-12:
            yaw -= math.pi
            sp = -s
        elif yaw < -math.pi / 2 - 1e-12:
            yaw += math.pi
            sp = -s
    pitch = math.atan2(sp, -u[1])

    base = (_rot_y(yaw) @ _rot_x(pitch))
    fl = base.T @ f
    # fl = (-sin(e) sin(roll), -cos(e), sin(e) cos(roll))
    elbow = math.atan2(math.hypot(fl[0], fl[2]), -fl[1])
    if math.hypot(fl[0], fl[2]) < 1e-15:
        roll = 0.0
    else:
        roll = math.atan2(-fl[0], fl[2])
        if s < 1e-15:
            # only yaw - roll is observable; keep roll in range with the least yaw
            lo, hi = JOINT_LIMITS["roll"]
            clamped = min(hi, max(lo, roll))
            yaw, roll = yaw + clamped - roll, clamped
    low = abs(pitch) < DEGENERACY_RAD or elbow < DEGENERACY_RAD
    first = _snap((yaw, pitch, roll, elbow))
    if check_constraints(first):
        # the same pose is also reached by turning yaw and roll half a turn and negating pitch
        shift = -math.pi if yaw > 0 else math.pi
        roll2 = roll - shift if abs(roll - shift) <= math.pi else roll + shift
        second = _snap((yaw + shift, -pitch, roll2, elbow))
        if not check_constraints(second):
            return IKResult(second, low)
    return IKResult(first, low)


def _snap(values) -> JointAngles:
    # poses on a joint limit can come back a rounding error outside it
    out = []
    for joint, v in zip(JOINTS, values):
        lo, hi = JOINT_LIMITS[joint]
        if lo - _LIMIT_SNAP < v < lo:
            v = lo
        elif hi < v < hi + _LIMIT_SNAP:
            v = hi
        out.append(v)
    return JointAngles(*out)
