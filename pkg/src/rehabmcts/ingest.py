"""Recorded skeleton and armband streams: parsing, writing, replay.

Skeleton streams are JSON Lines, one frame per line::

    {"t_ms": 0.0, "joints": {"SpineBase": [x, y, z], ..., "ThumbRight": [x, y, z]}}

with exactly the 25 joints of ``JOINT_NAMES`` in that order, millimetres,
Y up. Armband streams are CSV with the fixed 18-column order of
``MYO_COLUMNS`` (time, accelerometer g, gyroscope deg/s, orientation
quaternion w-x-y-z, eight raw EMG channels); the header row is optional on
input and always written on output. Either file may be gzip-compressed.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
import statistics
import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (ArmSegments, DegenerateInputError, JointAngles, angles_from_positions,
                         fk_points)
from .reward import AttemptOutcome, OutcomeKind, TimingConfig
from .session import AttemptRecord, Engine, SessionLog

JOINT_NAMES = (
    "SpineBase", "SpineMid", "Neck", "Head",
    "ShoulderLeft", "ElbowLeft", "WristLeft", "HandLeft",
    "ShoulderRight", "ElbowRight", "WristRight", "HandRight",
    "HipLeft", "KneeLeft", "AnkleLeft", "FootLeft",
    "HipRight", "KneeRight", "AnkleRight", "FootRight",
    "SpineShoulder", "HandTipLeft", "ThumbLeft", "HandTipRight", "ThumbRight",
)
_JOINT_SET = frozenset(JOINT_NAMES)

MYO_COLUMNS = (
    "t_ms", "accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z",
    "quat_w", "quat_x", "quat_y", "quat_z",
    *(f"emg_{i}" for i in range(8)),
)
EMG_RATE_HZ = 200.0
IMU_RATE_HZ = 50.0
SKELETON_RATE_HZ = 60.0


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, field: str | None = None):
        self.line = line
        self.field = field
        where = f" at line {line}" if line else ""
        what = f" (field {field})" if field else ""
        super().__init__(f"{message}{where}{what}")


class ReplayError(ValueError):
    pass


class StreamRateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SkeletonFrame:
    t_ms: float
    joints: dict  # name -> (x, y, z) mm

    def point(self, name: str) -> np.ndarray:
        return np.asarray(self.joints[name], dtype=float)


@dataclass(frozen=True)
class MyoRecord:
    t_ms: float
    accel: tuple
    gyro: tuple
    orientation: tuple  # w, x, y, z
    emg: tuple


def _open_bytes(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(data)
        except (OSError, EOFError, zlib.error) as exc:
            raise ParseError(f"corrupt gzip stream: {exc}") from None
    return data


def _lines(data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    data = _open_bytes(bytes(data))
    for lineno, raw in enumerate(data.split(b"\n"), 1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("invalid UTF-8", lineno) from None
        if text.strip():
            yield lineno, text


def _finite(v, lineno, fld):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {type(v).__name__}", lineno, fld)
    v = float(v)
    if not math.isfinite(v):
        raise ParseError("non-finite number", lineno, fld)
    return v


def parse_skeleton_stream(data) -> list[SkeletonFrame]:
    frames: list[SkeletonFrame] = []
    last_t = -math.inf
    for lineno, text in _lines(data):
        try:
            row = json.loads(text)
        except (ValueError, RecursionError) as exc:
            raise ParseError(f"malformed JSON: {exc}", lineno) from None
        if not isinstance(row, dict):
            raise ParseError("frame must be an object", lineno)
        if set(row) != {"t_ms", "joints"}:
            raise ParseError(f"expected keys t_ms, joints; got {sorted(map(str, row))}", lineno)
        t = _finite(row["t_ms"], lineno, "t_ms")
        joints = row["joints"]
        if not isinstance(joints, dict):
            raise ParseError("joints must be an object", lineno, "joints")
        if len(joints) != len(JOINT_NAMES):
            raise ParseError(f"expected {len(JOINT_NAMES)} joints, got {len(joints)}", lineno, "joints")
        unknown = set(joints) - _JOINT_SET
        if unknown:
            raise ParseError(f"unknown joint {sorted(unknown)[0]!r}", lineno, "joints")
        pts = {}
        for name in JOINT_NAMES:
            p = joints[name]
            if not isinstance(p, list) or len(p) != 3:
                raise ParseError("joint needs three coordinates", lineno, name)
            pts[name] = tuple(_finite(c, lineno, name) for c in p)
        if not t > last_t:
            raise ParseError(f"timestamp {t} does not increase", lineno, "t_ms")
        last_t = t
        frames.append(SkeletonFrame(t, pts))
    return frames


def format_skeleton_stream(frames) -> str:
    out = []
    for f in frames:
        row = {"t_ms": float(f.t_ms),
               "joints": {n: [float(c) for c in f.joints[n]] for n in JOINT_NAMES}}
        out.append(json.dumps(row))
    return "".join(line + "\n" for line in out)


def parse_myo_stream(data, nominal_hz: float = EMG_RATE_HZ, quat_tol: float = 1e-3) -> list[MyoRecord]:
    records: list[MyoRecord] = []
    last_t = -math.inf
    for lineno, text in _lines(data):
        try:
            cells = next(csv.reader([text]))
        except csv.Error as exc:
            raise ParseError(f"malformed CSV: {exc}", lineno) from None
        cells = [c.strip() for c in cells]
        if lineno == 1 and tuple(cells) == MYO_COLUMNS:
            continue
        n = len(cells)
        if n != len(MYO_COLUMNS):
            if n >= 11:
                raise ParseError(f"expected 8 EMG channels, got {n - 11}", lineno, "emg")
            raise ParseError(f"expected {len(MYO_COLUMNS)} columns, got {n}", lineno)
        vals = []
        for name, cell in zip(MYO_COLUMNS[:11], cells[:11]):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell[:20]!r}", lineno, name) from None
            if not math.isfinite(v):
                raise ParseError("non-finite number", lineno, name)
            vals.append(v)
        emg = []
        for name, cell in zip(MYO_COLUMNS[11:], cells[11:]):
            try:
                emg.append(int(cell))
            except ValueError:
                raise ParseError(f"not an integer: {cell[:20]!r}", lineno, name) from None
        quat = tuple(vals[7:11])
        norm = math.sqrt(sum(c * c for c in quat))
        if abs(norm - 1.0) > quat_tol:
            raise ParseError(f"orientation quaternion norm {norm:.6f} is not 1", lineno, "quat")
        t = vals[0]
        if not t > last_t:
            raise ParseError(f"timestamp {t} does not increase", lineno, "t_ms")
        last_t = t
        records.append(MyoRecord(t, tuple(vals[1:4]), tuple(vals[4:7]), quat, tuple(emg)))
    check_rate([r.t_ms for r in records], nominal_hz)
    return records


def check_rate(times, nominal_hz: float, tolerance: float = 0.2) -> float | None:
    """Warn when the median sample gap is more than ``tolerance`` off nominal."""
    if len(times) < 2:
        return None
    gap = statistics.median(b - a for a, b in zip(times, times[1:]))
    expected = 1000.0 / nominal_hz
    if abs(gap - expected) > tolerance * expected:
        warnings.warn(
            f"median sample gap {gap:.3f} ms deviates from nominal {expected:.3f} ms "
            f"({nominal_hz:g} Hz)", StreamRateWarning, stacklevel=3)
    return gap


def format_myo_stream(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MYO_COLUMNS)
    for r in records:
        w.writerow([repr(float(v)) for v in (r.t_ms, *r.accel, *r.gyro, *r.orientation)]
                   + [str(int(e)) for e in r.emg])
    return buf.getvalue()


def read_stream(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


# -- replay -----------------------------------------------------------------

DEFAULT_BASKET_ANGLES = JointAngles.from_degrees(yaw=-45.0, pitch=45.0, roll=0.0, elbow=45.0)


def _default_basket():
    return tuple(float(v) for v in fk_points(*DEFAULT_BASKET_ANGLES.as_tuple())[2])


@dataclass(frozen=True)
class ReplayConfig:
    side: str = "right"
    grab_radius_mm: float = 50.0
    basket_mm: tuple = field(default_factory=_default_basket)  # shoulder frame
    basket_radius_mm: float = 100.0

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        if not self.grab_radius_mm > 0 or not self.basket_radius_mm > 0:
            raise ValueError("grab and basket radii must be > 0")

    @property
    def arm_joints(self) -> tuple[str, str, str, str]:
        s = self.side.capitalize()
        return (f"Shoulder{s}", f"Elbow{s}", f"Wrist{s}", f"HandTip{s}")


@dataclass
class ReplayResult:
    log: SessionLog
    report: list[dict]


def fingertip_track(frames, segs: ArmSegments, cfg: ReplayConfig) -> np.ndarray:
    """Model fingertip per frame (shoulder frame), NaN where the arm is degenerate.

    Joint angles are recovered from shoulder, elbow and wrist, then pushed
    back through the arm model so the track uses the configured segments.
    """
    sh, el, wr, _ = cfg.arm_joints
    out = np.full((len(frames), 3), np.nan)
    for i, f in enumerate(frames):
        try:
            p1 = f.point(sh)
            ik = angles_from_positions(p1, f.point(el), f.point(wr))
        except KeyError as exc:
            raise ReplayError(f"frame at t={f.t_ms} lacks joint {exc.args[0]}") from None
        except DegenerateInputError:
            continue
        out[i] = fk_points(*ik.angles.as_tuple(), segs=segs)[2]
    return out


def replay(frames, engine: Engine, timing: TimingConfig | None = None,
           cfg: ReplayConfig = ReplayConfig(), myo: list[MyoRecord] | None = None) -> ReplayResult:
    """Drive ``engine`` with a recording instead of a simulated player.

    Each fruit is spawned at the current frame. It is grabbed once the
    fingertip comes within the grab radius, and counts as placed when a
    grabbed fruit then enters the basket zone. Reaching the time limit first
    gives ``fail`` (never grabbed) or ``unsuccessful`` (grabbed, not placed).
    A fruit still pending when the recording ends is dropped.
    """
    timing = timing or engine.config.timing
    log = SessionLog(seed=engine.seed, config_hash=engine.config.digest(), source="replay")
    report: list[dict] = []
    if not frames:
        return ReplayResult(log, report)
    tips = fingertip_track(frames, engine.config.segments, cfg)
    sh, el, wr, ht = cfg.arm_joints
    basket = np.asarray(cfg.basket_mm, dtype=float)
    times = np.array([f.t_ms for f in frames])
    t0 = times[0]
    log.started_ms = 0.0
    myo_t = np.array([r.t_ms for r in myo]) if myo else None
    myo_emg = np.array([r.emg for r in myo], dtype=float) if myo else None

    i = 0
    while i < len(frames):
        spawn_t = times[i]
        engine.clock_ms = float(spawn_t - t0)
        decision = engine.spawn()
        target = np.asarray(decision.target_mm)
        grabbed = False
        outcome = None
        best_j, best_d = i, math.inf
        j = i
        while j < len(frames):
            elapsed = float(times[j] - spawn_t)
            tip = tips[j]
            if not np.isnan(tip[0]):
                d = float(np.linalg.norm(tip - target))
                if d < best_d:
                    best_d, best_j = d, j
                if not grabbed and d <= cfg.grab_radius_mm:
                    grabbed = True
                elif grabbed and np.linalg.norm(tip - basket) <= cfg.basket_radius_mm:
                    outcome = AttemptOutcome(OutcomeKind.SUCCESS, min(elapsed, timing.t_max_ms), True)
                    break
            if elapsed >= timing.t_max_ms:
                kind = OutcomeKind.UNSUCCESSFUL if grabbed else OutcomeKind.FAIL
                outcome = AttemptOutcome(kind, timing.t_max_ms)
                break
            j += 1
        if outcome is None:
            break
        signed, delta = engine.record(decision, outcome)
        log.append(AttemptRecord.build(decision, outcome, signed, delta))
        f = frames[best_j]
        p1, p2, p3, p4 = (f.point(n) for n in (sh, el, wr, ht))
        row = {
            "fruit_id": decision.fruit_id,
            "outcome": outcome.kind.value,
            "elapsed_ms": outcome.elapsed_ms,
            "score": signed,
            "closest_mm": best_d,
            "p1p2_mm": float(np.linalg.norm(p2 - p1)),
            "p2p3_mm": float(np.linalg.norm(p3 - p2)),
            "p3p4_mm": float(np.linalg.norm(p4 - p3)),
            "p1_fruit_mm": float(np.linalg.norm(target)),
        }
        if myo_t is not None:
            win = (myo_t >= spawn_t) & (myo_t <= times[j])
            row["emg_mean_abs"] = float(np.abs(myo_emg[win]).mean()) if win.any() else None
        report.append(row)
        i = j + 1
    return ReplayResult(log, report)


def synthesize_reach(target_angles: JointAngles, *, segs: ArmSegments = ArmSegments(),
                     start_angles: JointAngles = JointAngles(),
                     basket_angles: JointAngles | None = DEFAULT_BASKET_ANGLES,
                     reach_ms: float = 1500.0, carry_ms: float = 1000.0, hold_ms: float = 0.0,
                     rate_hz: float = SKELETON_RATE_HZ, t0: float = 0.0,
                     shoulder_mm=(180.0, 1350.0, 0.0), side: str = "right") -> list[SkeletonFrame]:
    """Skeleton frames for a straight joint-space reach, optionally carried to the basket.

    Intended for fixtures and demos: the arm moves linearly in joint space
    from ``start_angles`` to ``target_angles``, then to ``basket_angles``,
    then holds still for ``hold_ms``.
    """
    dt = 1000.0 / rate_hz
    a0, a1 = np.array(start_angles.as_tuple()), np.array(target_angles.as_tuple())
    keys = [(0.0, a0), (reach_ms, a1)]
    if basket_angles is not None:
        keys.append((reach_ms + carry_ms, np.array(basket_angles.as_tuple())))
    end = keys[-1][0] + hold_ms
    n = int(math.floor(end / dt + 1e-9)) + 1
    ts = np.arange(n) * dt
    kt = np.array([k[0] for k in keys])
    ka = np.array([k[1] for k in keys])
    ang = np.stack([np.interp(ts, kt, ka[:, c]) for c in range(4)], axis=1)
    p2, p3, p4 = fk_points(ang[:, 0], ang[:, 1], ang[:, 2], ang[:, 3], segs=segs)
    sh = np.asarray(shoulder_mm, dtype=float)
    s = side.capitalize()
    other = "Left" if s == "Right" else "Right"
    mirror = np.array([-1.0, 1.0, 1.0])
    body = {
        "SpineBase": (0.0, 900.0, 0.0), "SpineMid": (0.0, 1150.0, 0.0), "Neck": (0.0, 1450.0, 0.0),
        "Head": (0.0, 1600.0, 0.0), "SpineShoulder": (0.0, 1380.0, 0.0),
        "HipLeft": (-100.0, 880.0, 0.0), "KneeLeft": (-100.0, 480.0, 0.0),
        "AnkleLeft": (-100.0, 80.0, 0.0), "FootLeft": (-100.0, 20.0, 100.0),
        "HipRight": (100.0, 880.0, 0.0), "KneeRight": (100.0, 480.0, 0.0),
        "AnkleRight": (100.0, 80.0, 0.0), "FootRight": (100.0, 20.0, 100.0),
    }
    osh = sh * mirror
    idle = {
        f"Shoulder{other}": osh, f"Elbow{other}": osh + (0, -285.0, 0),
        f"Wrist{other}": osh + (0, -545.0, 0), f"Hand{other}": osh + (0, -600.0, 0),
        f"HandTip{other}": osh + (0, -729.0, 0), f"Thumb{other}": osh + (0, -620.0, 20.0),
    }
    frames = []
    for k, t in enumerate(ts):
        joints = {n: tuple(float(c) for c in v) for n, v in body.items()}
        joints.update({n: tuple(float(c) for c in v) for n, v in idle.items()})
        wrist, tip = sh + p3[k], sh + p4[k]
        joints[f"Shoulder{s}"] = tuple(float(c) for c in sh)
        joints[f"Elbow{s}"] = tuple(float(c) for c in sh + p2[k])
        joints[f"Wrist{s}"] = tuple(float(c) for c in wrist)
        joints[f"Hand{s}"] = tuple(float(c) for c in wrist + 0.4 * (tip - wrist))
        joints[f"HandTip{s}"] = tuple(float(c) for c in tip)
        joints[f"Thumb{s}"] = tuple(float(c) for c in wrist + 0.5 * (tip - wrist))
        frames.append(SkeletonFrame(float(t0 + t), {n: joints[n] for n in JOINT_NAMES}))
    return frames
