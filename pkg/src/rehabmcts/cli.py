"""Command-line entry point: ``rehabmcts {simulate,replay,bandit-eval,export,fk}``."""

from __future__ import annotations

import argparse
import csv
import glob
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bandit import run_bandit
from .config import ConfigError, RunConfig, load_config_file, parse_override
from .ingest import ParseError, ReplayError, parse_myo_stream, parse_skeleton_stream, read_stream, replay
from .kinematics import JointAngles, KinematicsError, check_constraints, forward_kinematics, reach_distance
from .player import run_session
from .session import Engine, SessionLog


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _config(args, **flags) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = dict(parse_override(s) for s in (args.set or []))
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig.build(file_values, overrides)


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def _write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _print_table(rows: list[dict], stream=None) -> None:
    stream = stream or sys.stdout
    if not rows:
        print("(no rows)", file=stream)
        return
    cols = list(rows[0])

    def fmt(v):
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.4g}"
        return str(v)

    cells = [[fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)), file=stream)
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)), file=stream)


def _one_session(job):
    engine_cfg, player, fruits, seed = job
    res = run_session(engine_cfg, player, fruits, seed)
    return res.log.dumps(), res.tree.snapshot()


def block_summary(logs: list[SessionLog], center, block_size: int) -> list[dict]:
    """Per-block spawn distance from the comfort centre, success rate and ambiguity."""
    center = np.asarray(center, dtype=float)
    n = max((len(lg) for lg in logs), default=0)
    rows = []
    for b, start in enumerate(range(0, n, block_size)):
        recs = [a for lg in logs for a in lg.attempts[start:start + block_size]]
        d = [float(np.linalg.norm(np.asarray(a.target_mm) - center)) for a in recs]
        rows.append({
            "block": b,
            "attempts": len(recs),
            "mean_distance_mm": float(np.mean(d)),
            "success_rate": float(np.mean([a.outcome == "success" for a in recs])),
            "mean_ambiguity": float(np.mean([a.ambiguity for a in recs])),
        })
    return rows


def cmd_simulate(args) -> int:
    cfg = _config(args, **{"run.seed": args.seed, "run.sessions": args.sessions,
                           "run.fruits": args.fruits, "run.output_dir": args.out})
    sessions, seed = cfg["run.sessions"], cfg["run.seed"]
    jobs = [(cfg.engine, cfg.player, cfg["run.fruits"], seed + i) for i in range(sessions)]
    if args.jobs > 1 and sessions > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_one_session, jobs))
    else:
        results = [_one_session(j) for j in jobs]
    logs = []
    for i, (log_text, snap) in enumerate(results):
        with open(_out_path(cfg, f"session_{i:03d}.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(log_text)
        with open(_out_path(cfg, f"tree_{i:03d}.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(snap)
        logs.append(SessionLog.loads(log_text))
    with open(_out_path(cfg, "run_config.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg.values, fh, indent=2, sort_keys=True)
        fh.write("\n")
    rows = block_summary(logs, cfg.player.comfort_center_mm, cfg["run.block_size"])
    _write_csv(_out_path(cfg, "summary.csv"), rows)
    print(f"{sessions} session(s) x {cfg['run.fruits']} fruits -> {cfg.output_dir}")
    _print_table(rows)
    return 0


def cmd_replay(args) -> int:
    cfg = _config(args, **{"run.seed": args.seed, "run.output_dir": args.out})
    frames = parse_skeleton_stream(read_stream(args.skeleton))
    myo = parse_myo_stream(read_stream(args.myo)) if args.myo else None
    engine = Engine(cfg.engine, seed=cfg["run.seed"])
    result = replay(frames, engine, cfg.engine.timing, cfg.replay, myo)
    result.log.save(_out_path(cfg, "replay_session.jsonl"))
    engine.tree.save(_out_path(cfg, "replay_tree.txt"))
    _write_csv(_out_path(cfg, "replay_report.csv"), result.report)
    print(f"replayed {len(frames)} frames: {len(result.log)} attempt(s) -> {cfg.output_dir}")
    _print_table(result.report)
    return 0


def cmd_bandit(args) -> int:
    try:
        probs = [float(p) for p in args.arms.split(",") if p.strip()]
    except ValueError:
        raise ConfigError([("--arms", f"not a comma-separated list of numbers: {args.arms!r}")]) from None
    if len(probs) < 2:
        raise ConfigError([("--arms", "need at least two arms")])
    if args.iterations < 0:
        raise ConfigError([("--iterations", "must be >= 0")])
    if not args.cp >= 0:
        raise ConfigError([("--cp", "must be >= 0")])
    try:
        res = run_bandit(probs, args.iterations, cp=args.cp, threshold=args.threshold, seed=args.seed)
    except ValueError as exc:
        raise ConfigError([("--arms", str(exc))]) from None
    rows = [{"arm": i, "p": p, "pulls": int(res.pulls[i]), "mean": float(res.means[i])}
            for i, p in enumerate(probs)]
    _print_table(rows)
    print(f"best arm {res.best_arm}: {res.best_fraction:.4f} of pulls")
    return 0


EXPORT_FIELDS = ("session", "seed", "index", "fruit_id", "yaw_bin", "pitch_bin", "roll_bin",
                 "elbow_bin", "target_x_mm", "target_y_mm", "target_z_mm", "spawn_time_ms",
                 "ambiguity", "outcome", "elapsed_ms", "released_over_basket", "signed_reward", "delta")


def cmd_export(args) -> int:
    paths = []
    for p in args.logs:
        paths.extend(sorted(glob.glob(os.path.join(p, "*.jsonl"))) if os.path.isdir(p) else [p])
    if not paths:
        raise FileNotFoundError("no session logs found")
    rows = []
    for path in paths:
        lg = SessionLog.load(path)
        name = os.path.splitext(os.path.basename(path))[0]
        for i, a in enumerate(lg.attempts):
            rows.append(dict(zip(EXPORT_FIELDS, (
                name, lg.seed, i, a.fruit_id, *a.path_bins, *a.target_mm, a.spawn_time_ms,
                a.ambiguity, a.outcome, a.elapsed_ms, a.released_over_basket, a.signed_reward, a.delta))))
    out = args.output
    if os.path.dirname(out):
        os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=EXPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{len(rows)} attempt(s) from {len(paths)} log(s) -> {out}")
    return 0


def cmd_fk(args) -> int:
    vals = (args.yaw, args.pitch, args.roll, args.elbow)
    angles = JointAngles.from_degrees(*vals) if args.degrees else JointAngles(*vals)
    bad = check_constraints(angles)
    if bad:
        raise KinematicsError("; ".join(map(str, bad)))
    pose = forward_kinematics(angles)
    print(json.dumps({
        "p1": pose.p1.tolist(), "p2": pose.p2.tolist(), "p3": pose.p3.tolist(), "p4": pose.p4.tolist(),
        "reach_mm": reach_distance(pose), **pose.vectors(),
    }, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rehabmcts", description="Adaptive reach-target generation: simulation, replay and diagnostics.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="TOML file with flat dotted keys")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", help="output directory (also $REHABMCTS_OUTPUT_DIR)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="run closed-loop sessions against the simulated player")
    with_config(p)
    p.add_argument("--sessions", type=int)
    p.add_argument("--fruits", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="replay a recorded skeleton stream through the engine")
    p.add_argument("skeleton")
    p.add_argument("--myo", help="optional armband CSV recorded alongside")
    with_config(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bandit-eval", help="UCT on a depth-one tree with Bernoulli arms")
    p.add_argument("--arms", required=True, help="comma-separated success probabilities")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--cp", type=float, default=math.sqrt(2.0))
    p.add_argument("--threshold", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bandit)

    p = sub.add_parser("export", help="flatten session logs into one CSV table")
    p.add_argument("logs", nargs="+", help="log files or directories of *.jsonl")
    p.add_argument("-o", "--output", default="attempts.csv")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("fk", help="forward kinematics for one set of joint angles")
    for j in ("yaw", "pitch", "roll", "elbow"):
        p.add_argument(f"--{j}", type=float, default=0.0)
    p.add_argument("--degrees", action="store_true", help="angles are in degrees")
    p.set_defaults(func=cmd_fk)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for key, msg in exc.problems:
            _err(f"{key}: {msg}")
        return 2
    except ParseError as exc:
        _err(str(exc))
        return 3
    except (OSError, ReplayError, KinematicsError, ValueError) as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
