"""Acceptance criteria, each at its stated tolerance.

Every test appends one ``[PASS]``/``[FAIL]`` line that is printed in the
terminal summary, then asserts.
"""

import math
import random
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from rehabmcts import BACKEND
from rehabmcts.bandit import run_bandit
from rehabmcts.cli import main
from rehabmcts.ingest import (ParseError, format_myo_stream, format_skeleton_stream, parse_myo_stream,
                              parse_skeleton_stream)
from rehabmcts.kinematics import JOINT_LIMITS, JOINTS, angles_from_positions, fk_points
from rehabmcts.mdp import FiniteMDP, policy_evaluation, random_mdp, solve_policy_linear, value_iteration
from rehabmcts.player import PlayerModel, run_session
from rehabmcts.prospects import prospect_weight
from rehabmcts.session import EngineConfig
from rehabmcts.spawner import SpawnPolicyConfig, choose_spawn_path
from rehabmcts.tree import SearchParams, Tree

DATA = Path(__file__).parent / "data"


def report(n, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] AC{n} {title}: {detail}")
    assert ok, detail


def test_ac01_bandit_sanity():
    probs = np.linspace(0.1, 0.9, 10)
    t0 = time.perf_counter()
    results = [run_bandit(probs, 20_000, cp=math.sqrt(2.0), threshold=1, seed=s) for s in range(20)]
    elapsed = time.perf_counter() - t0
    fractions = [r.best_fraction for r in results]
    top = sum(int(np.argmax(r.pulls)) == 9 and (r.pulls == r.pulls.max()).sum() == 1 for r in results)
    med = float(np.median(fractions))
    ok = med >= 0.5 and top >= 18 and elapsed < 5.0
    report(1, "UCT bandit", ok, f"median best-arm fraction {med:.3f} (>=0.5), best arm top in {top}/20 (>=18), "
                                f"{elapsed:.2f} s (<5 s, {BACKEND} kernels)")


def test_ac02_greedy_degeneration():
    rng = np.random.default_rng(2)
    probs = rng.random(6)
    tree = Tree(SearchParams(cp=0.0, visit_threshold=1, bins=(6,)))
    draws = np.random.default_rng(3)
    for arm in range(6):  # visit every arm once
        idx = np.array([0, 1 + arm])
        tree.update(idx, float(draws.random() < probs[arm]))
    mismatches = 0
    for _ in range(1000):
        means = tree.q[1:7] / tree.n[1:7]
        argmax = set(np.flatnonzero(means == means.max()).tolist())
        path = tree.descend(rng.random(1), 0.0, 1)
        arm = int(path[1]) - 1
        mismatches += arm not in argmax
        tree.update(path, float(draws.random() < probs[arm]))
    report(2, "greedy degeneration", mismatches == 0, f"{mismatches} of 1000 cp=0 selections off the empirical argmax")


def _children_sums(tree):
    worst = math.inf
    for level in range(tree.depth):
        parents = tree.n[tree.offsets[level]:tree.offsets[level + 1]]
        kids = tree.n[tree.offsets[level + 1]:tree.offsets[level + 2]].reshape(len(parents), -1).sum(axis=1)
        worst = min(worst, int((parents - kids).min()))
    return worst


def test_ac03_backprop_conservation():
    total, bad_root, worst_gap = 0, 0, math.inf
    rng = np.random.default_rng(4)
    shapes = [(12, 8, 12, 6), (3, 3, 3, 3), (5, 2, 7, 4), (2, 2)]
    for trace in range(20):
        bins = shapes[trace % len(shapes)]
        cp = float(rng.choice([0.0, 0.5, math.sqrt(2.0), 3.0]))
        thr = int(rng.integers(0, 4))
        tree = Tree(SearchParams(cp=cp, visit_threshold=thr, bins=bins), k=float(rng.uniform(0.5, 4)))
        n_sims = int(rng.integers(300, 900))
        for _ in range(n_sims):
            path = tree.descend(rng.random(tree.depth), cp, thr)
            s = float(rng.uniform(-1, 1))
            tree.update(path, (s + 1) / 2, s)
        total += n_sims
        bad_root += int(tree.n[0]) != n_sims
        worst_gap = min(worst_gap, _children_sums(tree))
    ok = total >= 10_000 and bad_root == 0 and worst_gap >= 0
    report(3, "backprop conservation", ok, f"{total} simulations over 20 random traces, root mismatches {bad_root}, "
                                           f"min(n - sum children n) = {worst_gap}")


def test_ac04_prospect_kernel():
    tol = 1e-12
    problems = []
    for k in (0.5, 1.0, 2.0, 4.0):
        if abs(prospect_weight(0, k) - 1.0) > tol:
            problems.append(f"P0(k={k})")
        for x in range(0, 33):
            ref = 1.0 / (x * x + 1.0) ** k
            if abs(prospect_weight(x, k) - ref) > tol * ref:
                problems.append(f"value x={x} k={k}")
            if x < 32 and not prospect_weight(x + 1, k) < prospect_weight(x, k):
                problems.append(f"x-monotone x={x} k={k}")
    for x in range(1, 33):
        ws = [prospect_weight(x, k) for k in (0.5, 1.0, 2.0, 4.0)]
        if not all(b < a for a, b in zip(ws, ws[1:])):
            problems.append(f"k-monotone x={x}")
    report(4, "prospect kernel", not problems,
           "exhaustive x in [0,32], k in {0.5,1,2,4}: " + (", ".join(problems[:5]) or "all checks hold"))


def test_ac05_adaptive_migration():
    model = PlayerModel()
    center = np.asarray(model.comfort_center_mm)
    t0 = time.perf_counter()
    blocks = []
    for seed in range(20):
        log = run_session(EngineConfig(), model, 200, seed).log
        d = np.linalg.norm(np.array([a.target_mm for a in log.attempts]) - center, axis=1)
        blocks.append(d.reshape(4, 50).mean(axis=1))
    elapsed = time.perf_counter() - t0
    med = np.median(np.array(blocks), axis=0)
    monotone = bool(np.all(np.diff(med) >= 0))
    gain = med[-1] / med[0] - 1.0
    ok = monotone and gain >= 0.10 and elapsed < 30.0
    report(5, "adaptive migration", ok,
           "median block means " + " -> ".join(f"{v:.1f}" for v in med)
           + f" mm, final/first {1 + gain:.3f} (>=1.10), {elapsed:.1f} s (<30 s)")


def test_ac06_decision_budget():
    res = run_session(EngineConfig(), PlayerModel(), 200, seed=0)
    tree, ws = res.tree, res.engine.workspace
    rng = np.random.default_rng(6)
    cfg = SpawnPolicyConfig()
    times = []
    for _ in range(1000):
        t0 = time.perf_counter()
        choose_spawn_path(tree, ws, cfg, rng)
        times.append(time.perf_counter() - t0)
    p99 = float(np.percentile(times, 99)) * 1e3
    report(6, "decision budget", p99 <= 10.0,
           f"p99 {p99:.3f} ms over 1000 calls on {tree.n_leaves} leaves (<=10 ms, {BACKEND} kernels)")


def test_ac07_kinematics():
    rng = np.random.default_rng(7)
    n = 10_000
    ang = np.stack([rng.uniform(*JOINT_LIMITS[j], n) for j in JOINTS])
    p2, p3, p4 = fk_points(*ang)
    lens = [np.linalg.norm(p2, axis=1), np.linalg.norm(p3 - p2, axis=1), np.linalg.norm(p4 - p3, axis=1)]
    seg_err = max(float(np.max(np.abs(seg / ref - 1.0))) for seg, ref in zip(lens, (285.0, 260.0, 184.0)))
    worst, checked = 0.0, 0
    for i in range(n):
        if abs(ang[1, i]) > math.radians(89.0):
            continue
        r = angles_from_positions((0.0, 0.0, 0.0), p2[i], p3[i])
        worst = max(worst, max(abs(a - b) for a, b in zip(r.angles.as_tuple(), ang[:, i])))
        checked += 1
    ok = seg_err <= 1e-9 and worst < 1e-6
    report(7, "kinematics", ok, f"segment rel err {seg_err:.2e} (<=1e-9) on {n} poses; IK round trip max "
                                f"{worst:.2e} rad (<1e-6) on {checked} poses with |pitch|<=89 deg")


def test_ac08_mdp_oracle():
    chain_err = 0.0
    for gamma in (0.0, 0.5, 0.9, 0.99):
        for r in (-1.0, 0.25, 3.0):
            m = FiniteMDP(np.ones((1, 1, 1)), np.array([[r]]), None)
            v, _ = value_iteration(m, gamma, tol=1e-12)
            chain_err = max(chain_err, abs(v[0] - r / (1 - gamma)))
    rng = np.random.default_rng(8)
    lin_err, dominance = 0.0, 0
    for _ in range(100):
        m = random_mdp(rng)
        gamma = float(rng.uniform(0.0, 0.95))
        pi = rng.integers(0, m.n_actions, m.n_states)
        lin_err = max(lin_err, float(np.max(np.abs(policy_evaluation(m, pi, gamma) - solve_policy_linear(m, pi, gamma)))))
        v_star, _ = value_iteration(m, gamma)
        for pi in rng.integers(0, m.n_actions, (100, m.n_states)):
            dominance += bool(np.any(v_star < solve_policy_linear(m, pi, gamma) - 1e-9))
    ok = chain_err <= 1e-9 and lin_err <= 1e-8 and dominance == 0
    report(8, "MDP oracle", ok, f"chain err {chain_err:.1e} (<=1e-9), eval vs linear solve {lin_err:.1e} (<=1e-8), "
                                f"V*>=V_pi violations {dominance}/10000")


def _mutate(rnd, data: bytes) -> bytes:
    b = bytearray(data)
    for _ in range(rnd.randint(1, 4)):
        op = rnd.randrange(5)
        pos = rnd.randrange(len(b) + 1) if b else 0
        if op == 0 and b:
            b[min(pos, len(b) - 1)] = rnd.randrange(256)
        elif op == 1:
            b[pos:pos] = bytes(rnd.randrange(256) for _ in range(rnd.randint(1, 8)))
        elif op == 2 and b:
            del b[pos:pos + rnd.randint(1, 16)]
        elif op == 3:
            b[pos:pos] = rnd.choice([b"\n", b",", b'"', b"{", b"]", b"NaN", b"1e999", b"-", b"\x1f\x8b"])
        else:
            b = b[:pos]
    return bytes(b)


def test_ac09_parsers():
    skel_text = (DATA / "reach_seed11.jsonl").read_text()
    myo_text = (DATA / "myo_sample.csv").read_text()
    round_trip = (format_skeleton_stream(parse_skeleton_stream(skel_text)) == skel_text
                  and format_myo_stream(parse_myo_stream(myo_text)) == myo_text)

    skel_seed = "".join(skel_text.splitlines(keepends=True)[:2]).encode()
    myo_seed = "".join(myo_text.splitlines(keepends=True)[:6]).encode()
    rnd = random.Random(9)
    aborts, n_inputs = [], 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(100_000):
            parser = parse_skeleton_stream if i % 2 else parse_myo_stream
            seed = skel_seed if i % 2 else myo_seed
            data = (_mutate(rnd, seed) if i % 10 else bytes(rnd.randrange(256) for _ in range(rnd.randint(0, 64))))
            n_inputs += 1
            try:
                parser(data)
            except ParseError:
                pass
            except Exception as exc:  # noqa: BLE001 - anything else is an abort
                aborts.append(f"{type(exc).__name__}: {exc}"[:120])

    lines = skel_text.splitlines(keepends=True)
    myo_lines = myo_text.splitlines(keepends=True)
    corrupt = [
        (parse_skeleton_stream, lines[:4] + [lines[4][:50] + "\n"] + lines[5:8], 5),
        (parse_skeleton_stream, lines[:11] + [lines[11].replace('"HandTipRight"', '"Tail"')] + lines[12:14], 12),
        (parse_skeleton_stream, lines[:7] + [lines[3]] + lines[8:10], 8),
        (parse_myo_stream, myo_lines[:3] + [myo_lines[3].rsplit(",", 1)[0] + "\n"] + myo_lines[4:6], 4),
        (parse_myo_stream, myo_lines[:9] + [myo_lines[9].replace(",", ",x", 1)] + myo_lines[10:12], 10),
    ]
    wrong_lines = []
    for parser, text, want in corrupt:
        try:
            parser("".join(text))
            wrong_lines.append(f"no error (want line {want})")
        except ParseError as exc:
            if exc.line != want:
                wrong_lines.append(f"line {exc.line} != {want}")
    ok = round_trip and not aborts and n_inputs >= 100_000 and not wrong_lines
    report(9, "parsers", ok, f"round trip {'ok' if round_trip else 'BROKEN'}; {len(aborts)} aborts over {n_inputs} "
                             f"fuzzed inputs; {len(corrupt) - len(wrong_lines)}/{len(corrupt)} corrupt fixtures "
                             f"cite the right line" + (f"; first abort {aborts[0]}" if aborts else ""))


def test_ac10_determinism(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["simulate", "--seed", "7", "--sessions", "3", "--fruits", "200", "--out", str(out)])
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*")) if p.name.startswith(("session_", "tree_"))})
    capsys.readouterr()
    same = outs[0].keys() == outs[1].keys() and all(outs[0][k] == outs[1][k] for k in outs[0])
    report(10, "determinism", same and len(outs[0]) == 6,
           f"{len(outs[0])} session logs and tree snapshots byte-identical across two seed-7 runs: {same}")
