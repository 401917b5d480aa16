"""Finite MDP policy evaluation and value iteration.

Used as an independent oracle for the tree search on small abstractions.
Rewards are per state-action, ``R(s, a)``. Transition tensors are dense
``(S, A, S)``; states with fewer actions mark the rest unavailable.

Text fixture format (``#`` starts a comment, blank lines ignored)::

    states 2
    actions 0 1          # state 0 has one action (index 0)
    actions 1 2
    transition 0 0 1 1.0 # s a s' probability
    transition 1 0 1 1.0
    transition 1 1 0 1.0
    reward 0 0 1.0       # s a value
    reward 1 1 0.5
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MDPError(ValueError):
    pass


@dataclass
class FiniteMDP:
    transition: np.ndarray  # (S, A, S)
    reward: np.ndarray  # (S, A)
    available: np.ndarray  # (S, A) bool

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.reward = np.asarray(self.reward, dtype=float)
        if self.available is None:
            self.available = np.ones(self.reward.shape, dtype=bool)
        self.available = np.asarray(self.available, dtype=bool)
        S, A = self.reward.shape
        if self.transition.shape != (S, A, S) or self.available.shape != (S, A):
            raise MDPError(f"inconsistent shapes {self.transition.shape}, {self.reward.shape}")
        if not self.available.any(axis=1).all():
            raise MDPError("every state needs at least one action")
        sums = self.transition.sum(axis=2)
        bad = self.available & (np.abs(sums - 1.0) > 1e-12)
        if bad.any():
            s, a = np.argwhere(bad)[0]
            raise MDPError(f"P({s},{a},.) sums to {sums[s, a]!r}, not 1")
        if (self.transition < 0).any():
            raise MDPError("negative transition probability")

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]


def _check_gamma(gamma: float, tol: float):
    if not 0.0 <= gamma < 1.0:
        raise MDPError(f"gamma must lie in [0, 1) for convergence, got {gamma}")
    if not tol > 0:
        raise MDPError(f"tol must be > 0, got {tol}")


def _check_policy(mdp: FiniteMDP, policy) -> np.ndarray:
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (mdp.n_states,):
        raise MDPError(f"policy needs one action per state, got shape {policy.shape}")
    if (policy < 0).any() or (policy >= mdp.n_actions).any():
        raise MDPError("policy action index out of range")
    if not mdp.available[np.arange(mdp.n_states), policy].all():
        raise MDPError("policy selects an unavailable action")
    return policy


def policy_evaluation(mdp: FiniteMDP, policy, gamma: float, tol: float = 1e-10,
                      max_iter: int = 1_000_000) -> np.ndarray:
    """Iterate ``V <- R_pi + gamma P_pi V`` until the max-norm change is below tol."""
    _check_gamma(gamma, tol)
    policy = _check_policy(mdp, policy)
    idx = np.arange(mdp.n_states)
    P = mdp.transition[idx, policy]
    R = mdp.reward[idx, policy]
    v = np.zeros(mdp.n_states)
    # stop when the Bellman residual bound gamma/(1-gamma)*|dv| drops under tol
    scale = gamma / (1.0 - gamma) if gamma > 0 else 0.0
    for _ in range(max_iter):
        nv = R + gamma * (P @ v)
        diff = np.max(np.abs(nv - v))
        v = nv
        if diff * max(scale, 1.0) < tol:
            return v
    raise MDPError("policy evaluation did not converge")


def q_values(mdp: FiniteMDP, v: np.ndarray, gamma: float) -> np.ndarray:
    q = mdp.reward + gamma * (mdp.transition @ v)
    return np.where(mdp.available, q, -np.inf)


def value_iteration(mdp: FiniteMDP, gamma: float, tol: float = 1e-10,
                    max_iter: int = 1_000_000, trace: list | None = None):
    """Return ``(V*, greedy policy)``.

    ``trace``, when given, collects the max-norm difference of successive
    iterates.
    """
    _check_gamma(gamma, tol)
    v = np.zeros(mdp.n_states)
    scale = gamma / (1.0 - gamma) if gamma > 0 else 0.0
    for _ in range(max_iter):
        nv = q_values(mdp, v, gamma).max(axis=1)
        diff = np.max(np.abs(nv - v))
        if trace is not None:
            trace.append(diff)
        v = nv
        if diff * max(scale, 1.0) < tol:
            break
    else:
        raise MDPError("value iteration did not converge")
    policy = q_values(mdp, v, gamma).argmax(axis=1)
    return v, policy


def solve_policy_linear(mdp: FiniteMDP, policy, gamma: float) -> np.ndarray:
    """Direct solve of ``(I - gamma P_pi) V = R_pi``."""
    policy = _check_policy(mdp, policy)
    idx = np.arange(mdp.n_states)
    P = mdp.transition[idx, policy]
    R = mdp.reward[idx, policy]
    return np.linalg.solve(np.eye(mdp.n_states) - gamma * P, R)


def random_mdp(rng: np.random.Generator, n_states: int = 5, n_actions: int = 3) -> FiniteMDP:
    P = rng.random((n_states, n_actions, n_states))
    P /= P.sum(axis=2, keepdims=True)
    # renormalised rows can drift from 1 by an ulp; push the residue into the largest entry
    resid = 1.0 - P.sum(axis=2)
    j = P.argmax(axis=2)
    np.put_along_axis(P, j[..., None], np.take_along_axis(P, j[..., None], 2) + resid[..., None], 2)
    R = rng.uniform(-1.0, 1.0, (n_states, n_actions))
    return FiniteMDP(P, R, np.ones((n_states, n_actions), dtype=bool))


def parse_mdp(text: str) -> FiniteMDP:
    n_states = None
    actions: dict[int, int] = {}
    trans: list[tuple[int, int, int, float]] = []
    rewards: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        try:
            kw, args = line[0], line[1:]
            if kw == "states" and len(args) == 1:
                n_states = int(args[0])
            elif kw == "actions" and len(args) == 2:
                actions[int(args[0])] = int(args[1])
            elif kw == "transition" and len(args) == 4:
                trans.append((int(args[0]), int(args[1]), int(args[2]), float(args[3])))
            elif kw == "reward" and len(args) == 3:
                rewards.append((int(args[0]), int(args[1]), float(args[2])))
            else:
                raise MDPError(f"unrecognised directive {raw.strip()!r}")
        except ValueError as exc:
            raise MDPError(f"line {lineno}: {exc}") from None
    if n_states is None or n_states < 1:
        raise MDPError("missing 'states' directive")
    n_actions = max(actions.values(), default=1)
    avail = np.zeros((n_states, n_actions), dtype=bool)
    for s in range(n_states):
        avail[s, :actions.get(s, 1)] = True
    P = np.zeros((n_states, n_actions, n_states))
    R = np.zeros((n_states, n_actions))
    for s, a, *rest in trans + rewards:
        if s < 0 or a < 0 or (len(rest) == 2 and rest[0] < 0):
            raise MDPError("negative state or action index")
    try:
        for s, a, s2, p in trans:
            P[s, a, s2] += p
        for s, a, r in rewards:
            R[s, a] = r
    except IndexError:
        raise MDPError("state or action index out of range") from None
    # unavailable actions: park them as self-loops so shapes stay dense
    for s, a in np.argwhere(~avail):
        P[s, a, s] = 1.0
    return FiniteMDP(P, R, avail)


def format_mdp(mdp: FiniteMDP) -> str:
    lines = [f"states {mdp.n_states}"]
    for s in range(mdp.n_states):
        lines.append(f"actions {s} {int(mdp.available[s].sum())}")
    for s, a, s2 in np.argwhere(mdp.transition > 0):
        if mdp.available[s, a]:
            lines.append(f"transition {s} {a} {s2} {float(mdp.transition[s, a, s2])!r}")
    for s, a in np.argwhere(mdp.available):
        lines.append(f"reward {s} {a} {float(mdp.reward[s, a])!r}")
    return "\n".join(lines) + "\n"
