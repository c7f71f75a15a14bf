"""Transition storage, episode assembly, and the on-disk trajectory format.

An episode of K impressions becomes exactly K transitions: impression k
yields (s_k, a_k, r_k, s_{k+1}, 0) and the final impression yields
(s_K, a_K, r_K, s_terminal, 1), where s_terminal is the all-zero observation
with the terminal indicator set. The sum of transition rewards therefore
equals the session's total reward.

Trajectory file format (the contract between online logging, offline
training, and IPS evaluation): UTF-8 text, one JSON object per line.

  line 1        header: {"format": "coopmarl-trajectories", "version": 1,
                "env": <canonical EnvSpec dict>, "env_hash": str,
                "policy_tags": [str, ...]}
  lines 2..     one transition each:
                ep    episode id (int)
                step  step index within the episode (int, 0-based)
                tag   logging-policy tag (str)
                g     global context (list of float)
                o     per-agent local observations (list of list of float)
                a     joint action indices (list of int)
                r     shared reward (float)
                g2    next global context
                o2    next per-agent local observations
                t     terminal flag (0 or 1)
                mu    per-agent behavior propensities of the logged action

Floats are written with repr round-tripping, so load(save(x)) is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .envs.base import EnvSpec, JointObservation, spec_hash
from .errors import TrajectoryFormatError

TRAJECTORY_FORMAT = "coopmarl-trajectories"
TRAJECTORY_VERSION = 1

DEFAULT_CAPACITY = 100_000
DEFAULT_BATCH_SIZE = 128


@dataclass
class Transition:
    """One replay record: (x, a_1..a_N, r, x', terminal) plus logging metadata."""

    obs: JointObservation
    action: tuple[int, ...]
    reward: float
    next_obs: JointObservation
    terminal: int
    propensities: tuple[float, ...]
    episode_id: int = 0
    step_index: int = 0
    policy_tag: str = ""


@dataclass
class EpisodeLog:
    """Accumulates one episode's impressions before transition assembly."""

    episode_id: int
    policy_tag: str = ""
    observations: list[JointObservation] = field(default_factory=list)
    actions: list[tuple[int, ...]] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    propensities: list[tuple[float, ...]] = field(default_factory=list)

    def append(self, obs, action, reward, propensities):
        self.observations.append(obs)
        self.actions.append(tuple(int(a) for a in action))
        self.rewards.append(float(reward))
        self.propensities.append(tuple(float(p) for p in propensities))

    def __len__(self):
        return len(self.actions)


def assemble_episode(episode: EpisodeLog, terminal_obs: JointObservation) -> list[Transition]:
    """Turn an episode's impressions into its replay transitions.

    `terminal_obs` is the terminal-state encoding used as the final
    transition's next observation.
    """
    k = len(episode)
    if k == 0:
        raise ValueError("cannot assemble an empty episode")
    transitions = []
    for i in range(k):
        last = i == k - 1
        transitions.append(Transition(
            obs=episode.observations[i],
            action=episode.actions[i],
            reward=episode.rewards[i],
            next_obs=terminal_obs if last else episode.observations[i + 1],
            terminal=1 if last else 0,
            propensities=episode.propensities[i],
            episode_id=episode.episode_id,
            step_index=i,
            policy_tag=episode.policy_tag,
        ))
    return transitions


class ReplayBuffer:
    """Bounded FIFO transition store with uniform with-replacement sampling."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, seed: int = 0):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self._items: list[Transition] = []
        self._head = 0  # insertion point once full
        self._rng = np.random.default_rng(seed)

    def __len__(self):
        return len(self._items)

    def push(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._head] = transition
            self._head = (self._head + 1) % self.capacity

    def extend(self, transitions) -> None:
        for t in transitions:
            self.push(t)

    def contents(self) -> list[Transition]:
        """Current contents, oldest first."""
        return self._items[self._head:] + self._items[:self._head]

    def sample(self, batch_size: int) -> list[Transition]:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if len(self._items) < batch_size:
            raise ValueError(
                f"buffer holds {len(self._items)} transitions, fewer than batch {batch_size}"
            )
        idx = self._rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]


class TransitionBatch:
    """Column-major view of a list of transitions, ready for network input."""

    def __init__(self, transitions: list[Transition], action_sizes, dtype=np.float32):
        if not transitions:
            raise ValueError("empty batch")
        self.size = len(transitions)
        self.action_sizes = tuple(int(n) for n in action_sizes)
        n_agents = len(self.action_sizes)
        self.states = np.stack([t.obs.flat() for t in transitions]).astype(dtype)
        self.next_states = np.stack([t.next_obs.flat() for t in transitions]).astype(dtype)
        self.locals = [
            np.stack([t.obs.locals[i] for t in transitions]).astype(dtype)
            for i in range(n_agents)
        ]
        self.next_locals = [
            np.stack([t.next_obs.locals[i] for t in transitions]).astype(dtype)
            for i in range(n_agents)
        ]
        self.actions = np.array([t.action for t in transitions], dtype=np.int64)
        self.rewards = np.array([t.reward for t in transitions], dtype=dtype)
        self.terminals = np.array([t.terminal for t in transitions], dtype=dtype)
        self.dtype = dtype

    def actions_one_hot(self) -> np.ndarray:
        """(B, sum n_d) concatenated per-agent one-hot encodings."""
        parts = []
        for i, n in enumerate(self.action_sizes):
            one_hot = np.zeros((self.size, n), dtype=self.dtype)
            one_hot[np.arange(self.size), self.actions[:, i]] = 1.0
            parts.append(one_hot)
        return np.concatenate(parts, axis=1)

    def flat_actions(self) -> np.ndarray:
        """Joint action as a single mixed-radix index per row."""
        return np.ravel_multi_index(self.actions.T, self.action_sizes)


def _obs_to_lists(obs: JointObservation):
    return [float(v) for v in obs.global_context], [
        [float(v) for v in o] for o in obs.locals
    ]


def _obs_from_lists(g, o) -> JointObservation:
    return JointObservation(
        np.asarray(g, dtype=np.float32),
        [np.asarray(x, dtype=np.float32) for x in o],
    )


def save_trajectories(path, transitions: list[Transition], env_spec: EnvSpec) -> None:
    """Write transitions in the line-delimited format described above."""
    tags = sorted({t.policy_tag for t in transitions})
    header = {
        "format": TRAJECTORY_FORMAT,
        "version": TRAJECTORY_VERSION,
        "env": env_spec.to_dict(),
        "env_hash": spec_hash(env_spec),
        "policy_tags": tags,
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        for t in transitions:
            g, o = _obs_to_lists(t.obs)
            g2, o2 = _obs_to_lists(t.next_obs)
            record = {
                "ep": t.episode_id,
                "step": t.step_index,
                "tag": t.policy_tag,
                "g": g,
                "o": o,
                "a": list(t.action),
                "r": t.reward,
                "g2": g2,
                "o2": o2,
                "t": t.terminal,
                "mu": list(t.propensities),
            }
            f.write(json.dumps(record) + "\n")


REQUIRED_FIELDS = ("ep", "step", "tag", "g", "o", "a", "r", "g2", "o2", "t", "mu")


def load_trajectories(path) -> tuple[list[Transition], dict]:
    """Read a trajectory file; returns (transitions, header)."""
    with open(path, "r", encoding="utf-8") as f:
        header_line = f.readline()
        if not header_line.strip():
            raise TrajectoryFormatError(f"{path}: missing header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise TrajectoryFormatError(f"{path}: unreadable header: {e}") from e
        if header.get("format") != TRAJECTORY_FORMAT:
            raise TrajectoryFormatError(f"{path}: not a trajectory file")
        if header.get("version") != TRAJECTORY_VERSION:
            raise TrajectoryFormatError(
                f"{path}: unsupported version {header.get('version')!r} "
                f"(expected {TRAJECTORY_VERSION})"
            )
        transitions = []
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                for key in REQUIRED_FIELDS:
                    if key not in rec:
                        raise KeyError(key)
                transitions.append(Transition(
                    obs=_obs_from_lists(rec["g"], rec["o"]),
                    action=tuple(int(a) for a in rec["a"]),
                    reward=float(rec["r"]),
                    next_obs=_obs_from_lists(rec["g2"], rec["o2"]),
                    terminal=int(rec["t"]),
                    propensities=tuple(float(p) for p in rec["mu"]),
                    episode_id=int(rec["ep"]),
                    step_index=int(rec["step"]),
                    policy_tag=str(rec["tag"]),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise TrajectoryFormatError(
                    f"{path}: bad record at line {lineno} (transition "
                    f"{lineno - 1}): {e}"
                ) from e
    return transitions, header
