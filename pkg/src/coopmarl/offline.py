"""Dataset generation from checkpoint policies and offline training loops.

The dataset recipe follows the standard expert/medium/random construction:
train a learner online while recording evaluation rewards and saving
checkpoints, pick the earliest checkpoints that reach given fractions of
the best recorded reward, then let each component policy act (with its own
exploration, never learning) for its episode quota. Components are tagged,
concatenated, and shuffled at the episode level into one trajectory file.

`train_offline` replays such a file through a learner with no environment
interaction; `mix_offline_cycle` alternates frozen daytime acting with
nightly training on the accumulated log.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .agents import RandomPolicy, load_agent
from .envs.base import EnvSpec, spec_hash
from .evaluation import rollout_eval
from .replay import (
    EpisodeLog,
    ReplayBuffer,
    Transition,
    TransitionBatch,
    assemble_episode,
    save_trajectories,
)


@dataclass
class CheckpointEntry:
    episode: int
    mean_reward: float
    path: str


@dataclass
class CheckpointRegistry:
    """Evaluation history of one training run, in recording order."""

    entries: list[CheckpointEntry] = field(default_factory=list)

    def add(self, episode: int, mean_reward: float, path: str) -> None:
        if self.entries and episode <= self.entries[-1].episode:
            raise ValueError("checkpoint episodes must be strictly increasing")
        self.entries.append(CheckpointEntry(int(episode), float(mean_reward), str(path)))

    @property
    def best_reward(self) -> float:
        if not self.entries:
            raise ValueError("registry is empty")
        return max(e.mean_reward for e in self.entries)

    def converged(self, patience: int = 50) -> bool:
        """True when the best reward has not improved for `patience` entries."""
        if len(self.entries) <= patience:
            return False
        rewards = [e.mean_reward for e in self.entries]
        best_before = max(rewards[:-patience])
        return all(r <= best_before for r in rewards[-patience:])

    def save(self, path) -> None:
        payload = {"entries": [vars(e) for e in self.entries]}
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)

    @classmethod
    def load(cls, path) -> "CheckpointRegistry":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        reg = cls()
        for e in payload["entries"]:
            reg.add(e["episode"], e["mean_reward"], e["path"])
        return reg


def select_checkpoint(registry: CheckpointRegistry, fraction: float) -> str:
    """Earliest checkpoint whose mean reward reaches fraction * best reward.

    The threshold is fraction * best on raw rewards (negative values
    included), so fraction 1.0 picks the first best-reward checkpoint.
    """
    if not registry.entries:
        raise ValueError("registry is empty")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    threshold = fraction * registry.best_reward
    for entry in registry.entries:
        if entry.mean_reward >= threshold:
            return entry.path
    raise ValueError(f"no checkpoint reaches {fraction:.0%} of the best reward")


@dataclass
class DatasetComponent:
    """One logging policy's share of a mixed dataset."""

    kind: str                  # "checkpoint" | "random" | "policy"
    episodes: int
    fraction: float | None = None  # checkpoint kinds: share of best reward
    tag: str = ""                  # defaults to a kind-derived tag
    policy: object = None          # kind == "policy": a ready policy object

    def __post_init__(self):
        if self.kind not in ("checkpoint", "random", "policy"):
            raise ValueError(f"unknown component kind {self.kind!r}")
        if self.episodes < 1:
            raise ValueError("component episode count must be >= 1")
        if self.kind == "checkpoint":
            if self.fraction is None or not 0.0 < self.fraction <= 1.0:
                raise ValueError("checkpoint components need fraction in (0, 1]")
        if not self.tag:
            if self.kind == "random":
                self.tag = "random"
            elif self.kind == "checkpoint":
                self.tag = f"checkpoint_{int(round(self.fraction * 100))}"
            else:
                self.tag = getattr(self.policy, "kind", "policy")


@dataclass
class DatasetSpec:
    components: list[DatasetComponent]

    def __post_init__(self):
        if not self.components:
            raise ValueError("dataset needs at least one component")


def paper_mixture(expert_episodes: int, medium_episodes: int,
                  random_episodes: int) -> DatasetSpec:
    """Equal-thirds style mixture: 100% / 30% checkpoints plus a random agent."""
    return DatasetSpec([
        DatasetComponent("checkpoint", expert_episodes, fraction=1.0, tag="expert"),
        DatasetComponent("checkpoint", medium_episodes, fraction=0.3, tag="medium"),
        DatasetComponent("random", random_episodes),
    ])


def _resolve_policy(component: DatasetComponent, env, registry, seed: int):
    if component.kind == "policy":
        if component.policy is None:
            raise ValueError("policy components need a policy object")
        return component.policy
    if component.kind == "random":
        return RandomPolicy(env.spec.action_sizes, seed=seed)
    if registry is None:
        raise ValueError("checkpoint components need a registry")
    path = select_checkpoint(registry, component.fraction)
    from .agents.base import read_agent_checkpoint

    meta, _ = read_agent_checkpoint(path)
    env_hash = meta.get("env_hash")
    if env_hash is not None and env_hash != spec_hash(env.spec):
        raise ValueError(
            f"checkpoint {path} was trained on a different environment "
            f"(hash {env_hash} vs {spec_hash(env.spec)})"
        )
    return load_agent(path)


def collect_episodes(policy, env, episodes: int, seed: int, start_episode_id: int,
                     tag: str) -> list[list[Transition]]:
    """Roll a policy with its own exploration on; returns per-episode transitions."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(episodes):
        log = EpisodeLog(start_episode_id + k, tag)
        obs = env.reset(int(rng.integers(2 ** 31)))
        done = False
        while not done:
            action, probs = policy.act_joint(obs, explore=True, rng=rng)
            result = env.step(action)
            log.append(obs, action, result.reward,
                       [probs[i][a] for i, a in enumerate(action)])
            obs = result.observation
            done = result.terminal
        out.append(assemble_episode(log, env.terminal_observation()))
    return out


def generate_dataset(spec: DatasetSpec, env, seed: int, out_path=None,
                     registry: CheckpointRegistry | None = None) -> list[Transition]:
    """Collect every component's quota, shuffle at the episode level, and
    (optionally) write the trajectory file."""
    seeds = np.random.SeedSequence(seed).spawn(len(spec.components) + 1)
    episodes: list[list[Transition]] = []
    next_id = 0
    for comp, comp_seed in zip(spec.components, seeds[:-1]):
        policy = _resolve_policy(comp, env, registry, int(comp_seed.generate_state(1)[0]))
        eps = collect_episodes(policy, env, comp.episodes,
                               int(comp_seed.generate_state(2)[1]), next_id, comp.tag)
        episodes.extend(eps)
        next_id += len(eps)
    shuffle_rng = np.random.default_rng(seeds[-1])
    order = shuffle_rng.permutation(len(episodes))
    transitions: list[Transition] = []
    for new_id, idx in enumerate(order):
        for t in episodes[idx]:
            t.episode_id = new_id
            transitions.append(t)
    if out_path is not None:
        save_trajectories(out_path, transitions, env.spec)
    return transitions


def dataset_counts_by_tag(transitions: list[Transition]) -> dict[str, int]:
    """Episode counts per policy tag (provenance bookkeeping)."""
    episodes: dict[tuple[str, int], bool] = {}
    for t in transitions:
        episodes[(t.policy_tag, t.episode_id)] = True
    counts: dict[str, int] = {}
    for tag, _ in episodes:
        counts[tag] = counts.get(tag, 0) + 1
    return counts


def policy_fingerprint(agent) -> str:
    """Hash of every parameter byte; constant iff the policy is unchanged."""
    h = hashlib.sha256()
    for name in sorted(agent._net_map()):
        for p in agent._net_map()[name].parameters():
            h.update(p.tobytes())
    return h.hexdigest()[:16]


def train_offline(agent, transitions: list[Transition], epochs: int, *,
                  batch_size: int = 128, seed: int = 0, eval_hook=None,
                  eval_every: int = 0) -> list[tuple[int, float]]:
    """Gradient updates from a fixed transition set; no environment stepping.

    Runs floor(len(transitions) / batch_size) updates per epoch with uniform
    sampling, syncing targets after each update. The eval hook (if any) is
    called every `eval_every` updates with the agent and returns the metric
    recorded on the learning curve.
    """
    if not transitions:
        raise ValueError("empty trajectory set")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    store = ReplayBuffer(capacity=max(len(transitions), 1), seed=seed)
    store.extend(transitions)
    sizes = _action_sizes_from(transitions)
    updates_per_epoch = max(len(transitions) // batch_size, 1)
    curve: list[tuple[int, float]] = []
    updates = 0
    for _ in range(epochs):
        for _ in range(updates_per_epoch):
            batch = TransitionBatch(store.sample(min(batch_size, len(store))), sizes)
            agent.update(batch)
            agent.sync_targets()
            updates += 1
            if eval_hook is not None and eval_every > 0 and updates % eval_every == 0:
                curve.append((updates, float(eval_hook(agent))))
    return curve


def _action_sizes_from(transitions: list[Transition]) -> tuple[int, ...]:
    n_agents = len(transitions[0].action)
    maxes = [0] * n_agents
    for t in transitions:
        for i, a in enumerate(t.action):
            maxes[i] = max(maxes[i], a + 1)
    return tuple(maxes)


@dataclass
class DayMetrics:
    day: int
    mean_return: float
    episodes: int
    acting_fingerprint: str


def mix_offline_cycle(agent, env, days: int, episodes_per_day: int, *,
                      batch_size: int = 128, updates_per_day: int | None = None,
                      seed: int = 0, buffer_capacity: int = 100_000,
                      policy_tag: str = "mix_offline") -> list[DayMetrics]:
    """Deploy-by-day loop: act frozen with exploration, then train nightly.

    Each day the current policy interacts (exploration on, no updates),
    its sessions join the accumulated log, and the nightly phase runs
    `updates_per_day` gradient steps (default: one pass over the day's new
    transitions) on the whole log.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    store = ReplayBuffer(capacity=buffer_capacity, seed=seed)
    sizes = env.spec.action_sizes
    metrics = []
    rng = np.random.default_rng(seed)
    episode_id = 0
    for day in range(days):
        fingerprint = policy_fingerprint(agent)
        day_returns = []
        day_transitions = 0
        for _ in range(episodes_per_day):
            log = EpisodeLog(episode_id, policy_tag)
            episode_id += 1
            obs = env.reset(int(rng.integers(2 ** 31)))
            total, done = 0.0, False
            while not done:
                action, probs = agent.act_joint(obs, explore=True, rng=rng)
                result = env.step(action)
                log.append(obs, action, result.reward,
                           [probs[i][a] for i, a in enumerate(action)])
                total += result.reward
                obs = result.observation
                done = result.terminal
            store.extend(assemble_episode(log, env.terminal_observation()))
            day_transitions += len(log)
            day_returns.append(total)
        if policy_fingerprint(agent) != fingerprint:
            raise RuntimeError("policy changed during the acting phase of a day")
        metrics.append(DayMetrics(
            day=day,
            mean_return=float(np.mean(day_returns)),
            episodes=episodes_per_day,
            acting_fingerprint=fingerprint,
        ))
        n_updates = updates_per_day
        if n_updates is None:
            n_updates = max(day_transitions // batch_size, 1)
        for _ in range(n_updates):
            batch = TransitionBatch(store.sample(min(batch_size, len(store))), sizes)
            agent.update(batch)
            agent.sync_targets()
    return metrics


def online_eval_hook(env_spec: EnvSpec, episodes: int = 20, seed: int = 0):
    """Eval hook returning greedy rollout reward on a fresh env instance."""
    from .envs import make_env

    def hook(agent) -> float:
        return rollout_eval(agent, make_env(env_spec), episodes, seed=seed).mean_reward

    return hook
