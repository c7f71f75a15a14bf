"""Off-policy and rollout evaluation.

The IPS estimator works at the trajectory level: one record per episode,
weighted by the first impression's propensities (the product over agents of
the policy's probability for the logged action), with the episode's total
reward as the outcome:

    V_hat = (1/n) * sum_i [pi(a_i | x_i) / mu(a_i | x_i)] * r_i

Behavior propensities mu come from the trajectory log; target propensities
pi are recomputed from the evaluated policy's per-agent action
probabilities. Evaluating the logging policy itself therefore reproduces
the sample mean reward exactly. Confidence intervals are nonparametric
bootstrap percentiles.

Three reward variants mirror the usual high-variance mitigations: raw
("source") rewards, a symmetric log transform ("logged"), and a positive-
outcome indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .replay import Transition

PROPENSITY_FLOOR = 1e-6
BOOTSTRAP_RESAMPLES = 2000

REWARD_VARIANTS = ("source", "logged", "indicator")


def transform_reward(r: float, variant: str) -> float:
    """Apply a reward variant transform to a trajectory's total reward."""
    if variant == "source":
        return float(r)
    if variant == "logged":
        return math.copysign(math.log1p(abs(r)), r)
    if variant == "indicator":
        return 1.0 if r > 0 else 0.0
    raise ValueError(f"unknown reward variant {variant!r}; expected one of {REWARD_VARIANTS}")


@dataclass
class IpsResult:
    estimate: float
    ci_lower: float
    ci_upper: float
    variant: str
    n: int
    floor_warnings: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("IPS needs at least one trajectory")
        if not self.ci_lower <= self.estimate <= self.ci_upper:
            raise ValueError("confidence interval must contain the estimate")


@dataclass
class EpisodeRecord:
    """One IPS unit: first-impression weighting state plus the episode return."""

    obs: object
    action: tuple[int, ...]
    behavior_propensities: tuple[float, ...]
    total_reward: float
    policy_tag: str = ""


def group_episodes(transitions: list[Transition]) -> list[EpisodeRecord]:
    """Collapse transitions into per-episode records (keyed by episode id).

    The first impression (step_index 0) supplies the weighting observation,
    action, and behavior propensities; rewards are summed over the episode.
    """
    by_ep: dict[int, list[Transition]] = {}
    for t in transitions:
        by_ep.setdefault(t.episode_id, []).append(t)
    records = []
    for ep_id in sorted(by_ep):
        steps = sorted(by_ep[ep_id], key=lambda t: t.step_index)
        first = steps[0]
        if first.step_index != 0:
            raise ValueError(f"episode {ep_id} is missing its first impression")
        records.append(EpisodeRecord(
            obs=first.obs,
            action=first.action,
            behavior_propensities=first.propensities,
            total_reward=sum(t.reward for t in steps),
            policy_tag=first.policy_tag,
        ))
    return records


def exploration_filter(transitions: list[Transition], tag: str = "random") -> list[Transition]:
    """Keep only the exploration slice of a log (records with the given tag)."""
    return [t for t in transitions if t.policy_tag == tag]


@dataclass
class _FloorCounter:
    count: int = 0


def target_propensity(policy, obs, action, _counter: _FloorCounter | None = None) -> float:
    """Joint probability the policy assigns to a logged action in a state.

    The product of per-agent probabilities (agents act independently given
    their observations). Exact zeros are clamped to a 1e-6 floor so the
    contract stays in (0, 1]; clamps are counted when a counter is passed.
    """
    probs = policy.action_probabilities(obs)
    joint = 1.0
    for i, a in enumerate(action):
        joint *= float(probs[i][a])
    if joint <= 0.0:
        if _counter is not None:
            _counter.count += 1
        joint = PROPENSITY_FLOOR
    return min(joint, 1.0)


def ips_estimate(records: list[EpisodeRecord], policy, variant: str = "source",
                 resamples: int = BOOTSTRAP_RESAMPLES, seed: int = 0) -> IpsResult:
    """Trajectory-level IPS value of a policy on logged episode records."""
    if not records:
        raise ValueError("no trajectories to evaluate")
    if variant not in REWARD_VARIANTS:
        raise ValueError(f"unknown reward variant {variant!r}")
    counter = _FloorCounter()
    weighted = np.empty(len(records))
    for k, rec in enumerate(records):
        mu = 1.0
        for p in rec.behavior_propensities:
            if p <= 0.0:
                raise ValueError("logged behavior propensity must be > 0")
            mu *= float(p)
        mu = max(mu, PROPENSITY_FLOOR)
        pi = target_propensity(policy, rec.obs, rec.action, counter)
        weighted[k] = (pi / mu) * transform_reward(rec.total_reward, variant)
    estimate = float(weighted.mean())

    rng = np.random.default_rng(seed)
    n = len(weighted)
    means = np.empty(resamples)
    for b in range(resamples):
        means[b] = weighted[rng.integers(0, n, size=n)].mean()
    lo, hi = np.percentile(means, [2.5, 97.5])
    return IpsResult(
        estimate=estimate,
        ci_lower=float(min(lo, estimate)),
        ci_upper=float(max(hi, estimate)),
        variant=variant,
        n=n,
        floor_warnings=counter.count,
    )


@dataclass
class RolloutResult:
    mean_reward: float
    stderr: float
    episodes: int
    returns: list[float] = field(default_factory=list)


def rollout_eval(policy, env, episodes: int, seed: int = 0) -> RolloutResult:
    """Greedy (no-exploration) rollouts; mean undiscounted return and stderr."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        obs = env.reset(int(rng.integers(2 ** 31)))
        total, done = 0.0, False
        while not done:
            action, _ = policy.act_joint(obs, explore=False)
            result = env.step(action)
            total += result.reward
            obs = result.observation
            done = result.terminal
        returns.append(total)
    arr = np.array(returns)
    stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return RolloutResult(
        mean_reward=float(arr.mean()),
        stderr=stderr,
        episodes=episodes,
        returns=returns,
    )
