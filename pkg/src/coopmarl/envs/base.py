"""Shared data model for the cooperative Markov-game environments.

Both environments expose the same surface: `reset(seed) -> JointObservation`,
`step(action) -> StepResult`, plus static width metadata so learners can size
their networks. All agents receive one shared scalar reward per step.

Observation layout: a global context vector (whose last feature is a
terminal-state indicator, 0.0 during normal play) plus one local observation
vector per agent. The canonical terminal-state encoding is all zeros with the
indicator set to 1.0.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class JointObservation:
    """Global context plus per-agent local observations."""

    global_context: np.ndarray
    locals: list[np.ndarray]

    @property
    def agent_count(self) -> int:
        return len(self.locals)

    def flat(self) -> np.ndarray:
        """Concatenation (global, o_1, ..., o_N): the centralized state input."""
        return np.concatenate([self.global_context] + list(self.locals))

    def copy(self) -> "JointObservation":
        return JointObservation(self.global_context.copy(), [o.copy() for o in self.locals])


@dataclass
class CroComponents:
    """Raw (unweighted) reward breakdown for one CroSim step."""

    revenue: float = 0.0
    profit: float = 0.0
    long_term: float = 0.0
    clicks: float = 0.0
    abandonments: float = 0.0


@dataclass
class StepResult:
    observation: JointObservation
    reward: float
    terminal: bool
    components: CroComponents | None = None


@dataclass(frozen=True)
class RewardWeights:
    """Coefficients of the composite session reward.

    gamma_ab is the abandonment weight; it is named apart from the discount
    factor and must be non-positive.
    """

    alpha: float = 0.5
    beta: float = 0.1
    gamma_ab: float = -1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma_ab"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.gamma_ab > 0:
            raise ValueError(f"gamma_ab must be <= 0, got {self.gamma_ab}")


def compose_reward(components: CroComponents, weights: RewardWeights) -> float:
    """revenue + profit + alpha*long_term + beta*clicks + gamma_ab*abandonments."""
    return (
        components.revenue
        + components.profit
        + weights.alpha * components.long_term
        + weights.beta * components.clicks
        + weights.gamma_ab * components.abandonments
    )


@dataclass(frozen=True)
class EnvSpec:
    """Environment identity: kind, per-agent action catalogs, horizon, discount.

    `params` holds kind-specific knobs; unknown keys are rejected by the
    environment constructors (see each environment's PARAM_DEFAULTS).
    """

    kind: str
    action_sizes: tuple[int, ...]
    discount: float = 0.99
    horizon: int = 100
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("coop_control", "cro_sim"):
            raise ValueError(f"unknown environment kind {self.kind!r}")
        sizes = tuple(int(n) for n in self.action_sizes)
        object.__setattr__(self, "action_sizes", sizes)
        if len(sizes) < 1 or any(n < 1 for n in sizes):
            raise ValueError(f"action_sizes must be positive, got {sizes}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must be in [0, 1], got {self.discount}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")

    @property
    def agent_count(self) -> int:
        return len(self.action_sizes)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "action_sizes": list(self.action_sizes),
            "discount": self.discount,
            "horizon": self.horizon,
            "params": dict(sorted(self.params.items())),
        }


def spec_hash(spec: EnvSpec) -> str:
    """Short stable hash of the canonical spec dict (checkpoint/log compat key)."""
    canonical = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def joint_action_space_size(spec: EnvSpec) -> int:
    """Exact product of per-agent catalog sizes (Python big ints, no overflow)."""
    return math.prod(spec.action_sizes)


def discretize_axis(size: int) -> np.ndarray:
    """`size` evenly spaced action values spanning [-1, +1], endpoints included."""
    if size < 2:
        raise ValueError(f"axis discretization needs size >= 2, got {size}")
    return np.linspace(-1.0, 1.0, int(size))


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """sum_t gamma^t * r_t with exponents 0, 1, 2, ..."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    total = 0.0
    weight = 1.0
    for r in rewards:
        total += weight * float(r)
        weight *= gamma
    return total


def validate_action(spec: EnvSpec, action: Sequence[int]) -> tuple[int, ...]:
    """Check a joint action against the spec's catalogs; returns it as a tuple."""
    act = tuple(int(a) for a in action)
    if len(act) != spec.agent_count:
        raise ValueError(f"joint action has {len(act)} indices, expected {spec.agent_count}")
    for i, (a, n) in enumerate(zip(act, spec.action_sizes)):
        if not 0 <= a < n:
            raise ValueError(f"action index {a} out of range [0, {n}) for agent {i}")
    return act


def terminal_observation(global_width: int, local_widths: Sequence[int]) -> JointObservation:
    """All-zero observation with the terminal indicator (last global feature) set."""
    g = np.zeros(global_width, dtype=np.float32)
    g[-1] = 1.0
    return JointObservation(g, [np.zeros(w, dtype=np.float32) for w in local_widths])


def resolve_params(defaults: dict, overrides: dict, kind: str) -> dict:
    """Merge parameter overrides into defaults, rejecting unknown keys."""
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ValueError(f"unknown {kind} parameters: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(overrides)
    return merged
