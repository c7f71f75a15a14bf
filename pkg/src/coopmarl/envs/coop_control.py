"""Synthetic cooperative control task over a discretized action grid.

K agents each pick one value from an evenly spaced grid on [-1, 1]. The
shared reward has a tracking term (match a hidden per-agent sinusoidal
target) and a ring-coupling term that rewards neighboring agents for
choosing values of the same sign, so per-agent greedy play is suboptimal
whenever the coupling weight is positive.

    r_t = (1/K) * sum_d (1 - |v_d - g_d(t)|) + coupling * (1/K) * sum_d v_d * v_{(d+1) mod K}
    g_d(t) = sin(omega * t + 2*pi*d / K)

Local observation for agent d is (sin(omega*t + 2*pi*d/K),
cos(omega*t + 2*pi*d/K), t/T); the global context is (sin(omega*t),
cos(omega*t), t/T, terminal_flag). The dynamics are deterministic: the only
randomness in an episode comes from the acting policy.
"""

from __future__ import annotations

import math

import numpy as np

from .base import (
    EnvSpec,
    JointObservation,
    StepResult,
    discretize_axis,
    resolve_params,
    terminal_observation,
    validate_action,
)

PARAM_DEFAULTS = {
    "omega": 0.1,      # target angular speed per step
    "coupling": 0.3,   # ring-coupling weight (0 disables coordination pressure)
}

LOCAL_WIDTH = 3
GLOBAL_WIDTH = 4  # sin, cos, t/T, terminal flag


def default_coop_spec(action_size: int = 5, agents: int = 6, horizon: int = 100,
                      discount: float = 0.99, **params) -> EnvSpec:
    """Spec for the standard configuration: 6 agents, shared grid size."""
    return EnvSpec(
        kind="coop_control",
        action_sizes=(int(action_size),) * int(agents),
        discount=discount,
        horizon=horizon,
        params=resolve_params(PARAM_DEFAULTS, params, "coop_control"),
    )


class CoopControl:
    """Deterministic K-agent tracking game with ring coupling."""

    def __init__(self, spec: EnvSpec):
        if spec.kind != "coop_control":
            raise ValueError(f"spec kind {spec.kind!r} is not coop_control")
        self.spec = spec
        p = resolve_params(PARAM_DEFAULTS, spec.params, "coop_control")
        self.omega = float(p["omega"])
        self.coupling = float(p["coupling"])
        if any(n < 2 for n in spec.action_sizes):
            raise ValueError("coop_control needs at least 2 grid points per agent")
        self.grids = [discretize_axis(n) for n in spec.action_sizes]
        self._t = 0
        self._done = True

    @property
    def agent_count(self) -> int:
        return self.spec.agent_count

    @property
    def global_width(self) -> int:
        return GLOBAL_WIDTH

    @property
    def local_widths(self) -> list[int]:
        return [LOCAL_WIDTH] * self.agent_count

    def terminal_observation(self) -> JointObservation:
        return terminal_observation(self.global_width, self.local_widths)

    def _phase(self, d: int, t: int) -> float:
        return self.omega * t + 2.0 * math.pi * d / self.agent_count

    def targets(self, t: int) -> np.ndarray:
        """Hidden per-agent target values at step t."""
        return np.array([math.sin(self._phase(d, t)) for d in range(self.agent_count)])

    def _observation(self, t: int) -> JointObservation:
        frac = t / self.spec.horizon
        g = np.array([math.sin(self.omega * t), math.cos(self.omega * t), frac, 0.0],
                     dtype=np.float32)
        locals_ = [
            np.array([math.sin(self._phase(d, t)), math.cos(self._phase(d, t)), frac],
                     dtype=np.float32)
            for d in range(self.agent_count)
        ]
        return JointObservation(g, locals_)

    def reset(self, seed: int | None = None) -> JointObservation:
        # seed accepted for interface symmetry; the dynamics are deterministic.
        del seed
        self._t = 0
        self._done = False
        return self._observation(0)

    def reward(self, t: int, action) -> float:
        """Shared reward for taking `action` at step t (pure function)."""
        act = validate_action(self.spec, action)
        values = np.array([self.grids[d][a] for d, a in enumerate(act)])
        targets = self.targets(t)
        tracking = float(np.mean(1.0 - np.abs(values - targets)))
        coupled = float(np.mean(values * np.roll(values, -1)))
        return tracking + self.coupling * coupled

    def step(self, action) -> StepResult:
        if self._done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        r = self.reward(self._t, action)
        self._t += 1
        self._done = self._t >= self.spec.horizon
        obs = self.terminal_observation() if self._done else self._observation(self._t)
        return StepResult(observation=obs, reward=r, terminal=self._done)
