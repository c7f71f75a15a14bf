from .base import (
    CroComponents,
    EnvSpec,
    JointObservation,
    RewardWeights,
    StepResult,
    compose_reward,
    discounted_return,
    discretize_axis,
    joint_action_space_size,
    spec_hash,
    terminal_observation,
    validate_action,
)
from .coop_control import CoopControl, default_coop_spec
from .cro_sim import CroSim, default_cro_spec


def make_env(spec: EnvSpec):
    """Instantiate the environment named by a spec."""
    if spec.kind == "coop_control":
        return CoopControl(spec)
    if spec.kind == "cro_sim":
        return CroSim(spec)
    raise ValueError(f"unknown environment kind {spec.kind!r}")


__all__ = [
    "CoopControl",
    "CroComponents",
    "CroSim",
    "EnvSpec",
    "JointObservation",
    "RewardWeights",
    "StepResult",
    "compose_reward",
    "default_coop_spec",
    "default_cro_spec",
    "discounted_return",
    "discretize_axis",
    "joint_action_space_size",
    "make_env",
    "spec_hash",
    "terminal_observation",
    "validate_action",
]
