"""Shared machinery for the policy learners.

Every policy exposes the same execution surface:

  act_joint(obs, explore, rng=None) -> (joint_action, per_agent_probs)
  action_probabilities(obs) -> list of per-agent probability vectors
  greedy_joint(obs) -> joint_action

where per_agent_probs[i][a] is the probability the policy assigns to agent
i taking action a in that state. These probabilities are logged as behavior
propensities and recomputed as target propensities for off-policy
evaluation, so act_joint must return exactly the distribution it samples
from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..nets import Adam, DenseNet

AGENT_CHECKPOINT_VERSION = 1


def epsilon_at(steps: int, floor: float = 0.01, span: float = 0.99,
               decay: float = 1e5) -> float:
    """Exponentially decayed exploration rate: floor + span * exp(-steps/decay)."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    return floor + span * math.exp(-steps / decay)


@dataclass(frozen=True)
class EpsilonSchedule:
    floor: float = 0.01
    span: float = 0.99
    decay: float = 1e5

    def value(self, steps: int) -> float:
        return epsilon_at(steps, self.floor, self.span, self.decay)

    def to_dict(self) -> dict:
        return {"floor": self.floor, "span": self.span, "decay": self.decay}


def eps_greedy_probs(n: int, greedy_index: int, eps: float) -> np.ndarray:
    """Per-action probabilities of an epsilon-greedy choice over n actions."""
    p = np.full(n, eps / n, dtype=np.float64)
    p[greedy_index] += 1.0 - eps
    return p


def apply_probability_floor(probs: np.ndarray, indices, floor: float) -> np.ndarray:
    """Raise the listed entries to at least `floor`, renormalizing the rest.

    Used to guarantee new or unrecognized actions a fixed exploration mass.
    """
    idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=int)
    if idx.size == 0:
        return probs
    if floor * idx.size >= 1.0:
        raise ValueError(f"floor {floor} over {idx.size} actions exceeds total mass")
    p = np.asarray(probs, dtype=np.float64).copy()
    mask = np.zeros(p.size, dtype=bool)
    mask[idx] = True
    p[mask] = np.maximum(p[mask], floor)
    lifted = p[mask].sum()
    rest = p[~mask].sum()
    if rest > 0:
        p[~mask] *= (1.0 - lifted) / rest
    elif lifted > 0:
        p[mask] /= lifted
    return p


def _pack_net(arrays: dict, prefix: str, net: DenseNet) -> None:
    arrays[f"{prefix}.dims"] = np.array(net.layer_dims, dtype=np.int64)
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"{prefix}.w{l}"] = w
        arrays[f"{prefix}.b{l}"] = b


def _unpack_net(data, prefix: str) -> DenseNet:
    dims = [int(d) for d in data[f"{prefix}.dims"]]
    net = object.__new__(DenseNet)
    net.layer_dims = dims
    net.weights = [np.array(data[f"{prefix}.w{l}"]) for l in range(len(dims) - 1)]
    net.biases = [np.array(data[f"{prefix}.b{l}"]) for l in range(len(dims) - 1)]
    net.dtype = net.weights[0].dtype
    return net


def _pack_adam(arrays: dict, prefix: str, opt: Adam) -> None:
    arrays[f"{prefix}.t"] = np.array(opt.step_count, dtype=np.int64)
    for k, (m, v) in enumerate(zip(opt.m, opt.v)):
        arrays[f"{prefix}.m{k}"] = m
        arrays[f"{prefix}.v{k}"] = v


def _load_adam(data, prefix: str, opt: Adam) -> None:
    opt.step_count = int(data[f"{prefix}.t"])
    opt.m = [np.array(data[f"{prefix}.m{k}"]) for k in range(len(opt.m))]
    opt.v = [np.array(data[f"{prefix}.v{k}"]) for k in range(len(opt.v))]


def save_agent_checkpoint(path, *, kind: str, config: dict, nets: dict,
                          optimizers: dict, counters: dict, rng: np.random.Generator,
                          env_hash: str | None = None) -> None:
    """Serialize an agent: architecture, parameters, optimizer moments, counters,
    and the exploration RNG state, so training resumes bit-exactly."""
    meta = {
        "checkpoint_version": AGENT_CHECKPOINT_VERSION,
        "kind": kind,
        "config": config,
        "counters": counters,
        "rng_state": rng.bit_generator.state,
        "env_hash": env_hash,
    }
    arrays: dict[str, np.ndarray] = {
        "meta_json": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    }
    for name, net in nets.items():
        _pack_net(arrays, f"net.{name}", net)
    for name, opt in optimizers.items():
        _pack_adam(arrays, f"opt.{name}", opt)
    np.savez(path, **arrays)


def read_agent_checkpoint(path):
    """Open an agent checkpoint; returns (meta dict, npz data)."""
    data = np.load(path)
    meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
    version = meta.get("checkpoint_version")
    if version != AGENT_CHECKPOINT_VERSION:
        raise ValueError(f"unsupported agent checkpoint version {version!r}")
    return meta, data


def restore_rng(state: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng
