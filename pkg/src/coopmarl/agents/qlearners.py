"""Single-learner baselines over the joint action space.

FlatQ enumerates every joint action as one output unit (the classical
flattening), so its head width is the full product of catalog sizes;
construction refuses widths beyond a feasibility bound rather than letting
the allocation blow up. BranchingQ keeps one value head per action
dimension on a shared trunk and combines per-branch argmaxes into the joint
action; its TD bootstrap is the mean over branches of the per-branch maxima,
shared by every branch.

Both accept a conservative coefficient c; when c > 0 the loss adds
c * (logsumexp_a Q(x, a) - Q(x, a_logged)) per sample (per branch for the
branching variant), which penalizes out-of-data action values for offline
training.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import FeasibilityError
from ..nets import Adam, DenseNet, soft_update, softmax
from ..replay import TransitionBatch
from .base import (
    EpsilonSchedule,
    eps_greedy_probs,
    read_agent_checkpoint,
    restore_rng,
    save_agent_checkpoint,
)

DEFAULT_FEASIBILITY_BOUND = 10_000_000


def _stable_logsumexp(q: np.ndarray) -> np.ndarray:
    m = q.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(q - m).sum(axis=1, keepdims=True)))[:, 0]


class FlatQ:
    """DQN over the flattened joint action space (CQL when conservative_coef > 0)."""

    kind = "flat_q"

    def __init__(self, state_width: int, action_sizes, *, gamma: float = 0.99,
                 tau: float = 0.001, lr: float = 1e-3, hidden=(256, 256),
                 conservative_coef: float = 0.0, epsilon: EpsilonSchedule = EpsilonSchedule(),
                 feasibility_bound: int = DEFAULT_FEASIBILITY_BOUND,
                 dtype=np.float32, seed: int = 0):
        self.action_sizes = tuple(int(n) for n in action_sizes)
        width = math.prod(self.action_sizes)  # exact big-int product
        if width > feasibility_bound:
            raise FeasibilityError(
                f"flattened joint-action width {width:,} exceeds the feasibility "
                f"bound {feasibility_bound:,}; use a branching or multi-agent learner"
            )
        self.joint_width = width
        self.state_width = int(state_width)
        self.gamma = float(gamma)
        self.tau = float(tau)
        self.conservative_coef = float(conservative_coef)
        self.epsilon = epsilon
        self.dtype = np.dtype(dtype)
        self.act_steps = 0
        self.update_count = 0
        self.config = {
            "state_width": self.state_width,
            "action_sizes": list(self.action_sizes),
            "gamma": self.gamma,
            "tau": self.tau,
            "lr": float(lr),
            "hidden": list(hidden),
            "conservative_coef": self.conservative_coef,
            "epsilon": epsilon.to_dict(),
            "feasibility_bound": int(feasibility_bound),
            "dtype": self.dtype.name,
            "seed": int(seed),
        }
        self.rng = np.random.default_rng(seed)
        self.q = DenseNet([self.state_width, *hidden, width], self.rng, dtype=self.dtype)
        self.target_q = self.q.copy()
        self.opt = Adam(self.q, lr)

    @property
    def n_agents(self) -> int:
        return len(self.action_sizes)

    def _greedy_flat(self, state: np.ndarray) -> int:
        return int(np.argmax(self.q.forward(state)))

    def greedy_joint(self, obs) -> tuple[int, ...]:
        flat = self._greedy_flat(obs.flat().astype(self.dtype))
        return tuple(int(a) for a in np.unravel_index(flat, self.action_sizes))

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None):
        """Epsilon-greedy over the joint space: explore draws the whole page
        uniformly. The returned per-agent probabilities are the marginals of
        that joint distribution (uniform exploration factorizes per agent)."""
        rng = rng if rng is not None else self.rng
        greedy = self.greedy_joint(obs)
        eps = self.epsilon.value(self.act_steps) if explore else 0.0
        if explore:
            self.act_steps += 1
            if rng.random() < eps:
                action = tuple(int(rng.integers(n)) for n in self.action_sizes)
            else:
                action = greedy
        else:
            action = greedy
        probs = [eps_greedy_probs(n, greedy[i], eps)
                 for i, n in enumerate(self.action_sizes)]
        return action, probs

    def action_probabilities(self, obs) -> list[np.ndarray]:
        """Per-agent marginals of the softmax over all joint action values."""
        q = self.q.forward(obs.flat().astype(self.dtype))
        joint = softmax(q).reshape(self.action_sizes)
        out = []
        for i in range(self.n_agents):
            axes = tuple(j for j in range(self.n_agents) if j != i)
            out.append(joint.sum(axis=axes))
        return out

    def update(self, batch: TransitionBatch) -> float:
        """TD regression toward r + gamma * max_a Q'(x', a), plus the
        conservative penalty when configured. Returns the pre-step loss."""
        if batch.size < 1:
            raise ValueError("empty batch")
        flat_a = batch.flat_actions()
        q_next = self.target_q.forward(batch.next_states)
        y = batch.rewards + self.gamma * (1.0 - batch.terminals) * q_next.max(axis=1)
        q_all, cache = self.q.forward_cached(batch.states)
        rows = np.arange(batch.size)
        q_taken = q_all[rows, flat_a]
        err = q_taken - y
        td_loss = float(np.mean(err ** 2))
        grad = np.zeros_like(q_all)
        grad[rows, flat_a] = 2.0 * err / batch.size
        loss = td_loss
        if self.conservative_coef > 0.0:
            lse = _stable_logsumexp(q_all.astype(np.float64))
            loss += self.conservative_coef * float(np.mean(lse - q_taken))
            soft = softmax(q_all).astype(self.dtype)
            grad += (self.conservative_coef / batch.size) * soft
            grad[rows, flat_a] -= self.conservative_coef / batch.size
        grads, _ = self.q.backward(cache, grad)
        self.opt.step(self.q, grads)
        self.update_count += 1
        return loss

    def sync_targets(self, tau: float | None = None) -> None:
        soft_update(self.target_q, self.q, self.tau if tau is None else tau)

    def _net_map(self) -> dict:
        return {"q": self.q, "target_q": self.target_q}

    def save(self, path, env_hash: str | None = None) -> None:
        save_agent_checkpoint(
            path, kind=self.kind, config=self.config,
            nets=self._net_map(), optimizers={"q": self.opt},
            counters={"update_count": self.update_count, "act_steps": self.act_steps},
            rng=self.rng, env_hash=env_hash,
        )

    @classmethod
    def load(cls, path) -> "FlatQ":
        meta, data = read_agent_checkpoint(path)
        if meta["kind"] != cls.kind:
            raise ValueError(f"checkpoint kind {meta['kind']!r} is not {cls.kind!r}")
        cfg = meta["config"]
        agent = cls(
            cfg["state_width"], cfg["action_sizes"], gamma=cfg["gamma"], tau=cfg["tau"],
            lr=cfg["lr"], hidden=cfg["hidden"], conservative_coef=cfg["conservative_coef"],
            epsilon=EpsilonSchedule(**cfg["epsilon"]),
            feasibility_bound=cfg["feasibility_bound"],
            dtype=np.dtype(cfg["dtype"]), seed=cfg["seed"],
        )
        from .base import _load_adam, _unpack_net

        agent.q = _unpack_net(data, "net.q")
        agent.target_q = _unpack_net(data, "net.target_q")
        _load_adam(data, "opt.q", agent.opt)
        agent.update_count = int(meta["counters"]["update_count"])
        agent.act_steps = int(meta["counters"]["act_steps"])
        agent.rng = restore_rng(meta["rng_state"])
        return agent


class BranchingQ:
    """Shared trunk with one Q head per action dimension.

    The heads are slices of a single output layer over the trunk's last
    hidden activation, which is the same computation as separate linear
    heads. Exploration is epsilon-greedy per branch, independently, so the
    logged per-agent propensities multiply to the exact joint probability.
    """

    kind = "branching_q"

    def __init__(self, state_width: int, action_sizes, *, gamma: float = 0.99,
                 tau: float = 0.001, lr: float = 1e-3, hidden=(256, 256),
                 conservative_coef: float = 0.0, epsilon: EpsilonSchedule = EpsilonSchedule(),
                 dtype=np.float32, seed: int = 0):
        self.action_sizes = tuple(int(n) for n in action_sizes)
        self.state_width = int(state_width)
        self.gamma = float(gamma)
        self.tau = float(tau)
        self.conservative_coef = float(conservative_coef)
        self.epsilon = epsilon
        self.dtype = np.dtype(dtype)
        self.act_steps = 0
        self.update_count = 0
        self.offsets = np.concatenate([[0], np.cumsum(self.action_sizes)])
        self.config = {
            "state_width": self.state_width,
            "action_sizes": list(self.action_sizes),
            "gamma": self.gamma,
            "tau": self.tau,
            "lr": float(lr),
            "hidden": list(hidden),
            "conservative_coef": self.conservative_coef,
            "epsilon": epsilon.to_dict(),
            "dtype": self.dtype.name,
            "seed": int(seed),
        }
        self.rng = np.random.default_rng(seed)
        self.net = DenseNet([self.state_width, *hidden, int(self.offsets[-1])],
                            self.rng, dtype=self.dtype)
        self.target_net = self.net.copy()
        self.opt = Adam(self.net, lr)

    @property
    def n_agents(self) -> int:
        return len(self.action_sizes)

    def branch_values(self, states: np.ndarray, net: DenseNet | None = None) -> list[np.ndarray]:
        """Per-branch Q values; accepts (d,) or (B, d) states."""
        out = (net or self.net).forward(states)
        return [out[..., self.offsets[i]:self.offsets[i + 1]] for i in range(self.n_agents)]

    def greedy_joint(self, obs) -> tuple[int, ...]:
        values = self.branch_values(obs.flat().astype(self.dtype))
        return tuple(int(np.argmax(v)) for v in values)

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else self.rng
        greedy = self.greedy_joint(obs)
        eps = self.epsilon.value(self.act_steps) if explore else 0.0
        if explore:
            self.act_steps += 1
        action = []
        for i, n in enumerate(self.action_sizes):
            if explore and rng.random() < eps:
                action.append(int(rng.integers(n)))
            else:
                action.append(greedy[i])
        probs = [eps_greedy_probs(n, greedy[i], eps)
                 for i, n in enumerate(self.action_sizes)]
        return tuple(action), probs

    def action_probabilities(self, obs) -> list[np.ndarray]:
        return [softmax(v) for v in self.branch_values(obs.flat().astype(self.dtype))]

    def update(self, batch: TransitionBatch) -> float:
        """Per-branch TD regression against the shared mean-of-maxima bootstrap."""
        if batch.size < 1:
            raise ValueError("empty batch")
        next_branches = self.branch_values(batch.next_states, self.target_net)
        mean_max = np.mean([v.max(axis=1) for v in next_branches], axis=0)
        y = batch.rewards + self.gamma * (1.0 - batch.terminals) * mean_max

        q_all, cache = self.net.forward_cached(batch.states)
        rows = np.arange(batch.size)
        grad = np.zeros_like(q_all)
        n_branches = self.n_agents
        loss = 0.0
        for i in range(n_branches):
            off = self.offsets[i]
            q_i = q_all[:, off:self.offsets[i + 1]]
            taken = batch.actions[:, i]
            q_taken = q_i[rows, taken]
            err = q_taken - y
            loss += float(np.mean(err ** 2)) / n_branches
            grad[rows, off + taken] += 2.0 * err / (batch.size * n_branches)
            if self.conservative_coef > 0.0:
                lse = _stable_logsumexp(q_i.astype(np.float64))
                loss += self.conservative_coef * float(np.mean(lse - q_taken)) / n_branches
                soft = softmax(q_i).astype(self.dtype)
                scale = self.conservative_coef / (batch.size * n_branches)
                grad[:, off:self.offsets[i + 1]] += scale * soft
                grad[rows, off + taken] -= scale
        grads, _ = self.net.backward(cache, grad)
        self.opt.step(self.net, grads)
        self.update_count += 1
        return loss

    def sync_targets(self, tau: float | None = None) -> None:
        soft_update(self.target_net, self.net, self.tau if tau is None else tau)

    def _net_map(self) -> dict:
        return {"net": self.net, "target_net": self.target_net}

    def save(self, path, env_hash: str | None = None) -> None:
        save_agent_checkpoint(
            path, kind=self.kind, config=self.config,
            nets=self._net_map(), optimizers={"net": self.opt},
            counters={"update_count": self.update_count, "act_steps": self.act_steps},
            rng=self.rng, env_hash=env_hash,
        )

    @classmethod
    def load(cls, path) -> "BranchingQ":
        meta, data = read_agent_checkpoint(path)
        if meta["kind"] != cls.kind:
            raise ValueError(f"checkpoint kind {meta['kind']!r} is not {cls.kind!r}")
        cfg = meta["config"]
        agent = cls(
            cfg["state_width"], cfg["action_sizes"], gamma=cfg["gamma"], tau=cfg["tau"],
            lr=cfg["lr"], hidden=cfg["hidden"], conservative_coef=cfg["conservative_coef"],
            epsilon=EpsilonSchedule(**cfg["epsilon"]),
            dtype=np.dtype(cfg["dtype"]), seed=cfg["seed"],
        )
        from .base import _load_adam, _unpack_net

        agent.net = _unpack_net(data, "net.net")
        agent.target_net = _unpack_net(data, "net.target_net")
        _load_adam(data, "opt.net", agent.opt)
        agent.update_count = int(meta["counters"]["update_count"])
        agent.act_steps = int(meta["counters"]["act_steps"])
        agent.rng = restore_rng(meta["rng_state"])
        return agent
