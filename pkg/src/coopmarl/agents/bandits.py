"""Contextual-bandit learners and fixed reference policies.

The bandits regress the instant shared reward of the taken action and act
greedily on the prediction (epsilon-greedy per position while exploring).
PositionBandit keeps one net per position and sees only that position's
local observation; PageBandit shares one trunk over the full joint
observation with one prediction head per position. Neither conditions on
the other positions' chosen actions, which is exactly the modeling gap the
multi-agent learners close.
"""

from __future__ import annotations

import numpy as np

from ..nets import Adam, DenseNet, softmax
from ..replay import TransitionBatch
from .base import (
    eps_greedy_probs,
    read_agent_checkpoint,
    restore_rng,
    save_agent_checkpoint,
)


class PageBandit:
    """Multi-head instant-reward regressor over the whole-page observation."""

    kind = "page_bandit"

    def __init__(self, state_width: int, action_sizes, *, lr: float = 1e-3,
                 hidden=(256, 256), epsilon: float = 0.05, dtype=np.float32,
                 seed: int = 0):
        self.action_sizes = tuple(int(n) for n in action_sizes)
        self.state_width = int(state_width)
        self.eps = float(epsilon)
        self.dtype = np.dtype(dtype)
        self.offsets = np.concatenate([[0], np.cumsum(self.action_sizes)])
        self.update_count = 0
        self.config = {
            "state_width": self.state_width,
            "action_sizes": list(self.action_sizes),
            "lr": float(lr),
            "hidden": list(hidden),
            "epsilon": self.eps,
            "dtype": self.dtype.name,
            "seed": int(seed),
        }
        self.rng = np.random.default_rng(seed)
        self.net = DenseNet([self.state_width, *list(hidden), int(self.offsets[-1])],
                            self.rng, dtype=self.dtype)
        self.opt = Adam(self.net, lr)

    @property
    def n_agents(self) -> int:
        return len(self.action_sizes)

    def head_values(self, states: np.ndarray) -> list[np.ndarray]:
        out = self.net.forward(states)
        return [out[..., self.offsets[i]:self.offsets[i + 1]] for i in range(self.n_agents)]

    def greedy_joint(self, obs) -> tuple[int, ...]:
        values = self.head_values(obs.flat().astype(self.dtype))
        return tuple(int(np.argmax(v)) for v in values)

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else self.rng
        greedy = self.greedy_joint(obs)
        eps = self.eps if explore else 0.0
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
        return [softmax(v) for v in self.head_values(obs.flat().astype(self.dtype))]

    def update(self, batch: TransitionBatch) -> float:
        """Regress every head's taken-action prediction toward the instant reward."""
        if batch.size < 1:
            raise ValueError("empty batch")
        preds, cache = self.net.forward_cached(batch.states)
        rows = np.arange(batch.size)
        grad = np.zeros_like(preds)
        loss = 0.0
        for i in range(self.n_agents):
            off = self.offsets[i]
            taken = batch.actions[:, i]
            err = preds[rows, off + taken] - batch.rewards
            loss += float(np.mean(err ** 2)) / self.n_agents
            grad[rows, off + taken] = 2.0 * err / (batch.size * self.n_agents)
        grads, _ = self.net.backward(cache, grad)
        self.opt.step(self.net, grads)
        self.update_count += 1
        return loss

    def sync_targets(self, tau: float | None = None) -> None:
        pass  # bandits bootstrap nothing; no target nets exist

    def _net_map(self) -> dict:
        return {"net": self.net}

    def save(self, path, env_hash: str | None = None) -> None:
        save_agent_checkpoint(
            path, kind=self.kind, config=self.config, nets=self._net_map(),
            optimizers={"net": self.opt}, counters={"update_count": self.update_count},
            rng=self.rng, env_hash=env_hash,
        )

    @classmethod
    def load(cls, path) -> "PageBandit":
        meta, data = read_agent_checkpoint(path)
        if meta["kind"] != cls.kind:
            raise ValueError(f"checkpoint kind {meta['kind']!r} is not {cls.kind!r}")
        cfg = meta["config"]
        agent = cls(cfg["state_width"], cfg["action_sizes"], lr=cfg["lr"],
                    hidden=cfg["hidden"], epsilon=cfg["epsilon"],
                    dtype=np.dtype(cfg["dtype"]), seed=cfg["seed"])
        from .base import _load_adam, _unpack_net

        agent.net = _unpack_net(data, "net.net")
        _load_adam(data, "opt.net", agent.opt)
        agent.update_count = int(meta["counters"]["update_count"])
        agent.rng = restore_rng(meta["rng_state"])
        return agent


class PositionBandit:
    """Independent per-position regressors; each sees only its own observation."""

    kind = "position_bandit"

    def __init__(self, local_widths, action_sizes, *, lr: float = 1e-3,
                 hidden=(256, 256), epsilon: float = 0.05, dtype=np.float32,
                 seed: int = 0):
        self.local_widths = [int(w) for w in local_widths]
        self.action_sizes = tuple(int(n) for n in action_sizes)
        self.eps = float(epsilon)
        self.dtype = np.dtype(dtype)
        self.update_count = 0
        self.config = {
            "local_widths": self.local_widths,
            "action_sizes": list(self.action_sizes),
            "lr": float(lr),
            "hidden": list(hidden),
            "epsilon": self.eps,
            "dtype": self.dtype.name,
            "seed": int(seed),
        }
        self.rng = np.random.default_rng(seed)
        self.nets = [
            DenseNet([w, *list(hidden), n], self.rng, dtype=self.dtype)
            for w, n in zip(self.local_widths, self.action_sizes)
        ]
        self.opts = [Adam(net, lr) for net in self.nets]

    @property
    def n_agents(self) -> int:
        return len(self.action_sizes)

    def greedy_joint(self, obs) -> tuple[int, ...]:
        return tuple(
            int(np.argmax(self.nets[i].forward(np.asarray(obs.locals[i], dtype=self.dtype))))
            for i in range(self.n_agents)
        )

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else self.rng
        greedy = self.greedy_joint(obs)
        eps = self.eps if explore else 0.0
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
        return [
            softmax(self.nets[i].forward(np.asarray(obs.locals[i], dtype=self.dtype)))
            for i in range(self.n_agents)
        ]

    def update(self, batch: TransitionBatch) -> float:
        if batch.size < 1:
            raise ValueError("empty batch")
        rows = np.arange(batch.size)
        loss = 0.0
        for i in range(self.n_agents):
            preds, cache = self.nets[i].forward_cached(batch.locals[i])
            taken = batch.actions[:, i]
            err = preds[rows, taken] - batch.rewards
            loss += float(np.mean(err ** 2)) / self.n_agents
            grad = np.zeros_like(preds)
            grad[rows, taken] = 2.0 * err / batch.size
            grads, _ = self.nets[i].backward(cache, grad)
            self.opts[i].step(self.nets[i], grads)
        self.update_count += 1
        return loss

    def sync_targets(self, tau: float | None = None) -> None:
        pass

    def _net_map(self) -> dict:
        return {f"net{i}": n for i, n in enumerate(self.nets)}

    def save(self, path, env_hash: str | None = None) -> None:
        nets = self._net_map()
        opts = {f"net{i}": o for i, o in enumerate(self.opts)}
        save_agent_checkpoint(
            path, kind=self.kind, config=self.config, nets=nets, optimizers=opts,
            counters={"update_count": self.update_count}, rng=self.rng, env_hash=env_hash,
        )

    @classmethod
    def load(cls, path) -> "PositionBandit":
        meta, data = read_agent_checkpoint(path)
        if meta["kind"] != cls.kind:
            raise ValueError(f"checkpoint kind {meta['kind']!r} is not {cls.kind!r}")
        cfg = meta["config"]
        agent = cls(cfg["local_widths"], cfg["action_sizes"], lr=cfg["lr"],
                    hidden=cfg["hidden"], epsilon=cfg["epsilon"],
                    dtype=np.dtype(cfg["dtype"]), seed=cfg["seed"])
        from .base import _load_adam, _unpack_net

        for i in range(agent.n_agents):
            agent.nets[i] = _unpack_net(data, f"net.net{i}")
            _load_adam(data, f"opt.net{i}", agent.opts[i])
        agent.update_count = int(meta["counters"]["update_count"])
        agent.rng = restore_rng(meta["rng_state"])
        return agent


class RandomPolicy:
    """Uniform policy; its propensities are exactly 1/n per position."""

    kind = "random"

    def __init__(self, action_sizes, seed: int = 0):
        self.action_sizes = tuple(int(n) for n in action_sizes)
        self.rng = np.random.default_rng(seed)

    @property
    def n_agents(self) -> int:
        return len(self.action_sizes)

    def greedy_joint(self, obs) -> tuple[int, ...]:
        return tuple(int(self.rng.integers(n)) for n in self.action_sizes)

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else self.rng
        action = tuple(int(rng.integers(n)) for n in self.action_sizes)
        probs = [np.full(n, 1.0 / n) for n in self.action_sizes]
        return action, probs

    def action_probabilities(self, obs) -> list[np.ndarray]:
        return [np.full(n, 1.0 / n) for n in self.action_sizes]


class ScriptedBaseline:
    """Stand-in for a production click-optimized ranker.

    Scores each position's contents by their segment-averaged click appeal
    (no cross-position awareness, no purchase model) and samples from a
    softmax over those fixed scores.
    """

    kind = "scripted_baseline"

    def __init__(self, env, temperature: float = 1.0, seed: int = 0):
        self.action_sizes = env.spec.action_sizes
        self.rng = np.random.default_rng(seed)
        self._probs = []
        for i in range(env.agent_count):
            scores = np.array([
                np.mean([env.click_logit(i, a, s, 0.0, 0) for s in range(env.segments)])
                for a in range(self.action_sizes[i])
            ])
            self._probs.append(softmax(scores / temperature))

    @property
    def n_agents(self) -> int:
        return len(self.action_sizes)

    def greedy_joint(self, obs) -> tuple[int, ...]:
        return tuple(int(np.argmax(p)) for p in self._probs)

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else self.rng
        action = tuple(int(rng.choice(len(p), p=p)) for p in self._probs)
        return action, [p.copy() for p in self._probs]

    def action_probabilities(self, obs) -> list[np.ndarray]:
        return [p.copy() for p in self._probs]
