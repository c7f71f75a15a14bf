"""Multi-agent deep deterministic policy gradient with discrete actions.

Centralized training, decentralized execution: each agent owns an actor
that maps its local observation to action logits, and a centralized critic
that scores the full state (global context plus every agent's local
observation) together with every agent's one-hot action. Target copies of
both nets, refreshed by tau-soft updates, supply the TD bootstrap so the
regression target is a pure function of the batch and the target nets.

Discrete actions are handled with Gumbel-Softmax relaxation: acting samples
a hard index whose marginal distribution is exactly softmax(logits), while
the actor update feeds the relaxed vector through the critic's action input
and backpropagates through it (other agents' actions enter as the replayed
one-hots).
"""

from __future__ import annotations

import numpy as np

from ..nets import (
    Adam,
    DenseNet,
    gumbel_softmax_from_noise,
    relaxed_softmax_grad,
    soft_update,
    softmax,
)
from ..replay import TransitionBatch
from .base import (
    apply_probability_floor,
    read_agent_checkpoint,
    restore_rng,
    save_agent_checkpoint,
)


class Maddpg:
    """Per-agent actors with centralized critics over a shared-reward game."""

    kind = "maddpg"

    def __init__(self, local_widths, global_width: int, action_sizes, *,
                 gamma: float = 0.99, tau: float = 0.001, actor_lr: float = 1e-4,
                 critic_lr: float = 1e-3, hidden=(256, 256), temperature: float = 1.0,
                 new_content_floor: float = 0.02, dtype=np.float32, seed: int = 0):
        self.local_widths = [int(w) for w in local_widths]
        self.global_width = int(global_width)
        self.action_sizes = tuple(int(n) for n in action_sizes)
        if len(self.local_widths) != len(self.action_sizes):
            raise ValueError("one local observation width per agent is required")
        self.n_agents = len(self.action_sizes)
        self.gamma = float(gamma)
        self.tau = float(tau)
        self.temperature = float(temperature)
        self.new_content_floor = float(new_content_floor)
        self.dtype = np.dtype(dtype)
        self.state_width = self.global_width + sum(self.local_widths)
        self.critic_input_width = self.state_width + sum(self.action_sizes)
        self.update_count = 0
        self.config = {
            "local_widths": self.local_widths,
            "global_width": self.global_width,
            "action_sizes": list(self.action_sizes),
            "gamma": self.gamma,
            "tau": self.tau,
            "actor_lr": float(actor_lr),
            "critic_lr": float(critic_lr),
            "hidden": list(hidden),
            "temperature": self.temperature,
            "new_content_floor": self.new_content_floor,
            "dtype": self.dtype.name,
            "seed": int(seed),
        }

        self.rng = np.random.default_rng(seed)
        hid = list(hidden)
        self.actors = [
            DenseNet([w, *hid, n], self.rng, dtype=self.dtype)
            for w, n in zip(self.local_widths, self.action_sizes)
        ]
        self.critics = [
            DenseNet([self.critic_input_width, *hid, 1], self.rng, dtype=self.dtype)
            for _ in range(self.n_agents)
        ]
        self.target_actors = [a.copy() for a in self.actors]
        self.target_critics = [c.copy() for c in self.critics]
        self.actor_opts = [Adam(a, actor_lr) for a in self.actors]
        self.critic_opts = [Adam(c, critic_lr) for c in self.critics]

    # -- acting (decentralized: local observation only) ----------------------

    def act(self, agent_index: int, local_obs, explore: bool,
            rng: np.random.Generator | None = None,
            new_action_indices=None) -> tuple[int, np.ndarray]:
        """Pick an action for one agent from its own observation.

        Returns (action_index, probabilities). Exploration samples the
        Gumbel-Softmax at the configured temperature, whose hard index is
        distributed softmax(logits); greedy acting takes the argmax. The
        returned probabilities are the exact sampling distribution (softmax
        of the logits, floor-lifted for any new action indices) and double
        as logged propensities.
        """
        rng = rng if rng is not None else self.rng
        logits = self.actors[agent_index].forward(np.asarray(local_obs, dtype=self.dtype))
        probs = softmax(logits)
        if new_action_indices:
            probs = apply_probability_floor(probs, new_action_indices, self.new_content_floor)
        if explore:
            noise = rng.gumbel(size=probs.shape)
            index = int(np.argmax(np.log(probs) + noise))
        else:
            index = int(np.argmax(probs))
        return index, probs

    def act_joint(self, obs, explore: bool, rng: np.random.Generator | None = None,
                  new_action_indices=None):
        """Dispatch each agent's local observation to its own actor."""
        actions, probs = [], []
        for i in range(self.n_agents):
            new_i = new_action_indices[i] if new_action_indices else None
            a, p = self.act(i, obs.locals[i], explore, rng, new_i)
            actions.append(a)
            probs.append(p)
        return tuple(actions), probs

    def greedy_joint(self, obs):
        return self.act_joint(obs, explore=False)[0]

    def action_probabilities(self, obs) -> list[np.ndarray]:
        return [softmax(self.actors[i].forward(np.asarray(obs.locals[i], dtype=self.dtype)))
                for i in range(self.n_agents)]

    # -- training -------------------------------------------------------------

    def _action_offset(self, agent_index: int) -> int:
        return sum(self.action_sizes[:agent_index])

    def _target_joint_onehot(self, batch: TransitionBatch) -> np.ndarray:
        """Greedy target-actor actions on the next observations, one-hot."""
        parts = []
        for j in range(self.n_agents):
            logits = self.target_actors[j].forward(batch.next_locals[j])
            greedy = np.argmax(logits, axis=1)
            one_hot = np.zeros((batch.size, self.action_sizes[j]), dtype=self.dtype)
            one_hot[np.arange(batch.size), greedy] = 1.0
            parts.append(one_hot)
        return np.concatenate(parts, axis=1)

    def critic_targets(self, agent_index: int, batch: TransitionBatch,
                       target_onehot: np.ndarray | None = None) -> np.ndarray:
        """y = r + gamma * Q_i'(x', a') with a' from the target actors.

        A pure function of (batch, target nets); terminal transitions drop
        the bootstrap term entirely.
        """
        if target_onehot is None:
            target_onehot = self._target_joint_onehot(batch)
        nxt = np.concatenate([batch.next_states, target_onehot], axis=1)
        q_next = self.target_critics[agent_index].forward(nxt)[:, 0]
        return batch.rewards + self.gamma * (1.0 - batch.terminals) * q_next

    def _critic_loss_and_grads(self, agent_index: int, batch: TransitionBatch,
                               target_onehot: np.ndarray | None = None):
        y = self.critic_targets(agent_index, batch, target_onehot)
        x_in = np.concatenate([batch.states, batch.actions_one_hot()], axis=1)
        q, cache = self.critics[agent_index].forward_cached(x_in)
        err = q[:, 0] - y
        loss = float(np.mean(err ** 2))
        grad_out = (2.0 * err / batch.size).astype(self.dtype)[:, None]
        grads, _ = self.critics[agent_index].backward(cache, grad_out)
        return loss, grads

    def critic_update(self, agent_index: int, batch: TransitionBatch,
                      target_onehot: np.ndarray | None = None) -> float:
        """One squared-error regression step on agent i's centralized critic.

        Returns the pre-step loss.
        """
        loss, grads = self._critic_loss_and_grads(agent_index, batch, target_onehot)
        self.critic_opts[agent_index].step(self.critics[agent_index], grads)
        return loss

    def _actor_objective_and_grads(self, agent_index: int, batch: TransitionBatch,
                                   noise: np.ndarray):
        """Mean critic value with agent i's action relaxed, and its actor grads.

        Agent i's action enters the critic as softmax((logits + noise)/tau);
        the other agents' actions stay as the replayed one-hots. The critic's
        input gradient is sliced at agent i's action block and pushed back
        through the relaxation into the actor. The critic itself is not
        updated here.
        """
        local = batch.locals[agent_index]
        logits, actor_cache = self.actors[agent_index].forward_cached(local)
        relaxed = gumbel_softmax_from_noise(logits, noise, self.temperature).astype(self.dtype)

        joint = batch.actions_one_hot()
        off = self.state_width + self._action_offset(agent_index)
        n_i = self.action_sizes[agent_index]
        x_in = np.concatenate([batch.states, joint], axis=1)
        x_in[:, off:off + n_i] = relaxed

        q, critic_cache = self.critics[agent_index].forward_cached(x_in)
        objective = float(np.mean(q))

        # Ascend the objective: minimize -mean(Q).
        grad_q = np.full((batch.size, 1), -1.0 / batch.size, dtype=self.dtype)
        _, grad_input = self.critics[agent_index].backward(critic_cache, grad_q)
        grad_relaxed = grad_input[:, off:off + n_i]
        grad_logits = relaxed_softmax_grad(
            relaxed.astype(np.float64), grad_relaxed.astype(np.float64), self.temperature
        ).astype(self.dtype)
        grads, _ = self.actors[agent_index].backward(actor_cache, grad_logits)
        return objective, grads

    def actor_update(self, agent_index: int, batch: TransitionBatch,
                     rng: np.random.Generator | None = None) -> float:
        """One ascent step on E[Q_i(x, a_-i, relaxed_i)]; returns the objective."""
        rng = rng if rng is not None else self.rng
        noise = rng.gumbel(size=(batch.size, self.action_sizes[agent_index]))
        objective, grads = self._actor_objective_and_grads(agent_index, batch, noise)
        self.actor_opts[agent_index].step(self.actors[agent_index], grads)
        return objective

    def update(self, batch: TransitionBatch) -> dict:
        """One critic + one actor step for every agent on a shared batch."""
        if batch.size < 1:
            raise ValueError("empty batch")
        target_onehot = self._target_joint_onehot(batch)
        critic_losses, actor_objectives = [], []
        for i in range(self.n_agents):
            critic_losses.append(self.critic_update(i, batch, target_onehot))
            actor_objectives.append(self.actor_update(i, batch))
        self.update_count += 1
        return {
            "critic_loss": float(np.mean(critic_losses)),
            "actor_objective": float(np.mean(actor_objectives)),
        }

    def sync_targets(self, tau: float | None = None) -> None:
        t = self.tau if tau is None else tau
        for target, online in zip(self.target_actors, self.actors):
            soft_update(target, online, t)
        for target, online in zip(self.target_critics, self.critics):
            soft_update(target, online, t)

    # -- persistence ----------------------------------------------------------

    def _net_map(self) -> dict:
        nets = {}
        for i in range(self.n_agents):
            nets[f"actor{i}"] = self.actors[i]
            nets[f"critic{i}"] = self.critics[i]
            nets[f"target_actor{i}"] = self.target_actors[i]
            nets[f"target_critic{i}"] = self.target_critics[i]
        return nets

    def _opt_map(self) -> dict:
        opts = {}
        for i in range(self.n_agents):
            opts[f"actor{i}"] = self.actor_opts[i]
            opts[f"critic{i}"] = self.critic_opts[i]
        return opts

    def save(self, path, env_hash: str | None = None) -> None:
        save_agent_checkpoint(
            path, kind=self.kind, config=self.config, nets=self._net_map(),
            optimizers=self._opt_map(), counters={"update_count": self.update_count},
            rng=self.rng, env_hash=env_hash,
        )

    @classmethod
    def load(cls, path) -> "Maddpg":
        meta, data = read_agent_checkpoint(path)
        if meta["kind"] != cls.kind:
            raise ValueError(f"checkpoint kind {meta['kind']!r} is not {cls.kind!r}")
        cfg = meta["config"]
        agent = cls(
            cfg["local_widths"], cfg["global_width"], cfg["action_sizes"],
            gamma=cfg["gamma"], tau=cfg["tau"], actor_lr=cfg["actor_lr"],
            critic_lr=cfg["critic_lr"], hidden=cfg["hidden"],
            temperature=cfg["temperature"], new_content_floor=cfg["new_content_floor"],
            dtype=np.dtype(cfg["dtype"]), seed=cfg["seed"],
        )
        from .base import _load_adam, _unpack_net  # local import to keep surface tidy

        for i in range(agent.n_agents):
            agent.actors[i] = _unpack_net(data, f"net.actor{i}")
            agent.critics[i] = _unpack_net(data, f"net.critic{i}")
            agent.target_actors[i] = _unpack_net(data, f"net.target_actor{i}")
            agent.target_critics[i] = _unpack_net(data, f"net.target_critic{i}")
            _load_adam(data, f"opt.actor{i}", agent.actor_opts[i])
            _load_adam(data, f"opt.critic{i}", agent.critic_opts[i])
        agent.update_count = int(meta["counters"]["update_count"])
        agent.rng = restore_rng(meta["rng_state"])
        return agent
