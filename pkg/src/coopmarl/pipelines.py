"""End-to-end pipelines behind the CLI commands.

Every pipeline takes an effective config dict (see config.DEFAULTS), runs
deterministically from the configured seeds, and writes CSV outputs (plus a
gnuplot-friendly .dat twin) stamped with the config hash. Files produced by
identical (config, seeds) are byte-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .agents import RandomPolicy, ScriptedBaseline, load_agent
from .config import agent_from_config, config_hash, env_spec_from_config, save_config
from .envs import make_env, spec_hash
from .errors import ConfigError, FeasibilityError
from .evaluation import (
    exploration_filter,
    group_episodes,
    ips_estimate,
    rollout_eval,
)
from .offline import (
    CheckpointRegistry,
    DatasetComponent,
    DatasetSpec,
    generate_dataset,
    online_eval_hook,
    train_offline,
)
from .replay import (
    EpisodeLog,
    ReplayBuffer,
    TransitionBatch,
    assemble_episode,
    load_trajectories,
)


def _fmt(value) -> str:
    """Deterministic CSV cell rendering (floats via repr round-trip)."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path, columns, rows, cfg_hash: str) -> None:
    """Write `<path>.csv` and a space-separated `<path>.dat` twin."""
    lines = [f"# config_hash={cfg_hash}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(str(path) + ".csv", "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    dat_lines = [f"# config_hash={cfg_hash}", "# " + " ".join(columns)]
    dat_lines += [" ".join(_fmt(v) for v in row) for row in rows]
    with open(str(path) + ".dat", "w", encoding="utf-8") as f:
        f.write("\n".join(dat_lines) + "\n")


def _prepare_out(cfg: dict) -> tuple[str, str]:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    h = config_hash(cfg)
    save_config(cfg, os.path.join(out, "config.yaml"))
    return out, h


@dataclass
class TrainResult:
    seed: int
    episode_returns: list[float] = field(default_factory=list)
    registry: CheckpointRegistry | None = None
    transitions: list = field(default_factory=list)

    def final_mean(self, window: int = 100) -> float:
        tail = self.episode_returns[-window:]
        return float(np.mean(tail)) if tail else float("nan")


def train_online(env, agent, episodes: int, *, seed: int, warmup: int = 1000,
                 update_every: int = 1, batch_size: int = 128,
                 buffer_capacity: int = 100_000, eval_every: int = 0,
                 eval_episodes: int = 20, eval_spec=None, checkpoint_dir=None,
                 log_transitions: bool = False, policy_tag: str = "online",
                 stop_on_convergence: bool = False, patience: int = 50) -> TrainResult:
    """Online training loop: explore, assemble episodes into the buffer, and
    run one update round every `update_every` env steps once `warmup`
    transitions exist (targets sync after every update)."""
    result = TrainResult(seed=seed)
    buffer = ReplayBuffer(buffer_capacity, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11CE]))
    sizes = env.spec.action_sizes
    registry = CheckpointRegistry()
    steps = 0
    for episode in range(episodes):
        log = EpisodeLog(episode, policy_tag)
        obs = env.reset(int(rng.integers(2 ** 31)))
        total, done = 0.0, False
        while not done:
            action, probs = agent.act_joint(obs, explore=True)
            step_result = env.step(action)
            log.append(obs, action, step_result.reward,
                       [probs[i][a] for i, a in enumerate(action)])
            total += step_result.reward
            obs = step_result.observation
            done = step_result.terminal
            steps += 1
            if len(buffer) >= warmup and steps % update_every == 0:
                batch = TransitionBatch(buffer.sample(min(batch_size, len(buffer))), sizes)
                agent.update(batch)
                agent.sync_targets()
        transitions = assemble_episode(log, env.terminal_observation())
        buffer.extend(transitions)
        if log_transitions:
            result.transitions.extend(transitions)
        result.episode_returns.append(total)

        if eval_every and (episode + 1) % eval_every == 0:
            spec = eval_spec if eval_spec is not None else env.spec
            eval_env = make_env(spec)
            rollout = rollout_eval(agent, eval_env, eval_episodes, seed=seed + 7)
            path = ""
            if checkpoint_dir is not None:
                os.makedirs(checkpoint_dir, exist_ok=True)
                path = os.path.join(checkpoint_dir, f"ckpt_ep{episode + 1:06d}.npz")
                agent.save(path, env_hash=spec_hash(env.spec))
            registry.add(episode + 1, rollout.mean_reward, path)
            if stop_on_convergence and registry.converged(patience):
                break
    result.registry = registry
    return result


def run_train_online(cfg: dict) -> dict:
    """`train-online`: per-seed learning curves, checkpoints, and a registry."""
    out, h = _prepare_out(cfg)
    env_spec = env_spec_from_config(cfg)
    t = cfg["train"]
    rows = []
    per_seed_finals = []
    for seed in cfg["seeds"]:
        env = make_env(env_spec)
        agent = agent_from_config(cfg, env, seed)
        if not hasattr(agent, "update"):
            raise ConfigError(f"agent kind {cfg['agent']['kind']!r} cannot be trained")
        ckpt_dir = os.path.join(out, f"seed_{seed}", "checkpoints")
        result = train_online(
            env, agent, t["episodes"], seed=seed, warmup=t["warmup"],
            update_every=t["update_every"], batch_size=t["batch_size"],
            buffer_capacity=t["buffer_capacity"], eval_every=t["eval_every"],
            eval_episodes=t["eval_episodes"], checkpoint_dir=ckpt_dir,
            log_transitions=t["log_trajectories"],
            stop_on_convergence=t["stop_on_convergence"], patience=t["patience"],
        )
        os.makedirs(os.path.join(out, f"seed_{seed}"), exist_ok=True)
        agent.save(os.path.join(out, f"seed_{seed}", "final.npz"),
                   env_hash=spec_hash(env_spec))
        if result.registry is not None and result.registry.entries:
            result.registry.save(os.path.join(out, f"seed_{seed}", "registry.json"))
        if t["log_trajectories"]:
            from .replay import save_trajectories

            save_trajectories(os.path.join(out, f"seed_{seed}", "trajectories.jsonl"),
                              result.transitions, env_spec)
        running = []
        for ep, ret in enumerate(result.episode_returns):
            running.append(ret)
            rows.append((seed, ep, ret, float(np.mean(running[-100:]))))
        per_seed_finals.append(result.final_mean())
    write_table(os.path.join(out, "metrics"), ["seed", "episode", "episode_return", "mean100"],
                rows, h)

    by_episode: dict[int, list[float]] = {}
    for seed, ep, ret, _ in rows:
        by_episode.setdefault(ep, []).append(ret)
    agg = [(ep, float(np.mean(rets))) for ep, rets in sorted(by_episode.items())]
    write_table(os.path.join(out, "aggregate"), ["episode", "mean_return"], agg, h)
    return {"out": out, "final_means": per_seed_finals, "rows": len(rows)}


def run_sweep(cfg: dict) -> dict:
    """`sweep`: agent kinds x per-dimension action sizes, with feasibility verdicts."""
    out, h = _prepare_out(cfg)
    t = cfg["train"]
    rows = []
    base_env = dict(cfg["env"])
    for kind in cfg["sweep"]["agents"]:
        for size in cfg["sweep"]["action_sizes"]:
            env_cfg = dict(base_env)
            n_agents = len(env_cfg["action_sizes"])
            env_cfg["action_sizes"] = [int(size)] * n_agents
            cell_cfg = dict(cfg)
            cell_cfg["env"] = env_cfg
            env_spec = env_spec_from_config(cell_cfg)
            for seed in cfg["seeds"]:
                env = make_env(env_spec)
                try:
                    agent = agent_from_config(cfg, env, seed, kind=kind)
                except FeasibilityError as e:
                    rows.append((kind, size, "", "no", "", 0, str(e)))
                    break  # same verdict for every seed
                result = train_online(
                    env, agent, t["episodes"], seed=seed, warmup=t["warmup"],
                    update_every=t["update_every"], batch_size=t["batch_size"],
                    buffer_capacity=t["buffer_capacity"],
                )
                rows.append((kind, size, seed, "yes", result.final_mean(),
                             len(result.episode_returns), ""))
    write_table(os.path.join(out, "sweep"),
                ["agent", "size", "seed", "feasible", "final_mean_reward", "episodes", "note"],
                rows, h)
    return {"out": out, "rows": rows}


def run_gen_dataset(cfg: dict) -> dict:
    """`gen-dataset`: roll the configured component policies into a trajectory file."""
    out, h = _prepare_out(cfg)
    env_spec = env_spec_from_config(cfg)
    env = make_env(env_spec)
    registry = None
    if cfg["dataset"]["registry"]:
        registry = CheckpointRegistry.load(cfg["dataset"]["registry"])
    components = [
        DatasetComponent(kind=c["kind"], episodes=int(c["episodes"]),
                         fraction=c.get("fraction"), tag=c.get("tag") or "")
        for c in cfg["dataset"]["components"]
    ]
    path = os.path.join(out, "trajectories.jsonl")
    transitions = generate_dataset(DatasetSpec(components), env, cfg["seeds"][0],
                                   out_path=path, registry=registry)
    from .offline import dataset_counts_by_tag

    counts = dataset_counts_by_tag(transitions)
    write_table(os.path.join(out, "summary"), ["tag", "episodes"],
                sorted(counts.items()), h)
    return {"out": out, "path": path, "transitions": len(transitions)}


def _load_compatible_trajectories(cfg: dict):
    path = cfg["eval"]["trajectories"]
    if not path:
        raise ConfigError("eval.trajectories must point at a trajectory file")
    transitions, header = load_trajectories(path)
    env_spec = env_spec_from_config(cfg)
    if header["env_hash"] != spec_hash(env_spec):
        raise ConfigError(
            f"trajectory file {path} was logged on a different environment "
            f"(hash {header['env_hash']} vs {spec_hash(env_spec)})"
        )
    return transitions, env_spec


def run_train_offline(cfg: dict) -> dict:
    """`train-offline`: fit the configured agent to a trajectory file."""
    out, h = _prepare_out(cfg)
    transitions, env_spec = _load_compatible_trajectories(cfg)
    t = cfg["train"]
    rows = []
    for seed in cfg["seeds"]:
        env = make_env(env_spec)
        agent = agent_from_config(cfg, env, seed)
        hook = None
        if t["eval_every_updates"]:
            hook = online_eval_hook(env_spec, episodes=t["eval_episodes"], seed=seed + 7)
        curve = train_offline(
            agent, transitions, t["epochs"], batch_size=t["batch_size"],
            seed=seed, eval_hook=hook, eval_every=t["eval_every_updates"],
        )
        agent.save(os.path.join(out, f"offline_seed_{seed}.npz"),
                   env_hash=spec_hash(env_spec))
        for updates, metric in curve:
            rows.append((updates, metric, seed))
    write_table(os.path.join(out, "curve"), ["updates", "metric", "seed"], rows, h)
    return {"out": out, "rows": len(rows)}


def build_policy(model_cfg: dict, env, seed: int = 0):
    """Instantiate an eval-ips model entry: checkpoint or named fixed policy."""
    if "checkpoint" in model_cfg and model_cfg["checkpoint"]:
        return load_agent(model_cfg["checkpoint"])
    name = model_cfg.get("policy")
    if name == "random":
        return RandomPolicy(env.spec.action_sizes, seed=seed)
    if name == "scripted_baseline":
        return ScriptedBaseline(env, seed=seed)
    raise ConfigError(f"model {model_cfg.get('label')!r} needs a checkpoint "
                      f"or policy in {{random, scripted_baseline}}")


def run_eval_ips(cfg: dict) -> dict:
    """`eval-ips`: model x reward-variant IPS table on the exploration slice."""
    out, h = _prepare_out(cfg)
    transitions, env_spec = _load_compatible_trajectories(cfg)
    env = make_env(env_spec)
    if not cfg["eval"]["models"]:
        raise ConfigError("eval.models must list at least one model")
    explored = exploration_filter(transitions, cfg["eval"]["exploration_tag"])
    if not explored:
        raise ConfigError(
            f"no records tagged {cfg['eval']['exploration_tag']!r} in the log"
        )
    records = group_episodes(explored)
    rows = []
    for model_cfg in cfg["eval"]["models"]:
        policy = build_policy(model_cfg, env, seed=cfg["seeds"][0])
        for variant in cfg["eval"]["variants"]:
            res = ips_estimate(records, policy, variant,
                               resamples=cfg["eval"]["bootstrap_resamples"],
                               seed=cfg["seeds"][0])
            rows.append((model_cfg["label"], variant, res.estimate,
                         res.ci_lower, res.ci_upper, res.n))
    write_table(os.path.join(out, "ips"),
                ["model", "variant", "estimate", "ci_lower", "ci_upper", "n"], rows, h)
    return {"out": out, "rows": rows}


def run_eval_rollout(cfg: dict) -> dict:
    """`eval-rollout`: greedy rollout value of each configured model."""
    out, h = _prepare_out(cfg)
    env_spec = env_spec_from_config(cfg)
    if not cfg["eval"]["models"]:
        raise ConfigError("eval.models must list at least one model")
    rows = []
    for model_cfg in cfg["eval"]["models"]:
        for seed in cfg["seeds"]:
            env = make_env(env_spec)
            policy = build_policy(model_cfg, env, seed=seed)
            res = rollout_eval(policy, env, cfg["eval"]["episodes"], seed=seed)
            rows.append((model_cfg["label"], seed, res.mean_reward, res.stderr,
                         res.episodes))
    write_table(os.path.join(out, "rollout"),
                ["model", "seed", "mean_reward", "stderr", "episodes"], rows, h)
    return {"out": out, "rows": rows}
