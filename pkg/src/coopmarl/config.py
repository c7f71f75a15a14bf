"""Run configuration: defaults, YAML loading, dotted overrides, hashing.

Every field has a default below; unknown keys are rejected at every level.
A few defaults are kind-dependent and resolve at load time:

  env.action_sizes   null -> [5]*6 for coop_control, [8, 12, 6] for cro_sim
  env.horizon        null -> 100 for coop_control, 12 for cro_sim
  agent.gamma        null -> env.discount
  agent.conservative_coef  null -> 1.0 when building a *_cql kind, else 0.0

The effective (defaults-filled) config is written next to command outputs
and can be re-loaded; its canonical-JSON hash stamps every output file.
"""

from __future__ import annotations

import copy
import hashlib
import json

import yaml

from .errors import ConfigError

DEFAULTS: dict = {
    "env": {
        "kind": "coop_control",        # coop_control | cro_sim
        "action_sizes": None,          # per-agent catalog sizes
        "discount": 0.99,
        "horizon": None,               # max episode length
        "params": {},                  # kind-specific (see envs.*.PARAM_DEFAULTS)
    },
    "agent": {
        "kind": "maddpg",
        "gamma": None,                 # discount used in TD targets
        "tau": 0.001,                  # soft target-update rate
        "hidden": [256, 256],
        "actor_lr": 1e-4,
        "critic_lr": 1e-3,
        "lr": 1e-3,                    # single-net learners
        "temperature": 1.0,            # Gumbel-Softmax exploration
        "new_content_floor": 0.02,     # probability floor for new actions
        "conservative_coef": None,
        "epsilon": {"floor": 0.01, "span": 0.99, "decay": 1e5},
        "bandit_epsilon": 0.05,
        "feasibility_bound": 10_000_000,
    },
    "train": {
        "episodes": 300,
        "warmup": 1000,                # buffer size before updates start
        "update_every": 1,             # env steps between update rounds
        "batch_size": 128,
        "buffer_capacity": 100_000,
        "eval_every": 0,               # episodes between evals (0 = off)
        "eval_episodes": 20,
        "epochs": 5,                   # offline training passes
        "eval_every_updates": 0,       # offline curve cadence (0 = off)
        "stop_on_convergence": False,
        "patience": 50,
        "log_trajectories": False,     # keep the online behavior log
    },
    "dataset": {
        "registry": "",                # checkpoint registry JSON path
        "components": [
            {"kind": "checkpoint", "fraction": 1.0, "episodes": 100, "tag": "expert"},
            {"kind": "checkpoint", "fraction": 0.3, "episodes": 100, "tag": "medium"},
            {"kind": "random", "fraction": None, "episodes": 100, "tag": "random"},
        ],
    },
    "eval": {
        "trajectories": "",            # trajectory file consumed by eval/offline
        "variants": ["source", "logged", "indicator"],
        "exploration_tag": "random",   # IPS evaluates this slice only
        "bootstrap_resamples": 2000,
        "episodes": 100,               # eval-rollout episode count
        "models": [],                  # [{label, checkpoint} | {label, policy}]
    },
    "sweep": {
        "action_sizes": [5, 10, 25, 50],
        "agents": ["maddpg", "flat_dqn", "branching_dqn"],
    },
    "seeds": [0],
    "out": "runs/out",
}

_COMPONENT_KEYS = {"kind", "fraction", "episodes", "tag"}
_MODEL_KEYS = {"label", "checkpoint", "policy"}


def _merge(defaults, overrides, path: str):
    if isinstance(defaults, dict):
        if not isinstance(overrides, dict):
            raise ConfigError(f"{path or 'config'} must be a mapping")
        unknown = set(overrides) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config key(s) at {path or 'top level'}: "
                              f"{sorted(unknown)}")
        merged = {}
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            if key in overrides:
                # env.params and list-valued fields replace wholesale
                if isinstance(dval, dict) and key not in ("params",):
                    merged[key] = _merge(dval, overrides[key], sub)
                else:
                    merged[key] = copy.deepcopy(overrides[key])
            else:
                merged[key] = copy.deepcopy(dval)
        return merged
    return copy.deepcopy(overrides)


def _validate_items(cfg: dict) -> None:
    for i, comp in enumerate(cfg["dataset"]["components"]):
        if not isinstance(comp, dict):
            raise ConfigError(f"dataset.components[{i}] must be a mapping")
        unknown = set(comp) - _COMPONENT_KEYS
        if unknown:
            raise ConfigError(f"unknown key(s) in dataset.components[{i}]: {sorted(unknown)}")
    for i, model in enumerate(cfg["eval"]["models"]):
        if not isinstance(model, dict):
            raise ConfigError(f"eval.models[{i}] must be a mapping")
        unknown = set(model) - _MODEL_KEYS
        if unknown:
            raise ConfigError(f"unknown key(s) in eval.models[{i}]: {sorted(unknown)}")
        if "label" not in model or ("checkpoint" not in model and "policy" not in model):
            raise ConfigError(f"eval.models[{i}] needs a label and a checkpoint or policy")


def _resolve(cfg: dict) -> dict:
    kind = cfg["env"]["kind"]
    if kind not in ("coop_control", "cro_sim"):
        raise ConfigError(f"env.kind must be coop_control or cro_sim, got {kind!r}")
    if cfg["env"]["action_sizes"] is None:
        cfg["env"]["action_sizes"] = [5] * 6 if kind == "coop_control" else [8, 12, 6]
    if cfg["env"]["horizon"] is None:
        cfg["env"]["horizon"] = 100 if kind == "coop_control" else 12
    if cfg["agent"]["gamma"] is None:
        cfg["agent"]["gamma"] = cfg["env"]["discount"]
    if not cfg["seeds"]:
        raise ConfigError("at least one seed is required")
    cfg["seeds"] = [int(s) for s in cfg["seeds"]]
    return cfg


def build_config(overrides: dict | None = None) -> dict:
    """Defaults merged with overrides, validated and kind-resolved."""
    cfg = _merge(DEFAULTS, overrides or {}, "")
    _validate_items(cfg)
    return _resolve(cfg)


def load_config(path=None, cli_overrides=None, seeds=None, out=None) -> dict:
    """Config from an optional YAML file plus command-line adjustments."""
    overrides: dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path} must contain a mapping")
        overrides = loaded
    cfg = _merge(DEFAULTS, overrides, "")
    for item in cli_overrides or []:
        apply_override(cfg, item)
    if seeds:
        cfg["seeds"] = list(seeds)
    if out:
        cfg["out"] = str(out)
    _validate_items(cfg)
    return _resolve(cfg)


def apply_override(cfg: dict, item: str) -> None:
    """Apply one `dotted.key=value` override in place (value parsed as YAML)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse override value {raw!r}: {e}") from e
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        # env.params is open-ended (validated later by the environment)
        if parts[:-1] == ["env", "params"]:
            node[leaf] = value
            return
        raise ConfigError(f"unknown config key {key!r}")
    node[leaf] = value


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def save_config(cfg: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg, f, sort_keys=True)


def env_spec_from_config(cfg: dict):
    from .envs import EnvSpec

    e = cfg["env"]
    try:
        return EnvSpec(
            kind=e["kind"],
            action_sizes=tuple(int(n) for n in e["action_sizes"]),
            discount=float(e["discount"]),
            horizon=int(e["horizon"]),
            params=dict(e["params"]),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def agent_from_config(cfg: dict, env, seed: int, kind: str | None = None,
                      gamma: float | None = None):
    """Build the configured agent for an environment (kind/gamma overridable)."""
    from .agents import EpsilonSchedule, make_agent

    a = cfg["agent"]
    kind = kind or a["kind"]
    gamma = a["gamma"] if gamma is None else gamma
    hidden = tuple(int(h) for h in a["hidden"])
    if kind == "maddpg":
        hyper = dict(gamma=gamma, tau=a["tau"], hidden=hidden,
                     actor_lr=a["actor_lr"], critic_lr=a["critic_lr"],
                     temperature=a["temperature"],
                     new_content_floor=a["new_content_floor"])
    elif kind in ("flat_dqn", "flat_cql", "branching_dqn", "branching_cql"):
        coef = a["conservative_coef"]
        if coef is None:
            coef = 1.0 if kind.endswith("_cql") else 0.0
        hyper = dict(gamma=gamma, tau=a["tau"], hidden=hidden, lr=a["lr"],
                     conservative_coef=coef,
                     epsilon=EpsilonSchedule(**a["epsilon"]))
        if kind.startswith("flat"):
            hyper["feasibility_bound"] = a["feasibility_bound"]
    elif kind in ("page_bandit", "position_bandit"):
        hyper = dict(hidden=hidden, lr=a["lr"], epsilon=a["bandit_epsilon"])
    elif kind == "random":
        hyper = {}
    else:
        raise ConfigError(f"unknown agent kind {kind!r}")
    return make_agent(kind, env, seed=seed, **hyper)
