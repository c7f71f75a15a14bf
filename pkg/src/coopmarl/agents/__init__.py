from .base import EpsilonSchedule, apply_probability_floor, eps_greedy_probs, epsilon_at
from .bandits import PageBandit, PositionBandit, RandomPolicy, ScriptedBaseline
from .maddpg import Maddpg
from .qlearners import DEFAULT_FEASIBILITY_BOUND, BranchingQ, FlatQ

AGENT_KINDS = (
    "maddpg",
    "flat_dqn",
    "flat_cql",
    "branching_dqn",
    "branching_cql",
    "page_bandit",
    "position_bandit",
    "random",
)


def make_agent(kind: str, env, *, seed: int = 0, **hyper):
    """Build a learner sized for an environment's observation/action widths.

    `hyper` passes through to the agent constructor; the flat/branching CQL
    variants default their conservative coefficient to 1.0.
    """
    state_width = env.global_width + sum(env.local_widths)
    sizes = env.spec.action_sizes
    if kind == "maddpg":
        return Maddpg(env.local_widths, env.global_width, sizes, seed=seed, **hyper)
    if kind in ("flat_dqn", "flat_cql"):
        if kind == "flat_cql":
            hyper.setdefault("conservative_coef", 1.0)
        return FlatQ(state_width, sizes, seed=seed, **hyper)
    if kind in ("branching_dqn", "branching_cql"):
        if kind == "branching_cql":
            hyper.setdefault("conservative_coef", 1.0)
        return BranchingQ(state_width, sizes, seed=seed, **hyper)
    if kind == "page_bandit":
        return PageBandit(state_width, sizes, seed=seed, **hyper)
    if kind == "position_bandit":
        return PositionBandit(env.local_widths, sizes, seed=seed, **hyper)
    if kind == "random":
        return RandomPolicy(sizes, seed=seed)
    raise ValueError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")


def load_agent(path):
    """Load any agent checkpoint by dispatching on its recorded kind."""
    from .base import read_agent_checkpoint

    meta, _ = read_agent_checkpoint(path)
    kind = meta["kind"]
    classes = {
        Maddpg.kind: Maddpg,
        FlatQ.kind: FlatQ,
        BranchingQ.kind: BranchingQ,
        PageBandit.kind: PageBandit,
        PositionBandit.kind: PositionBandit,
    }
    if kind not in classes:
        raise ValueError(f"cannot load agent checkpoint of kind {kind!r}")
    return classes[kind].load(path)


__all__ = [
    "AGENT_KINDS",
    "BranchingQ",
    "DEFAULT_FEASIBILITY_BOUND",
    "EpsilonSchedule",
    "FlatQ",
    "Maddpg",
    "PageBandit",
    "PositionBandit",
    "RandomPolicy",
    "ScriptedBaseline",
    "apply_probability_floor",
    "eps_greedy_probs",
    "epsilon_at",
    "load_agent",
    "make_agent",
]
