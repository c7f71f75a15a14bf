"""coopmarl: cooperative multi-agent RL over combinatorial action spaces.

Numpy-only learners (MADDPG with Gumbel-Softmax actions, flattened and
branching Q-learning with optional conservative penalties, contextual
bandits), two synthetic shared-reward environments, replay and trajectory
logging, offline dataset generation and training, and IPS off-policy
evaluation.
"""

from .agents import (
    BranchingQ,
    EpsilonSchedule,
    FlatQ,
    Maddpg,
    PageBandit,
    PositionBandit,
    RandomPolicy,
    ScriptedBaseline,
    epsilon_at,
    load_agent,
    make_agent,
)
from .envs import (
    CoopControl,
    CroSim,
    EnvSpec,
    JointObservation,
    RewardWeights,
    StepResult,
    compose_reward,
    default_coop_spec,
    default_cro_spec,
    discounted_return,
    discretize_axis,
    joint_action_space_size,
    make_env,
    spec_hash,
)
from .errors import ConfigError, FeasibilityError, TrajectoryFormatError
from .evaluation import (
    IpsResult,
    exploration_filter,
    group_episodes,
    ips_estimate,
    rollout_eval,
    target_propensity,
    transform_reward,
)
from .nets import (
    Adam,
    DenseNet,
    GumbelSample,
    gumbel_softmax_sample,
    soft_update,
    softmax,
)
from .offline import (
    CheckpointRegistry,
    DatasetComponent,
    DatasetSpec,
    generate_dataset,
    mix_offline_cycle,
    select_checkpoint,
    train_offline,
)
from .pipelines import train_online
from .replay import (
    EpisodeLog,
    ReplayBuffer,
    Transition,
    TransitionBatch,
    assemble_episode,
    load_trajectories,
    save_trajectories,
)

__version__ = "0.1.0"
