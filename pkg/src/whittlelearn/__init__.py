"""Whittle index learning for restless bandits: exact oracles, tabular, aggregated and neural learners."""
from .envs import MdpModel, ModelError, Transition, load_model, make_circular, make_random_walk, make_restart, make_unstructured, step
from .explore import EpsilonDecay, ExplorationPolicy, action_probabilities, select_action, softmax
from .linfa import Aggregation, run_fa_index_learning
from .metrics import RunRecord, delta_lambda, delta_v, index_error
from .neural import DqnConfig, ReplayBuffer, run_dqn_index_learning
from .oracle import ConvergenceError, NoRootError, q_subsidy, value_iteration, whittle_index, whittle_indices
from .tabular import ReinitScheme, q_update, run_qlearning
from .windex import IndexRun, run_index_learning

__version__ = "0.1.0"
