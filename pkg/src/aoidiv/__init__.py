"""Average age-of-information scheduling for an energy-harvesting monitor
that can query several heterogeneous information sources."""

from .errors import ConfigError, InvalidScenarioError, NonConvergenceError
from .experiments import (compare_policies, run_shape_grid, sweep_cost_scale, sweep_lambda,
                          sweep_network_size, sweep_single_source)
from .mdp import IDLE, State, TransitionModel, build_transition_model, feasible_actions, next_aoi
from .policies import AggressivePolicy, AlwaysIdle, FixedSource, TabularPolicy, aggressive_action, tabular_action
from .scenario import (ScenarioConfig, SourceSpec, calibrate_reliability, default_scenario, generate_cost_vector,
                       load_config, truncated_geometric_pmf)
from .simulator import SimulationMetrics, simulate, step
from .solver import (EvaluationResult, PolicySolution, evaluate_policy_exact, extract_thresholds,
                     relative_value_iteration)

__version__ = "0.1.0"
