"""Energy-minimizing cell activation, user association and channel
allocation for heterogeneous cellular networks.

The network's interference states are enumerated as on/off patterns with
precomputed per-pattern rates; spectrum is shared across patterns so that
muting a cell both saves power and is credited for the interference it
removes. The optimizer minimizes total operational power subject to
per-point rate demands via reweighted sparsity steps whose inner LPs are
solved by a dual cutting plane with closed-form pricing.
"""

__version__ = "0.1.0"

from .balancer import (Allocation, BalanceResult, CutCollection, DemandProfile,
                       is_feasible, master_step, price_cut, rate_balance)
from .baselines import (BiasFitConfig, BiasVector, RsrpTable, association_error,
                        fit_biases, fixed_assoc_minimize, re_associate,
                        reuse1_minimize, rsrp_from_gains)
from .energymin import (EnergyConfig, SolveReport, WeightVector,
                        extract_association, minimize_energy, price_cut_energy,
                        smoothed_objective, solve_weighted_l1, update_weights)
from .errors import (CapacityError, ConfigError, ConvergenceError,
                     GenerationError, HetsleepError, ScenarioError, SolverError)
from .lpcore import (LinearProgram, LpSolution, LpStatus, lagrangian_dual_value,
                     solve)
from .netmodel import (Cell, CellKind, ChannelGains, LayoutParams,
                       NetworkTopology, RadioConfig, RateTable, TestPoint,
                       TrafficModel, build_rate_table, demand_from_queue,
                       draw_channel_gains, generate_scenario, make_macro,
                       make_pico, op_power_from_tx, path_loss,
                       place_test_points, sinr, total_power)
from .patterns import (ClusterMap, PatternSet, cluster_patterns, enumerate_all,
                       feature_patterns, reuse1)
from .scenario import Scenario, load_scenario, validate_scenario
