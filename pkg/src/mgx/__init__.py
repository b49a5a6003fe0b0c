"""Robust offline equilibrium learning for zero-sum Markov games.

Library layout:

* :mod:`mgx.games` / :mod:`mgx.solve`: game types and the exact oracle
  layer (matrix-game LP, backward induction, best responses, gap).
* :mod:`mgx.data` / :mod:`mgx.corruption`: compliant dataset generation
  and contamination adversaries.
* :mod:`mgx.estimators`: robust regression / mean-estimation oracles.
* :mod:`mgx.pmvi`: the pessimistic minimax value-iteration learners.
* :mod:`mgx.coverage`: executable coverage diagnostics.
* :mod:`mgx.instances`: adversarial hard instances and random games.
* :mod:`mgx.sweep` / :mod:`mgx.plots` / :mod:`mgx.cli`: experiment runner.
"""

from .games import (LinearMG, StrategyPair, TabularMG, game_from_dict, game_to_dict,
                    load_game, one_hot_featurize, save_game, to_tabular, uniform_pair)
from .solve import (MatrixGameSolution, bellman_apply, best_response, best_response_value,
                    ne_backward_induction, policy_value, solve_matrix_game, subopt_gap)
from .data import (BehaviorPolicy, Dataset, DatasetView, behavior_from_pair, load_dataset,
                   sample_dataset, save_dataset, slice_per_timestep, uniform_behavior)
from .corruption import (CorruptionSpec, LeastCoveredAttack, RandomReplace, RewardFlip,
                         corrupt, least_covered_attack)
from .estimators import (FilteredMean, RegressionProblem, RidgeRegressor, RobustFit,
                         RobustLeastSquares, ScramRegressor, filter_mean, ridge_fit,
                         rls_fit, scram_fit)
from .pmvi import (BonusSpec, GameShape, PmviOutput, RobustPMVI, bellman_error_diagnostics,
                   compute_bonus, f_pmvi, robust_pmvi, scram_error_bound, tabular_pmvi)
from .coverage import (CoverageReport, check_assumptions, check_assumptions_exact,
                       expected_bonus_norm, lru_constant, occupancy_measure,
                       sample_covariance, unilateral_max_occupancy)
from .instances import (AgnosticBanditPair, TreeInstancePair, build_agnostic_pair,
                        build_tree_pair, random_linear, random_tabular)

__version__ = "0.1.0"
