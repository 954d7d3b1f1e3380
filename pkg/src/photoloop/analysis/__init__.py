from .images import synthetic_photo, synthetic_photos
from .profiling import ProfileReport, profile
from .ranks import LengthMismatch, kendall_tau, retained, spearman, topk_retention
from .sim2real import RankConsistencyReport, candidate_actions, sim2real_experiment
from .strategies import (
    ALL_STRATEGIES,
    BudgetSweep,
    Scenario,
    Strategy,
    StrategyReport,
    budget_sweep,
    compare_strategies,
)
from .synthetic import TreeEnvironment, harmful_first_tree, random_tree, scripted_gain_tree, trap_tree
from .tables import format_table
