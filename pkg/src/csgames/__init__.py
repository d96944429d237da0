"""Model checking and strategy synthesis for concurrent stochastic games.

Zero-sum coalition values and optimal (Nash / correlated) equilibria over
probabilistic and reward objectives, with a guarded-command modeling
language and a temporal property language in front.
"""

from .csg import (
    CoalitionPartition,
    Csg,
    RewardStructure,
    available_actions,
    build_coalition_game,
    export_game,
    import_game,
    local_nfg,
    validate_csg,
)
from .checker import CheckResult, SynthesizedStrategy, check_property, prob0_max
from .elaborator import elaborate
from .equilibria import (
    EquilibriumQuery,
    EquilibriumResult,
    best_response_value,
    check_ce,
    check_epsilon_ne,
    find_ce,
    find_ne,
    negate_for_social_cost,
)
from .errors import InputError, NonconvergenceError, ParseError, SolverError
from .games import (
    JointDistribution,
    MixedStrategy,
    NormalFormGame,
    StrategyProfile,
    read_nfg_table,
)
from .lp import GameSolution, LinearProgram, MatrixGame, lp_solve, solve_matrix_game
from .modlang import parse_model, print_model
from .proplang import parse_property, print_property, typecheck

__version__ = "0.1.0"
