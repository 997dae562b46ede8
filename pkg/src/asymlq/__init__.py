"""Best-response dynamics for zero-sum LQG games with asymmetric information."""

__version__ = "0.1.0"

from .best_response import (  # noqa: E402
    AugmentedPlant,
    GameTrace,
    StageSolution,
    augment_for_max,
    augment_for_min,
    evaluate_cost,
    lqg_best_response,
    minimizer_initial,
    run_best_response,
)
from .game_model import GameSpec, load_spec, paper_example, random_instance, save_spec, validate  # noqa: E402
