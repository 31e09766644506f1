"""Entrance-aware multi-machine routing over farm working lines."""

from .baseline import Budget, exact_solve, random_search
from .evaluate import evaluate_routes, fitness, idle_distance, work_distance
from .ga import GaConfig, RunTrace, run_oga
from .instgen import GenParams, fixture_fig2, fixture_fig3, generate
from .model import (
    Chromosome,
    Depot,
    Field,
    Instance,
    Machine,
    Objective,
    Solution,
    WorkingLine,
    decode,
    encode,
    load_instance,
    save_instance,
    validate_instance,
)

__version__ = "0.1.0"
