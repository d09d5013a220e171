"""Connectivity-aware relay placement for multi-agent teams.

An optimization expert places relay agents to maximize the algebraic
connectivity of the team's wireless network; a convolutional autoencoder
imitates it from rendered position images at a fraction of the cost.
"""

from .channel import ChannelCurve, ChannelParams, derive_curve, rate
from .expert import ExpertParams, ExpertSolution, mst_feasible_init, optimize
from .imaging import GridSpec, IntensityImage, extract_config, render
from .netgraph import (
    RateGraph,
    TeamConfig,
    adjacency,
    algebraic_connectivity,
    is_connected,
    laplacian,
    min_connecting_power,
)
from .pipeline import (
    CnnPlanner,
    DatasetSample,
    ExpertPlanner,
    PlanResult,
    generate_dataset,
    load_dataset,
    make_planner,
    simulate_patrol,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelCurve",
    "ChannelParams",
    "CnnPlanner",
    "DatasetSample",
    "ExpertParams",
    "ExpertPlanner",
    "ExpertSolution",
    "GridSpec",
    "IntensityImage",
    "PlanResult",
    "RateGraph",
    "TeamConfig",
    "adjacency",
    "algebraic_connectivity",
    "derive_curve",
    "extract_config",
    "generate_dataset",
    "is_connected",
    "laplacian",
    "load_dataset",
    "make_planner",
    "min_connecting_power",
    "mst_feasible_init",
    "optimize",
    "rate",
    "render",
    "simulate_patrol",
]
