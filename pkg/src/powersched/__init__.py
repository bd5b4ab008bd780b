"""Switched series-capacitor scheduling for multimachine power networks.

Swing-equation simulation under mode schedules, insertion-gradient
schedule optimization, sliding-window control and placement design.
"""

from .case import CaseData, bundled_case_path, bundled_placement_path, load_case, parse_case
from .network import DynParams, ModeSet, Placement, build_modes, perturb, zero_state
from .schedule import Schedule, canonicalize, insert_mode
from .scheduler import OptimizerConfig, optimize
from .sensitivity import sensitivity
from .simulate import CostConfig, Trajectory, cost, running_cost, simulate
from .window import WindowConfig

__all__ = [
    "CaseData", "bundled_case_path", "bundled_placement_path", "load_case", "parse_case",
    "DynParams", "ModeSet", "Placement", "build_modes", "perturb", "zero_state",
    "Schedule", "canonicalize", "insert_mode",
    "OptimizerConfig", "optimize", "sensitivity",
    "CostConfig", "Trajectory", "cost", "running_cost", "simulate",
    "WindowConfig",
]
