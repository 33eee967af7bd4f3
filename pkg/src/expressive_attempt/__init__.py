"""Expressive attempt motions for tasks a robot cannot complete.

The robot cannot reach its goal pose, so it instead moves the rest of its
body the way the end effector would have moved. The package optimizes that
attempt trajectory, times it with rewinds and repetitions, and exports or
renders the result.
"""

from .collision import Box, Circle, CollisionModel, Obstacle, signed_distance
from .costs import CostContext, CostSpec, DistanceMetric, distance, similarity_cost, total_objective
from .estimator import AttemptOptimizer, grid_search
from .exceptions import (
    ApproachCollisionError,
    AttemptError,
    DimensionError,
    TaskFileError,
    UnknownBodyPointError,
    UnreachableTargetError,
)
from .export import export_plan, load_plan
from .kinematics import KinematicChain, Pose, default_chain, forward_kinematics, ik_solutions
from .motion import MotionPlan, Task, TimingProfile, compose_baseline, compose_expressive, sample_plan
from .optimizer import SolveOptions, SolveResult, desired_configuration, solve_attempt
from .render import render_svg
from .taskfile import parse_task_file

__all__ = [
    "ApproachCollisionError", "AttemptError", "AttemptOptimizer", "Box", "Circle", "CollisionModel",
    "CostContext", "CostSpec", "DimensionError", "DistanceMetric", "KinematicChain", "MotionPlan",
    "Obstacle", "Pose", "SolveOptions", "SolveResult", "Task", "TaskFileError", "TimingProfile",
    "UnknownBodyPointError", "UnreachableTargetError", "compose_baseline", "compose_expressive",
    "default_chain", "desired_configuration", "distance", "export_plan", "forward_kinematics",
    "grid_search", "ik_solutions", "load_plan", "parse_task_file", "render_svg", "sample_plan",
    "signed_distance", "similarity_cost", "solve_attempt", "total_objective",
]
