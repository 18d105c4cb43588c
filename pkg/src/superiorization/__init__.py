"""Superiorization of feasibility-seeking iterative algorithms.

Turns an iterative algorithm that looks for constraints-compatible points
into a version that also steers its iterates toward lower values of an
optimization criterion, with total-variation-steered CT reconstruction as
the worked application.
"""
from .core import (Algorithm, Domain, DomainKind, OutputResult, ProximityFunction,
                   check_nonexpansive, iterate, run_perturbed, run_to_output)
from .criteria import (PixelImage, TotalVariation, nonascent_radius, subgradient_legacy_direction,
                       theorem2_direction, theorem2_nonascending, tv, tv_nonascending,
                       tv_partials, tv_subgradient, zero_provider)
from .linear import (Block, BlockLinearProblem, LinearEquation, algorithm_r, block_step,
                     efficient_view_order, load_problem, nonneg_clip, res, save_problem)
from .superiorize import (GammaSchedule, PerturbationRecord, RunResult, SteeringError,
                          SuperiorizationConfig, TraceRow, interleaved_run,
                          interleaved_variant_step, plain_run, read_trace, superiorized_run,
                          superiorized_step, verify_trace, write_trace)

__version__ = "0.1.0"
