"""Grasp-state calculus for cloth manipulation.

Virtual-finger grasp notation, a six-way primitive classifier, a structured
literature corpus with consistency checks, a regrasp planner and tallies.
"""

__version__ = "0.1.0"

from .classifier import PrimitiveType, TransitionFlags, classify_transition, explain_transition
from .core import Geometry, GraspState, GraspUnit, HandMode, VirtualFinger, canonicalize
from .notation import ParseError, parse_grasp, print_grasp

__all__ = [
    "Geometry",
    "GraspState",
    "GraspUnit",
    "HandMode",
    "ParseError",
    "PrimitiveType",
    "TransitionFlags",
    "VirtualFinger",
    "canonicalize",
    "classify_transition",
    "explain_transition",
    "parse_grasp",
    "print_grasp",
]
