"""Symbolic scene-state middleware and consistency evaluation harness for
interleaved image-text generation pipelines."""

from .model import (
    Entity,
    EntityKind,
    ImageUnderstandingTree,
    Relation,
    SymbolicState,
    canonicalize,
    parse_iut,
    validate_iut,
)
from .edits import EditScript, apply_edits, diff_states

__all__ = [
    "Entity",
    "EntityKind",
    "ImageUnderstandingTree",
    "Relation",
    "SymbolicState",
    "canonicalize",
    "parse_iut",
    "validate_iut",
    "EditScript",
    "apply_edits",
    "diff_states",
]

__version__ = "0.1.0"
