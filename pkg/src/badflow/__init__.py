"""Badly approximable vectors over totally imaginary number fields.

Modules:
    number_field   fields, integral bases, embeddings, weights and heights
    bad_approx     approximation quality, obstruction boxes, game constants
    game_engine    hyperplane absolute and potential games, strategies, audits
    dani_flow      lattices along the diagonal flow and their systoles
    dimension_lab  box-counting surveys on the conjugate diagonal
    cli            command-line front end
"""

from .number_field import (
    AlgebraicInt,
    FieldSpec,
    NumberField,
    WeightVector,
    embed,
    height,
    make_field,
    quadratic_field,
    weighted_norm,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraicInt",
    "FieldSpec",
    "NumberField",
    "WeightVector",
    "embed",
    "height",
    "make_field",
    "quadratic_field",
    "weighted_norm",
]
