"""Typed geospatial workflow graphs: validation, factorization, templates and execution."""

from .concepts import (
    ConceptNode,
    CoreConcept,
    FunctionalRole,
    GeoFlowGraph,
    TransformEdge,
    parse_graph,
    serialize_graph,
)
from .factor import FactorGraph, defactorize, factorize
from .wellformed import ConstraintId, ValidationReport, make_negative, make_preference_pair, validate

__version__ = "0.1.0"

__all__ = [
    "ConceptNode",
    "ConstraintId",
    "CoreConcept",
    "FactorGraph",
    "FunctionalRole",
    "GeoFlowGraph",
    "TransformEdge",
    "ValidationReport",
    "defactorize",
    "factorize",
    "make_negative",
    "make_preference_pair",
    "parse_graph",
    "serialize_graph",
    "validate",
]
