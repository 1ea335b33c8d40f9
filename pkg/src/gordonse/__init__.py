"""Deterministic state-evolution predictions for iterative estimators in phase
retrieval and mixtures of linear regressions, with simulation and checking tools."""
from .models import Algorithm, GroundTruth, ModelKind, ModelSpec, make_stream
from .state_evolution import SEOperator, StatePoint, iterate_se

__all__ = ["Algorithm", "GroundTruth", "ModelKind", "ModelSpec", "SEOperator", "StatePoint",
           "iterate_se", "make_stream"]
__version__ = "0.1.0"
