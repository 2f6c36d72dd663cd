"""
Tipos de domínio em memória
"""
from boxsup.models.geometry import (
    BACKGROUND,
    IGNORE,
    BinaryMask,
    LabelMap,
    PixelRect,
    TrimapPartition,
)
from boxsup.models.assignment import CandidateCost, SegmentLabeling
from boxsup.models.evaluation import ConfusionMatrix
from boxsup.models.network import GradientSet, ModelParams, ScoreMap
from boxsup.models.proposal import CandidateSegment, ProposalPool
from boxsup.models.sample import AnnotationKind, BoxAnnotation, Sample
from boxsup.models.training import TrainState

__all__ = [
    "BACKGROUND",
    "IGNORE",
    "BinaryMask",
    "LabelMap",
    "PixelRect",
    "TrimapPartition",
    "CandidateCost",
    "SegmentLabeling",
    "ConfusionMatrix",
    "GradientSet",
    "ModelParams",
    "ScoreMap",
    "CandidateSegment",
    "ProposalPool",
    "AnnotationKind",
    "BoxAnnotation",
    "Sample",
    "TrainState",
]
