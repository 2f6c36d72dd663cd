"""
Services - Lógica de cada etapa do pipeline
"""
from boxsup.services.geometry_service import GeometryService
from boxsup.services.proposal_service import ProposalService
from boxsup.services.assignment_service import AssignmentService
from boxsup.services.pixelnet_service import PixelNetService
from boxsup.services.eval_service import EvalService
from boxsup.services.trainer_service import TrainerService
from boxsup.services.dataset_service import DatasetService

__all__ = [
    "GeometryService",
    "ProposalService",
    "AssignmentService",
    "PixelNetService",
    "EvalService",
    "TrainerService",
    "DatasetService",
]
