"""
Estado do treino alternado
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from boxsup.models.geometry import LabelMap
from boxsup.models.network import GradientSet, ModelParams
from boxsup.schemas.files import HistoryRecord


@dataclass
class TrainState:
    """
    Parâmetros, época e supervisão correntes

    epoch conta as épocas concluídas, então len(history) == epoch.
    """
    params: ModelParams
    velocity: Optional[GradientSet] = None
    epoch: int = 0
    supervision: Dict[str, LabelMap] = field(default_factory=dict, repr=False)
    history: List[HistoryRecord] = field(default_factory=list)

    def __repr__(self):
        return f"<TrainState(epoch={self.epoch}, samples={len(self.supervision)}, params={self.params!r})>"
