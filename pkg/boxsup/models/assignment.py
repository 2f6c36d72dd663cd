"""
Custos de candidatos e rotulagem {l_S} escolhida por imagem
"""
from dataclasses import dataclass, field
from typing import Dict, List


@dataclass(frozen=True)
class CandidateCost:
    """Custo de um candidato para uma caixa: e_o + λ·e_r"""
    segment_id: int
    e_o: float
    e_r: float
    combined: float


@dataclass
class SegmentLabeling:
    """
    Segmento escolhido para cada caixa de uma imagem

    selections mapeia o índice da caixa (ordem da lista de caixas) para o
    id do segmento que ela ativa.
    """
    image_id: str
    selections: Dict[int, int] = field(default_factory=dict)
    costs: Dict[int, List[CandidateCost]] = field(default_factory=dict, repr=False, compare=False)

    def __repr__(self):
        return f"<SegmentLabeling(image_id={self.image_id}, selections={self.selections})>"
