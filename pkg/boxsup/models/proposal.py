"""
Segmentos candidatos e pool de propostas por imagem
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from boxsup.models.geometry import BinaryMask, PixelRect
from boxsup.utils.exceptions import DimensionMismatchException, EmptyPoolException


@dataclass(frozen=True)
class CandidateSegment:
    """
    Segmento candidato S do pool

    tight_box é o retângulo justo da máscara, calculado uma única vez.
    """
    id: int
    mask: BinaryMask
    tight_box: PixelRect
    area: int

    def __repr__(self):
        return f"<CandidateSegment(id={self.id}, area={self.area}, box={self.tight_box.as_tuple()})>"


@dataclass(frozen=True)
class ProposalPool:
    """
    Pool fixo de candidatos de uma imagem

    Imutável após a criação: os arrays empilhados são somente leitura e
    os ids são densos 0..N-1 na ordem da lista.
    """
    image_id: str
    segments: Tuple[CandidateSegment, ...]
    _stack: np.ndarray = field(repr=False, compare=False, default=None)
    _boxes: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if len(self.segments) == 0:
            raise EmptyPoolException(f"Pool da imagem '{self.image_id}' sem segmentos")
        shapes = {seg.mask.pixels.shape for seg in self.segments}
        if len(shapes) != 1:
            raise DimensionMismatchException(
                f"Segmentos com dimensões diferentes no pool '{self.image_id}'",
                details={"shapes": sorted(shapes)},
            )
        for index, seg in enumerate(self.segments):
            if seg.id != index:
                raise ValueError(f"Ids do pool devem ser densos: posição {index} tem id {seg.id}")
        stack = np.stack([seg.mask.pixels for seg in self.segments])
        stack.setflags(write=False)
        boxes = np.array([seg.tight_box.as_tuple() for seg in self.segments], dtype=np.int64)
        boxes.setflags(write=False)
        object.__setattr__(self, "_stack", stack)
        object.__setattr__(self, "_boxes", boxes)

    @property
    def masks(self) -> np.ndarray:
        """Máscaras empilhadas (N, H, W), somente leitura"""
        return self._stack

    @property
    def boxes(self) -> np.ndarray:
        """Retângulos justos (N, 4) como (x0, y0, x1, y1)"""
        return self._boxes

    @property
    def shape(self) -> Tuple[int, int]:
        return self._stack.shape[1:]

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, segment_id: int) -> CandidateSegment:
        return self.segments[segment_id]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProposalPool):
            return NotImplemented
        return self.image_id == other.image_id and self._stack.shape == other._stack.shape and bool(
            np.array_equal(self._stack, other._stack)
        )

    def __hash__(self):
        return hash((self.image_id, self._stack.shape))

    def __repr__(self):
        return f"<ProposalPool(image_id={self.image_id}, size={len(self)})>"

    @classmethod
    def from_masks(cls, image_id: str, masks: Sequence[np.ndarray]) -> "ProposalPool":
        """
        Monta o pool a partir de máscaras booleanas na ordem dada

        Args:
            image_id: Identificador da imagem
            masks: Máscaras 2D com pelo menos um pixel cada

        Returns:
            ProposalPool: Pool com ids densos e retângulos justos em cache
        """
        from boxsup.services.geometry_service import GeometryService

        segments: List[CandidateSegment] = []
        for index, pixels in enumerate(masks):
            mask = BinaryMask(pixels)
            segments.append(
                CandidateSegment(
                    id=index,
                    mask=mask,
                    tight_box=GeometryService.tight_bbox(mask),
                    area=mask.area,
                )
            )
        return cls(image_id=image_id, segments=tuple(segments))
