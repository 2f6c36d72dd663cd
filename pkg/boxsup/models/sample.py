"""
Amostras de treino/teste e anotações por caixa
"""
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from boxsup.models.geometry import IGNORE, BinaryMask, LabelMap, PixelRect

AnnotationKind = Literal["mask", "box"]


class BoxAnnotation(BaseModel):
    """Caixa B anotada com o rótulo semântico l_B"""
    model_config = ConfigDict(frozen=True)

    rect: PixelRect
    label: int

    @field_validator("label")
    @classmethod
    def validate_label(cls, v):
        if v < 1 or v == IGNORE:
            raise ValueError(f"Rótulo de caixa deve ser uma classe de frente (recebido {v})")
        return v


@dataclass
class Sample:
    """
    Uma imagem com suas anotações

    image é (H, W, 3) em [0, 1]. annotation indica qual anotação o modo
    semi-supervisionado usa para esta amostra.
    """
    image_id: str
    image: np.ndarray
    boxes: Optional[List[BoxAnnotation]] = None
    gt_mask: Optional[LabelMap] = None
    gt_instances: Optional[List[Tuple[int, BinaryMask]]] = None
    annotation: AnnotationKind = "box"
    split: str = "train"
    proposals_path: Optional[str] = field(default=None, compare=False)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.image.shape[:2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.annotation == other.annotation
            and self.split == other.split
            and np.array_equal(self.image, other.image)
            and self.boxes == other.boxes
            and _optional_array_equal(self.gt_mask, other.gt_mask)
            and self.gt_instances == other.gt_instances
        )

    def __repr__(self):
        n_boxes = len(self.boxes) if self.boxes is not None else 0
        return f"<Sample(id={self.image_id}, {self.width}x{self.height}, annotation={self.annotation}, boxes={n_boxes})>"


def _optional_array_equal(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return bool(np.array_equal(a, b))
