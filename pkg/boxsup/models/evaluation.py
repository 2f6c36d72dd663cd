"""
Acumulador de matriz de confusão por pixel
"""
from typing import Optional

import numpy as np


class ConfusionMatrix:
    """
    Contagens C×C: linhas = ground truth, colunas = predição

    Pixels IGNORE nunca entram. A soma de matrizes é associativa, então
    acumulações parciais podem ser combinadas em qualquer ordem.
    """

    def __init__(self, num_classes: int, counts: Optional[np.ndarray] = None):
        if num_classes < 1:
            raise ValueError("num_classes deve ser >= 1")
        self.num_classes = num_classes
        if counts is None:
            counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.shape != (num_classes, num_classes):
            raise ValueError(f"counts deve ter shape ({num_classes}, {num_classes})")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def copy(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.num_classes, self.counts.copy())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("Matrizes com número de classes diferente")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.num_classes == other.num_classes and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"<ConfusionMatrix(classes={self.num_classes}, pixels={self.total})>"
