"""
Tipos geométricos sobre a grade de pixels: retângulos, máscaras binárias e mapas de rótulos
"""
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from boxsup.utils.exceptions import BadRLEException, DimensionMismatchException

# Rótulo sentinela excluído de perdas e métricas (convenção 255 dos PNGs de GT)
IGNORE = 255
BACKGROUND = 0

# Mapa de rótulos: np.ndarray (H, W) uint8 com valores em {0..C-1} ∪ {IGNORE}
LabelMap = np.ndarray


class PixelRect(BaseModel):
    """
    Retângulo alinhado aos eixos em coordenadas inteiras semiabertas
    ([x0, x1) × [y0, y1))
    """
    model_config = ConfigDict(frozen=True)

    x0: int
    y0: int
    x1: int
    y1: int

    @model_validator(mode="after")
    def validate_extent(self):
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError(f"Retângulo degenerado: ({self.x0},{self.y0},{self.x1},{self.y1})")
        return self

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple:
        return (self.x0, self.y0, self.x1, self.y1)

    def fits(self, width: int, height: int) -> bool:
        """Verifica se o retângulo está contido numa imagem width × height"""
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 <= width and self.y1 <= height

    def __repr__(self):
        return f"<PixelRect({self.x0},{self.y0},{self.x1},{self.y1})>"


class BinaryMask:
    """
    Máscara binária H × W

    Internamente guarda o array booleano; `runs` expõe a codificação
    run-length em ordem row-major como lista plana [start, len, ...].
    """

    __slots__ = ("_pixels",)

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=bool)
        if pixels.ndim != 2:
            raise DimensionMismatchException(f"Máscara deve ser 2D, recebido shape {pixels.shape}")
        pixels = pixels.copy()
        pixels.setflags(write=False)
        self._pixels = pixels

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def area(self) -> int:
        return int(self._pixels.sum())

    @property
    def runs(self) -> List[int]:
        return encode_rle(self._pixels)

    @classmethod
    def from_rle(cls, width: int, height: int, runs: Sequence[int]) -> "BinaryMask":
        return cls(decode_rle(width, height, runs))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self._pixels.shape == other._pixels.shape and bool(np.array_equal(self._pixels, other._pixels))

    def __hash__(self):
        return hash((self._pixels.shape, self._pixels.tobytes()))

    def __repr__(self):
        return f"<BinaryMask(w={self.width}, h={self.height}, area={self.area})>"


def encode_rle(pixels: np.ndarray) -> List[int]:
    """
    Codifica uma máscara em runs [start, len, ...] (índices row-major)

    Args:
        pixels: Array booleano 2D

    Returns:
        List[int]: Runs ordenados e maximais
    """
    flat = np.asarray(pixels, dtype=np.int8).ravel()
    padded = np.concatenate(([0], flat, [0]))
    changes = np.flatnonzero(np.diff(padded))
    starts = changes[0::2]
    lengths = changes[1::2] - starts
    return np.column_stack((starts, lengths)).ravel().astype(int).tolist()


def decode_rle(width: int, height: int, runs: Sequence[int]) -> np.ndarray:
    """
    Decodifica runs [start, len, ...] numa máscara booleana

    Args:
        width: Largura em pixels
        height: Altura em pixels
        runs: Lista plana de pares (start, len)

    Returns:
        np.ndarray: Máscara (height, width)

    Raises:
        BadRLEException: Runs ímpares, negativos, fora de ordem, sobrepostos ou além de w·h
    """
    if width < 1 or height < 1:
        raise BadRLEException(f"Dimensões inválidas: {width}x{height}")
    if len(runs) % 2 != 0:
        raise BadRLEException("Lista de runs com tamanho ímpar")
    total = width * height
    flat = np.zeros(total, dtype=bool)
    previous_end = 0
    for i in range(0, len(runs), 2):
        start, length = int(runs[i]), int(runs[i + 1])
        if start < 0 or length <= 0:
            raise BadRLEException(f"Run inválido na posição {i // 2}: start={start}, len={length}")
        if start < previous_end:
            raise BadRLEException(f"Runs fora de ordem ou sobrepostos na posição {i // 2}")
        if start + length > total:
            raise BadRLEException(f"Run na posição {i // 2} ultrapassa w·h={total}")
        flat[start:start + length] = True
        previous_end = start + length
    return flat.reshape(height, width)


@dataclass(frozen=True)
class TrimapPartition:
    """Partição de avaliação em banda de borda e interior"""
    boundary: BinaryMask
    interior: BinaryMask
    band_width: int
