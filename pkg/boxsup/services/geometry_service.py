"""
Service para geometria da grade de pixels: IoU, retângulos justos e trimaps
"""
import numpy as np
from scipy import ndimage

from boxsup.models.geometry import IGNORE, BinaryMask, LabelMap, PixelRect, TrimapPartition
from boxsup.utils.exceptions import DimensionMismatchException, EmptyMaskException


class GeometryService:
    """Operações puras sobre retângulos e máscaras"""

    @staticmethod
    def box_area(rect: PixelRect) -> int:
        return rect.area

    @staticmethod
    def box_iou(a: PixelRect, b: PixelRect) -> float:
        """
        IoU entre dois retângulos em contagem exata de pixels

        Args:
            a: Primeiro retângulo
            b: Segundo retângulo

        Returns:
            float: |a∩b| / |a∪b| em [0, 1] (disjuntos → 0)
        """
        iw = min(a.x1, b.x1) - max(a.x0, b.x0)
        ih = min(a.y1, b.y1) - max(a.y0, b.y0)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return inter / (GeometryService.box_area(a) + GeometryService.box_area(b) - inter)

    @staticmethod
    def box_iou_many(rect: PixelRect, boxes: np.ndarray) -> np.ndarray:
        """
        IoU de um retângulo contra N retângulos (N, 4) de uma vez

        Returns:
            np.ndarray: (N,) float64, igual elemento a elemento a box_iou
        """
        boxes = np.asarray(boxes, dtype=np.int64).reshape(-1, 4)
        iw = np.clip(np.minimum(rect.x1, boxes[:, 2]) - np.maximum(rect.x0, boxes[:, 0]), 0, None)
        ih = np.clip(np.minimum(rect.y1, boxes[:, 3]) - np.maximum(rect.y0, boxes[:, 1]), 0, None)
        inter = iw * ih
        areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
        return inter / (rect.area + areas - inter)

    @staticmethod
    def tight_bbox(mask: BinaryMask) -> PixelRect:
        """
        Menor retângulo que cobre todos os pixels de frente

        Args:
            mask: Máscara com pelo menos um pixel

        Returns:
            PixelRect: Retângulo justo

        Raises:
            EmptyMaskException: Se a máscara não tiver pixels
        """
        pixels = mask.pixels if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
        rows = np.flatnonzero(pixels.any(axis=1))
        if rows.size == 0:
            raise EmptyMaskException("Retângulo justo de máscara vazia")
        cols = np.flatnonzero(pixels.any(axis=0))
        return PixelRect(x0=int(cols[0]), y0=int(rows[0]), x1=int(cols[-1]) + 1, y1=int(rows[-1]) + 1)

    @staticmethod
    def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
        """
        IoU pixel a pixel entre duas máscaras

        Returns:
            float: Interseção sobre união; duas máscaras vazias → 1.0

        Raises:
            DimensionMismatchException: Se as dimensões forem diferentes
        """
        pa, pb = a.pixels, b.pixels
        if pa.shape != pb.shape:
            raise DimensionMismatchException(
                f"mask_iou com dimensões diferentes: {pa.shape} vs {pb.shape}"
            )
        union = int(np.count_nonzero(pa | pb))
        if union == 0:
            return 1.0
        return int(np.count_nonzero(pa & pb)) / union

    @staticmethod
    def rect_to_mask(rect: PixelRect, width: int, height: int) -> np.ndarray:
        """Rasteriza o retângulo (recortado à imagem) como array booleano (H, W)"""
        pixels = np.zeros((height, width), dtype=bool)
        pixels[max(rect.y0, 0):min(rect.y1, height), max(rect.x0, 0):min(rect.x1, width)] = True
        return pixels

    @staticmethod
    def trimap_partition(gt: LabelMap, band_width: int) -> TrimapPartition:
        """
        Divide os pixels avaliados em banda de borda e interior

        Uma transição é um par de pixels 4-vizinhos com rótulos diferentes,
        nenhum deles IGNORE; os dois pixels do par ficam à distância 0 da
        transição. A borda é tudo a distância de Chebyshev < band_width
        desses pixels, restrito a pixels não IGNORE.

        Args:
            gt: Mapa de rótulos de referência
            band_width: Largura da banda em pixels (0 → borda vazia)

        Returns:
            TrimapPartition: Borda e interior disjuntos e exaustivos
        """
        if band_width < 0:
            raise ValueError("band_width deve ser >= 0")
        gt = np.asarray(gt)
        valid = gt != IGNORE
        seeds = np.zeros(gt.shape, dtype=bool)
        if band_width > 0:
            horizontal = (gt[:, 1:] != gt[:, :-1]) & valid[:, 1:] & valid[:, :-1]
            vertical = (gt[1:, :] != gt[:-1, :]) & valid[1:, :] & valid[:-1, :]
            seeds[:, 1:] |= horizontal
            seeds[:, :-1] |= horizontal
            seeds[1:, :] |= vertical
            seeds[:-1, :] |= vertical
            if band_width > 1 and seeds.any():
                structure = np.ones((2 * band_width - 1, 2 * band_width - 1), dtype=bool)
                seeds = ndimage.binary_dilation(seeds, structure=structure)
        boundary = seeds & valid
        interior = valid & ~boundary
        return TrimapPartition(
            boundary=BinaryMask(boundary),
            interior=BinaryMask(interior),
            band_width=band_width,
        )
