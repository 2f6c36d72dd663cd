"""
Service de avaliação: matriz de confusão, mean IoU, trimap e qualidade da supervisão
"""
import csv
import io
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from boxsup.models.evaluation import ConfusionMatrix
from boxsup.models.geometry import IGNORE, LabelMap
from boxsup.schemas.report import IouReport, TrimapReport, TrimapRow
from boxsup.services.geometry_service import GeometryService
from boxsup.utils.exceptions import (
    DimensionMismatchException,
    EmptyMatrixException,
    LabelOutOfRangeException,
)
from boxsup.utils.io import atomic_write, atomic_write_text

logger = logging.getLogger(__name__)


class EvalService:
    """Service para métricas de segmentação"""

    @staticmethod
    def accumulate(
        conf: ConfusionMatrix,
        pred: LabelMap,
        gt: LabelMap,
        region: Optional[np.ndarray] = None,
    ) -> ConfusionMatrix:
        """
        Soma na matriz os pixels não IGNORE do gt dentro da região

        Args:
            conf: Matriz a incrementar (alterada in-place)
            pred: Predição (H, W)
            gt: Ground truth (H, W)
            region: Máscara booleana opcional restringindo os pixels contados

        Returns:
            ConfusionMatrix: A própria matriz, incrementada

        Raises:
            DimensionMismatchException: Shapes diferentes
            LabelOutOfRangeException: Rótulo >= C fora do IGNORE
        """
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape or (region is not None and np.shape(region) != gt.shape):
            raise DimensionMismatchException(f"Predição {pred.shape} e gt {gt.shape} incompatíveis")
        counted = gt != IGNORE
        if region is not None:
            counted &= np.asarray(region, dtype=bool)
        n = conf.num_classes
        gt_values = gt[counted].astype(np.int64)
        pred_values = pred[counted].astype(np.int64)
        if gt_values.size and (gt_values.max() >= n or pred_values.max() >= n):
            raise LabelOutOfRangeException(f"Rótulo fora de 0..{n - 1}")
        conf.counts += np.bincount(n * gt_values + pred_values, minlength=n * n).reshape(n, n)
        return conf

    @staticmethod
    def mean_iou(conf: ConfusionMatrix) -> IouReport:
        """
        IoU_c = TP / (TP + FP + FN); classes com união zero ficam fora da média

        Raises:
            EmptyMatrixException: Nenhum pixel contado
        """
        if conf.total == 0:
            raise EmptyMatrixException("Matriz de confusão sem pixels contados")
        counts = conf.counts.astype(np.float64)
        tp = np.diag(counts)
        union = counts.sum(axis=0) + counts.sum(axis=1) - tp
        per_class = [float(tp[c] / union[c]) if union[c] > 0 else None for c in range(conf.num_classes)]
        present = [v for v in per_class if v is not None]
        return IouReport(per_class=per_class, mean_iou=float(np.mean(present)), pixel_count=conf.total)

    @staticmethod
    def confusion(
        preds: Sequence[LabelMap],
        gts: Sequence[LabelMap],
        num_classes: int,
        workers: int = 1,
    ) -> ConfusionMatrix:
        """Matriz de um conjunto de imagens (acumulação paralela por imagem)"""
        if len(preds) != len(gts):
            raise DimensionMismatchException(f"{len(preds)} predições para {len(gts)} ground truths")
        parts = Parallel(n_jobs=workers, prefer="threads")(
            delayed(EvalService.accumulate)(ConfusionMatrix(num_classes), p, g) for p, g in zip(preds, gts)
        )
        total = ConfusionMatrix(num_classes)
        for part in parts:
            total = total + part
        return total

    @staticmethod
    def evaluate(
        preds: Sequence[LabelMap],
        gts: Sequence[LabelMap],
        num_classes: int,
        workers: int = 1,
    ) -> IouReport:
        return EvalService.mean_iou(EvalService.confusion(preds, gts, num_classes, workers))

    @staticmethod
    def trimap_eval(
        preds: Sequence[LabelMap],
        gts: Sequence[LabelMap],
        widths: Sequence[int],
        num_classes: int,
    ) -> TrimapReport:
        """
        mIoU dentro (boundary) e fora (interior) da banda em torno das transições do gt

        Args:
            preds: Predições
            gts: Ground truths
            widths: Larguras da banda (>= 1, crescentes)
            num_classes: C

        Returns:
            TrimapReport: Uma linha por largura; região sem pixels → None
        """
        if any(w < 1 for w in widths):
            raise ValueError("Larguras da banda devem ser >= 1")
        if len(preds) != len(gts):
            raise DimensionMismatchException(f"{len(preds)} predições para {len(gts)} ground truths")
        rows = []
        for width in widths:
            boundary = ConfusionMatrix(num_classes)
            interior = ConfusionMatrix(num_classes)
            for pred, gt in zip(preds, gts):
                part = GeometryService.trimap_partition(gt, width)
                EvalService.accumulate(boundary, pred, gt, part.boundary.pixels)
                EvalService.accumulate(interior, pred, gt, part.interior.pixels)
            rows.append(
                TrimapRow(
                    band_width=width,
                    boundary_miou=EvalService.mean_iou(boundary).mean_iou if boundary.total else None,
                    interior_miou=EvalService.mean_iou(interior).mean_iou if interior.total else None,
                )
            )
        return TrimapReport(rows=rows)

    @staticmethod
    def supervision_quality(
        supervision: Dict[str, LabelMap],
        gts: Dict[str, LabelMap],
        num_classes: int,
    ) -> float:
        """
        Mean IoU das máscaras de supervisão contra o GT, sobre o conjunto de treino

        Args:
            supervision: Mapa de supervisão por image_id
            gts: Máscara de GT por image_id
            num_classes: C

        Returns:
            float: Mean IoU (ids em ordem de inserção de `supervision`)
        """
        ids = [image_id for image_id in supervision if image_id in gts]
        return EvalService.evaluate([supervision[i] for i in ids], [gts[i] for i in ids], num_classes).mean_iou

    @staticmethod
    def write_iou_report(report: IouReport, directory: Path, name: str = "iou") -> Path:
        """
        Grava <name>.json e <name>.csv (classe, iou; última linha = média)

        Returns:
            Path: Caminho do JSON
        """
        directory = Path(directory)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["class", "iou"])
        for index, value in enumerate(report.per_class):
            writer.writerow([index, "" if value is None else f"{value:.6f}"])
        writer.writerow(["mean", f"{report.mean_iou:.6f}"])
        atomic_write_text(directory / f"{name}.csv", buffer.getvalue())
        return atomic_write_text(directory / f"{name}.json", report.model_dump_json(indent=2) + "\n")

    @staticmethod
    def write_trimap_report(report: TrimapReport, directory: Path, chart: bool = True) -> Path:
        """
        Grava trimap.json, trimap.csv (duas séries) e trimap.svg

        Returns:
            Path: Caminho do JSON
        """
        directory = Path(directory)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["band_width", "boundary_miou", "interior_miou"])
        for row in report.rows:
            writer.writerow([row.band_width, _csv_value(row.boundary_miou), _csv_value(row.interior_miou)])
        atomic_write_text(directory / "trimap.csv", buffer.getvalue())
        if chart:
            _render_trimap_svg(report, directory / "trimap.svg")
        return atomic_write_text(directory / "trimap.json", report.model_dump_json(indent=2) + "\n")


def _csv_value(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def _render_trimap_svg(report: TrimapReport, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    widths = [row.band_width for row in report.rows]
    boundary = [np.nan if row.boundary_miou is None else row.boundary_miou for row in report.rows]
    interior = [np.nan if row.interior_miou is None else row.interior_miou for row in report.rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(widths, boundary, marker="o", label="boundary")
    ax.plot(widths, interior, marker="s", label="interior")
    ax.set_xlabel("band width (px)")
    ax.set_ylabel("mean IoU")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="lower right")
    fig.tight_layout()

    def writer(tmp: Path) -> None:
        with plt.rc_context({"svg.hashsalt": "boxsup"}):
            fig.savefig(tmp, format="svg", metadata={"Date": None})

    try:
        return atomic_write(path, writer)
    finally:
        plt.close(fig)
