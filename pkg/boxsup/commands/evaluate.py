"""
Subcomandos eval e trimap: métricas de um diretório de predições contra o GT do manifest
"""
import argparse
import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np

from boxsup.commands.common import (
    add_common_arguments,
    add_manifest_argument,
    load_config,
    load_split,
    num_classes_for,
    resolve_workers,
)
from boxsup.commands.infer import PREDICTIONS_DIR
from boxsup.schemas.config import RunConfig
from boxsup.services.dataset_service import DatasetService
from boxsup.services.eval_service import EvalService
from boxsup.utils.exceptions import UnsupervisedSampleException

logger = logging.getLogger(__name__)

REPORTS_DIR = "reports"

PREDICTION_LABELS_NOTE = (
    "As predições devem conter só rótulos 0..C-1: um pixel 255 na predição gera LabelOutOfRange "
    "(exit 1), enquanto 255 no GT é IGNORE e fica fora da contagem."
)


def register(subparsers) -> None:
    for name, handler, help_text in (
        ("eval", handle_eval, "Mean IoU das predições (reports/iou.json e .csv)"),
        ("trimap", handle_trimap, "mIoU de borda e interior por largura de banda (reports/trimap.*)"),
    ):
        parser = subparsers.add_parser(
            name, help=help_text, description=f"{help_text}. {PREDICTION_LABELS_NOTE}"
        )
        add_common_arguments(parser)
        add_manifest_argument(parser)
        parser.add_argument("--pred-dir", help="Diretório com <image_id>.png (padrão: <out>/predictions)")
        parser.add_argument("--split", help="Split avaliado (padrão: data.test_split)")
        parser.set_defaults(handler=handler)


def _load_pairs(args: argparse.Namespace) -> Tuple[RunConfig, List[np.ndarray], List[np.ndarray], int, Path]:
    config = load_config(args)
    workers = resolve_workers(args)
    num_classes = num_classes_for(args, config)
    samples = load_split(args, config, args.split or config.data.test_split, workers)
    pred_dir = Path(args.pred_dir) if args.pred_dir else Path(args.out) / PREDICTIONS_DIR
    preds, gts = [], []
    for sample in samples:
        if sample.gt_mask is None:
            raise UnsupervisedSampleException(f"Amostra '{sample.image_id}' sem máscara de GT para avaliação")
        preds.append(DatasetService.read_mask(pred_dir / f"{sample.image_id}.png", num_classes))
        gts.append(sample.gt_mask)
    return config, preds, gts, num_classes, Path(args.out) / REPORTS_DIR


def handle_eval(args: argparse.Namespace) -> int:
    _, preds, gts, num_classes, reports = _load_pairs(args)
    report = EvalService.evaluate(preds, gts, num_classes, resolve_workers(args))
    path = EvalService.write_iou_report(report, reports)
    per_class = ", ".join("-" if v is None else f"{v:.3f}" for v in report.per_class)
    logger.info(f"Mean IoU {report.mean_iou:.4f} [{per_class}] em {len(preds)} imagens → {path}")
    return 0


def handle_trimap(args: argparse.Namespace) -> int:
    config, preds, gts, num_classes, reports = _load_pairs(args)
    report = EvalService.trimap_eval(preds, gts, config.eval.trimap_widths, num_classes)
    path = EvalService.write_trimap_report(report, reports)
    for row in report.rows:
        logger.info(f"Banda {row.band_width}px: borda {row.boundary_miou} interior {row.interior_miou}")
    logger.info(f"Relatório de trimap em {path}")
    return 0
