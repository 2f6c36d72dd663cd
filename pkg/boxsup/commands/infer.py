"""
Subcomando infer: grava as predições (PNG) de um split
"""
import argparse
import logging
from pathlib import Path

from boxsup.commands.common import (
    add_common_arguments,
    add_manifest_argument,
    load_config,
    load_split,
    resolve_workers,
)
from boxsup.services.dataset_service import DatasetService
from boxsup.services.pixelnet_service import PixelNetService
from boxsup.services.trainer_service import CHECKPOINT_DIR, LAST_CHECKPOINT, TrainerService

logger = logging.getLogger(__name__)

PREDICTIONS_DIR = "predictions"


def register(subparsers) -> None:
    parser = subparsers.add_parser("infer", help="Prediz máscaras com um checkpoint (escalas de infer.scales)")
    add_common_arguments(parser)
    add_manifest_argument(parser)
    parser.add_argument("--checkpoint", help="Checkpoint .npz (padrão: <out>/checkpoints/last.npz)")
    parser.add_argument("--split", help="Split a predizer (padrão: data.test_split)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_config(args)
    workers = resolve_workers(args)
    run_dir = Path(args.out)
    checkpoint = Path(args.checkpoint) if args.checkpoint else run_dir / CHECKPOINT_DIR / LAST_CHECKPOINT
    params, _, header = PixelNetService.load_checkpoint(checkpoint)
    samples = load_split(args, config, args.split or config.data.test_split, workers)

    predictions = TrainerService.infer_all(params, samples, config.infer.scales, workers)
    out = run_dir / PREDICTIONS_DIR
    for image_id, labels in predictions.items():
        DatasetService.write_mask(out / f"{image_id}.png", labels)
    logger.info(
        f"{len(predictions)} predições em {out} (checkpoint época {header['epoch']}, escalas {config.infer.scales})"
    )
    return 0
