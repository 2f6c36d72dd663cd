"""
Subcomando train: treino alternado (BoxSup), modos mask/box/semi e baselines
"""
import argparse
import logging
from pathlib import Path

from boxsup.commands.common import (
    CONFIG_SNAPSHOT,
    add_common_arguments,
    add_manifest_argument,
    collect_pools,
    load_config,
    load_split,
    num_classes_for,
    prepare_run_dir,
    resolve_workers,
)
from boxsup.schemas.config import load_run_config
from boxsup.services.trainer_service import CHECKPOINT_DIR, LAST_CHECKPOINT, TrainerService
from boxsup.utils.exceptions import ConfigException
from boxsup.utils.io import require_file

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Treina a rede (history.jsonl e checkpoints no run)")
    add_common_arguments(parser)
    add_manifest_argument(parser)
    parser.add_argument("--proposals", help="Diretório de propostas (sobrescreve data.proposals_dir)")
    parser.add_argument(
        "--resume",
        action="store_true",
        help="Continua de checkpoints/last.npz do run (usa o config.json do run sem --config)",
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    run_dir = Path(args.out)
    if args.resume and not args.config:
        config = load_run_config(str(run_dir / CONFIG_SNAPSHOT)).with_seed(args.seed)
    else:
        config = load_config(args)
    workers = resolve_workers(args)

    num_classes = num_classes_for(args, config)
    if num_classes != config.net.num_classes:
        raise ConfigException(
            f"net.num_classes={config.net.num_classes} difere do manifest ({num_classes} classes)"
        )
    prepare_run_dir(args.out, config)

    samples = load_split(args, config, config.data.train_split, workers)
    kinds = TrainerService.annotation_kinds(samples, config.train.supervision_mode)
    pools = {}
    if config.train.baseline == "none":
        box_samples = [s for s in samples if kinds[s.image_id] == "box" and s.boxes]
        pools = collect_pools(box_samples, config, workers, args.proposals)

    if args.resume:
        checkpoint = require_file(run_dir / CHECKPOINT_DIR / LAST_CHECKPOINT)
        _, state = TrainerService.resume(checkpoint, samples, pools, config.train, run_dir, workers)
    else:
        _, state = TrainerService.train(samples, pools, config.net, config.train, run_dir, workers)

    if state.history:
        last = state.history[-1]
        logger.info(f"Treino concluído: {state.epoch} épocas, loss final {last.mean_loss:.4f}")
    return 0
