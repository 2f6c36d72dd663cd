"""
Subcomando synth: gera o dataset sintético
"""
import argparse
import logging

from boxsup.commands.common import add_common_arguments, load_config, prepare_run_dir, resolve_workers
from boxsup.services.dataset_service import DatasetService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="Gera o dataset sintético (imagens, máscaras, caixas, manifest)")
    add_common_arguments(parser, out_help="Raiz do dataset")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_config(args)
    root = prepare_run_dir(args.out, config)
    manifest, path = DatasetService.synth_generate(config.synth, root, resolve_workers(args))
    kinds = [entry.annotation for entry in manifest.samples if entry.split == "train"]
    logger.info(
        f"Manifest {path}: {len(kinds)} treino ({kinds.count('mask')} por máscara), "
        f"{len(manifest.samples) - len(kinds)} teste"
    )
    return 0
