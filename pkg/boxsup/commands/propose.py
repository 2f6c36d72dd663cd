"""
Subcomando propose: gera os pools de propostas e mede o recall
"""
import argparse
import logging
from pathlib import Path

from boxsup.commands.common import (
    add_common_arguments,
    add_manifest_argument,
    load_config,
    manifest_path,
    prepare_run_dir,
    resolve_workers,
)
from boxsup.services.dataset_service import DatasetService
from boxsup.services.proposal_service import PROPOSALS_SUFFIX, ProposalService
from boxsup.utils.io import atomic_write_text

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("propose", help="Gera <image_id>.proposals.json para cada amostra")
    add_common_arguments(parser, out_help="Diretório das propostas")
    add_manifest_argument(parser)
    parser.add_argument("--split", help="Restringe a um split (padrão: todas as amostras)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_config(args)
    workers = resolve_workers(args)
    out = prepare_run_dir(args.out, config)
    samples = DatasetService.load_dataset(manifest_path(args, config), split=args.split, workers=workers)
    pools = ProposalService.generate_all(samples, config.proposer, workers)
    for image_id, pool in pools.items():
        ProposalService.export_proposals(pool, Path(out) / f"{image_id}{PROPOSALS_SUFFIX}")
    report = ProposalService.proposal_recall(pools, samples, config.eval.recall_iou)
    atomic_write_text(out / "proposal_recall.json", report.model_dump_json(indent=2) + "\n")
    logger.info(
        f"{len(pools)} pools (média {report.mean_pool_size:.1f} segmentos); "
        f"recall@{report.iou_threshold} = {report.recall:.3f} ({report.recalled}/{report.instances})"
    )
    return 0
