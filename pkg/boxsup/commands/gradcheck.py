"""
Subcomando gradcheck: backward contra diferenças finitas em precisão dupla
"""
import argparse
import logging
from pathlib import Path

from boxsup.commands.common import add_common_arguments, load_config
from boxsup.services.pixelnet_service import PixelNetService
from boxsup.utils.io import atomic_write_text

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="Verifica o gradiente analítico (exit 1 acima do limiar)")
    add_common_arguments(parser, out_help="Diretório do relatório")
    parser.add_argument("--seeds", type=int, default=10, help="Quantidade de sorteios (padrão: 10)")
    parser.add_argument("--size", type=int, default=8, help="Lado da imagem de teste (padrão: 8)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_config(args)
    base = config.net.seed
    report = PixelNetService.gradient_check(config.net, [base + i for i in range(args.seeds)], size=args.size)
    path = atomic_write_text(Path(args.out) / "gradcheck.json", report.model_dump_json(indent=2) + "\n")
    status = "ok" if report.passed else "FALHOU"
    logger.info(
        f"Gradcheck {status}: erro relativo máximo {report.max_relative_error:.3e} "
        f"(limiar {report.threshold:.0e}) → {path}"
    )
    return 0 if report.passed else 1
