"""
Ponto de entrada da linha de comando
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from boxsup.commands import COMMANDS
from boxsup.config import settings
from boxsup.utils.exceptions import BoxSupException
from boxsup.utils.logging import log_duration, setup_logging

logger = logging.getLogger("boxsup")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    """Parser com um subparser por comando registrado"""
    parser = argparse.ArgumentParser(
        prog="boxsup",
        description=f"{settings.APP_NAME} {settings.APP_VERSION}: segmentação supervisionada por caixas",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


# Exception Handlers
def boxsup_exception_handler(exc: BoxSupException) -> int:
    """Handler para exceções da aplicação"""
    logger.error(f"[{exc.code}] {exc.message}")
    if exc.details:
        logger.error(f"Detalhes: {exc.details}")
    return exc.exit_code


def validation_exception_handler(exc: ValidationError) -> int:
    """Handler para erros de validação do Pydantic (configuração)"""
    logger.error(f"Erro de validação da configuração ({exc.title})")
    for error in exc.errors(include_url=False):
        field = " -> ".join(str(loc) for loc in error["loc"])
        logger.error(f"  {field}: {error['msg']}")
    return EXIT_USAGE


def general_exception_handler(exc: Exception) -> int:
    """Handler para exceções não tratadas"""
    logger.error(f"Erro interno: {exc}", exc_info=settings.debug)
    return EXIT_RUNTIME


def run(argv: Optional[List[str]] = None) -> int:
    """
    Executa um subcomando

    Args:
        argv: Argumentos (padrão: sys.argv[1:])

    Returns:
        int: 0 sucesso, 1 erro de execução/dados, 2 erro de uso/configuração
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    setup_logging()
    try:
        with log_duration(logger, f"{args.command} {args.out}"):
            return args.handler(args)
    except BoxSupException as exc:
        return boxsup_exception_handler(exc)
    except ValidationError as exc:
        return validation_exception_handler(exc)
    except Exception as exc:
        return general_exception_handler(exc)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
