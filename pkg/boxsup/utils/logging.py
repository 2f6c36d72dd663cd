"""
Configuração de logging e medição de tempo dos comandos
"""
import logging
import time
from contextlib import contextmanager
from typing import Iterator

from boxsup.config import settings


def setup_logging(level: str = None) -> None:
    """
    Configura o logger raiz com o formato padrão da aplicação

    Args:
        level: Nível de log (padrão: settings.LOG_LEVEL)
    """
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format=settings.LOG_FORMAT,
        force=True,
    )


@contextmanager
def log_duration(logger: logging.Logger, label: str) -> Iterator[None]:
    """
    Loga início, fim e duração de um bloco

    Args:
        logger: Logger do módulo chamador
        label: Descrição do bloco (ex: "train runs/a")
    """
    start_time = time.time()
    logger.info(f"Início: {label}")
    try:
        yield
    except Exception as e:
        process_time = time.time() - start_time
        logger.error(f"Erro: {label} - Exception: {str(e)} - Time: {process_time:.3f}s")
        raise
    process_time = time.time() - start_time
    logger.info(f"Fim: {label} - Time: {process_time:.3f}s")
