"""
Utilitários de arquivo: escrita atômica e leitura de JSON com contexto
"""
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Callable, Union

from boxsup.utils.exceptions import MalformedFileException, MissingFileException

PathLike = Union[str, Path]


def atomic_write(path: PathLike, writer: Callable[[Path], None]) -> Path:
    """
    Escreve um arquivo via arquivo temporário + rename

    Args:
        path: Caminho final
        writer: Função que grava o conteúdo no caminho temporário recebido

    Returns:
        Path: Caminho final escrito
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=path.suffix, dir=path.parent)
    os.close(fd)
    tmp_path = Path(tmp_name)
    try:
        writer(tmp_path)
        os.replace(tmp_path, path)
    except Exception:
        tmp_path.unlink(missing_ok=True)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Escreve texto UTF-8 de forma atômica"""
    return atomic_write(path, lambda tmp: tmp.write_text(text, encoding="utf-8"))


def read_json(path: PathLike) -> Any:
    """
    Lê um arquivo JSON

    Args:
        path: Caminho do arquivo

    Returns:
        Any: Conteúdo decodificado

    Raises:
        MissingFileException: Se o arquivo não existir
        MalformedFileException: Se o JSON for inválido (com linha/coluna)
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileException(f"Arquivo não encontrado: {path}", details={"path": str(path)})
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MalformedFileException(
            f"JSON inválido em {path}:{e.lineno}:{e.colno}: {e.msg}",
            details={"path": str(path), "line": e.lineno, "column": e.colno},
        )


def require_file(path: PathLike) -> Path:
    """Garante que o arquivo existe e retorna o Path"""
    path = Path(path)
    if not path.is_file():
        raise MissingFileException(f"Arquivo não encontrado: {path}", details={"path": str(path)})
    return path
