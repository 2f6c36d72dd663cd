"""
Argumentos e utilitários compartilhados pelos subcomandos
"""
import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from boxsup.config import settings
from boxsup.models.proposal import ProposalPool
from boxsup.models.sample import Sample
from boxsup.schemas.config import RunConfig, load_run_config
from boxsup.services.dataset_service import DatasetService
from boxsup.services.proposal_service import ProposalService
from boxsup.utils.exceptions import ConfigException
from boxsup.utils.io import atomic_write_text

logger = logging.getLogger(__name__)

CONFIG_SNAPSHOT = "config.json"


def add_common_arguments(parser: argparse.ArgumentParser, out_help: str = "Diretório do run") -> None:
    parser.add_argument("--config", help="Arquivo de configuração (TOML ou JSON)")
    parser.add_argument("--out", required=True, help=out_help)
    parser.add_argument("--seed", type=int, help="Sobrescreve o seed de todas as seções")
    parser.add_argument("--workers", type=int, help="Paralelismo por imagem (não altera resultados)")


def add_manifest_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", help="manifest.json (sobrescreve data.manifest)")


def load_config(args: argparse.Namespace) -> RunConfig:
    """Lê --config (ou os padrões) e aplica --seed"""
    config = load_run_config(args.config) if args.config else RunConfig()
    return config.with_seed(args.seed)


def resolve_workers(args: argparse.Namespace) -> int:
    workers = args.workers if args.workers is not None else settings.DEFAULT_WORKERS
    if workers < 1:
        raise ConfigException(f"--workers deve ser >= 1 (recebido {workers})")
    return workers


def manifest_path(args: argparse.Namespace, config: RunConfig) -> Path:
    """
    Caminho do manifest: --manifest, senão data.manifest

    Caminhos relativos são resolvidos contra o diretório atual.
    """
    value = getattr(args, "manifest", None) or config.data.manifest
    if not value:
        raise ConfigException("Nenhum manifest informado (data.manifest ou --manifest)")
    return Path(value)


def prepare_run_dir(out: str, config: RunConfig) -> Path:
    """Cria o diretório do run e grava o snapshot da configuração"""
    run_dir = Path(out)
    run_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(run_dir / CONFIG_SNAPSHOT, config.snapshot())
    return run_dir


def load_split(args: argparse.Namespace, config: RunConfig, split: str, workers: int) -> List[Sample]:
    path = manifest_path(args, config)
    samples = DatasetService.load_dataset(path, split=split, workers=workers)
    logger.info(f"{len(samples)} amostras do split '{split}' carregadas de {path}")
    return samples


def num_classes_for(args: argparse.Namespace, config: RunConfig) -> int:
    """Número de classes declarado no manifest"""
    return DatasetService.load_manifest(manifest_path(args, config)).num_classes


def collect_pools(
    samples: Sequence[Sample],
    config: RunConfig,
    workers: int,
    proposals_dir: Optional[str] = None,
) -> Dict[str, ProposalPool]:
    """
    Pools das amostras: importados quando há arquivo, gerados caso contrário

    Returns:
        Dict[str, ProposalPool]: Pools por image_id, na ordem das amostras
    """
    directory = proposals_dir or config.data.proposals_dir
    imported = ProposalService.load_pools(samples, Path(directory) if directory else None)
    missing = [s for s in samples if s.image_id not in imported]
    generated = ProposalService.generate_all(missing, config.proposer, workers) if missing else {}
    if missing:
        logger.info(f"{len(imported)} pools importados, {len(generated)} gerados")
    return {s.image_id: imported[s.image_id] if s.image_id in imported else generated[s.image_id] for s in samples}
