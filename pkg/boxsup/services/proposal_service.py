"""
Service para geração, importação e exportação dos pools de propostas
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import ValidationError
from scipy import ndimage
from skimage.segmentation import felzenszwalb

from boxsup.models.geometry import BinaryMask, decode_rle
from boxsup.models.proposal import ProposalPool
from boxsup.models.sample import Sample
from boxsup.schemas.config import ProposerConfig
from boxsup.schemas.files import RLEMaskRecord
from boxsup.schemas.report import RecallReport
from boxsup.utils.exceptions import (
    BoxSupException,
    DimensionMismatchException,
    EmptyMaskException,
    EmptyPoolException,
    MalformedFileException,
)
from boxsup.utils.io import atomic_write_text, read_json

logger = logging.getLogger(__name__)

PROPOSALS_SUFFIX = ".proposals.json"


class ProposalService:
    """Service para o pool fixo de segmentos candidatos de cada imagem"""

    @staticmethod
    def felzenszwalb_segment(image: np.ndarray, config: ProposerConfig) -> np.ndarray:
        """
        Particiona a imagem em superpixels (segmentação por grafo)

        Args:
            image: Imagem (H, W, 3) em [0, 1]
            config: Configuração do gerador

        Returns:
            np.ndarray: Rótulos (H, W) 0..R-1, numerados na ordem de varredura
        """
        image = np.asarray(image, dtype=np.float64)
        if image.size == 0:
            raise ValueError("Imagem vazia")
        labels = felzenszwalb(
            image,
            scale=config.graph_scale,
            sigma=config.sigma,
            min_size=config.min_region_size,
            channel_axis=-1 if image.ndim == 3 else None,
        )
        return _relabel_raster_order(labels)

    @staticmethod
    def hierarchical_merge(
        partition: np.ndarray,
        image: np.ndarray,
        config: ProposerConfig,
    ) -> List[np.ndarray]:
        """
        Agrupamento multinível: regiões base + fusões gulosas por cor média

        Cada rodada percorre os pares vizinhos em ordem crescente de
        distância entre cores médias (desempate pelos ids) e funde cada par
        cujos dois lados ainda não foram usados na rodada. Cada fusão gera
        uma nova máscara.

        Args:
            partition: Rótulos 0..R-1 de felzenszwalb_segment
            image: Imagem (H, W, 3)
            config: merge_levels e max_proposals

        Returns:
            List[np.ndarray]: Máscaras booleanas ordenadas por área decrescente,
            no máximo max_proposals
        """
        partition = np.asarray(partition)
        colors = np.asarray(image, dtype=np.float64).reshape(partition.size, -1)
        flat = partition.ravel()
        n_base = int(flat.max()) + 1

        sizes = np.bincount(flat, minlength=n_base).astype(np.float64)
        sums = np.stack(
            [np.bincount(flat, weights=colors[:, c], minlength=n_base) for c in range(colors.shape[1])],
            axis=1,
        )

        # região atual → (conjunto de rótulos base, soma de cor, tamanho)
        regions: Dict[int, Tuple[frozenset, np.ndarray, float]] = {
            r: (frozenset([r]), sums[r], sizes[r]) for r in range(n_base)
        }
        owner = np.arange(n_base)
        base_pairs = _adjacent_pairs(partition)
        outputs: List[frozenset] = [regions[r][0] for r in range(n_base)]
        next_id = n_base

        for level in range(config.merge_levels):
            pairs = {tuple(sorted((int(owner[a]), int(owner[b])))) for a, b in base_pairs}
            pairs = {p for p in pairs if p[0] != p[1]}
            if not pairs:
                break
            ranked = sorted(
                pairs,
                key=lambda p: (
                    float(np.linalg.norm(regions[p[0]][1] / regions[p[0]][2] - regions[p[1]][1] / regions[p[1]][2])),
                    p[0],
                    p[1],
                ),
            )
            used = set()
            for a, b in ranked:
                if a in used or b in used:
                    continue
                used.update((a, b))
                members_a, sum_a, size_a = regions.pop(a)
                members_b, sum_b, size_b = regions.pop(b)
                members = members_a | members_b
                regions[next_id] = (members, sum_a + sum_b, size_a + size_b)
                owner[list(members)] = next_id
                outputs.append(members)
                next_id += 1
            logger.debug(f"Rodada {level + 1}: {len(used) // 2} fusões, {len(regions)} regiões")

        masks = [np.isin(partition, sorted(members)) for members in outputs]
        areas = [int(m.sum()) for m in masks]
        order = sorted(range(len(masks)), key=lambda i: (-areas[i], i))
        return [masks[i] for i in order[: config.max_proposals]]

    @staticmethod
    def boundary_variants(mask: np.ndarray, radius: int) -> List[np.ndarray]:
        """
        Versões erodidas e dilatadas de uma região, raio 1..radius

        A borda da imagem não erode a região. Erosões que esvaziam a
        máscara são descartadas.

        Returns:
            List[np.ndarray]: Para cada raio, a erosão seguida da dilatação
        """
        mask = np.asarray(mask, dtype=bool)
        variants = []
        for r in range(1, radius + 1):
            eroded = ndimage.binary_erosion(mask, iterations=r, border_value=1)
            if eroded.any():
                variants.append(eroded)
            variants.append(ndimage.binary_dilation(mask, iterations=r))
        return variants

    @staticmethod
    def generate_proposals(image: np.ndarray, config: ProposerConfig, image_id: str = "") -> ProposalPool:
        """
        Gera o pool de candidatos de uma imagem

        Args:
            image: Imagem (H, W, 3) em [0, 1]
            config: Configuração do gerador
            image_id: Identificador gravado no pool

        Returns:
            ProposalPool: Pool deduplicado (mask IoU par a par ≤ dedup_iou),
            função pura de (imagem, config)
        """
        partition = ProposalService.felzenszwalb_segment(image, config)
        candidates = ProposalService.hierarchical_merge(partition, image, config)
        if config.boundary_jitter:
            candidates = [
                variant
                for mask in candidates
                for variant in [mask, *ProposalService.boundary_variants(mask, config.boundary_jitter)]
            ]
        kept: List[np.ndarray] = []
        kept_flat = np.zeros((0, partition.size), dtype=bool)
        for mask in candidates:
            if len(kept) == config.max_proposals:
                break
            if mask.sum() < min(config.min_region_size, partition.size):
                continue
            flat = mask.ravel()
            if kept:
                inter = (kept_flat & flat).sum(axis=1)
                union = (kept_flat | flat).sum(axis=1)
                if np.any(inter / union > config.dedup_iou):
                    continue
            kept.append(mask)
            kept_flat = np.vstack([kept_flat, flat[None, :]])
        logger.debug(f"Propostas '{image_id}': {len(candidates)} candidatas, {len(kept)} após dedup")
        return ProposalPool.from_masks(image_id, kept)

    @staticmethod
    def generate_all(
        samples: Sequence[Sample],
        config: ProposerConfig,
        workers: int = 1,
    ) -> Dict[str, ProposalPool]:
        """
        Gera os pools de várias imagens em paralelo

        Returns:
            Dict[str, ProposalPool]: Pools na ordem das amostras
        """
        pools = Parallel(n_jobs=workers)(
            delayed(ProposalService.generate_proposals)(s.image, config, s.image_id) for s in samples
        )
        return {s.image_id: pool for s, pool in zip(samples, pools)}

    @staticmethod
    def export_proposals(pool: ProposalPool, path: Path) -> Path:
        """
        Grava o pool como lista JSON de objetos RLE

        Args:
            pool: Pool a exportar
            path: Arquivo de destino (<image_id>.proposals.json)

        Returns:
            Path: Caminho escrito
        """
        records = [
            RLEMaskRecord(w=seg.mask.width, h=seg.mask.height, runs=seg.mask.runs).model_dump()
            for seg in pool.segments
        ]
        text = "[\n" + ",\n".join(json.dumps(r, separators=(",", ":")) for r in records) + "\n]\n"
        return atomic_write_text(path, text)

    @staticmethod
    def import_proposals(
        path: Path,
        image_id: Optional[str] = None,
        image_shape: Optional[Tuple[int, int]] = None,
    ) -> ProposalPool:
        """
        Lê um pool externo (sem deduplicação)

        Args:
            path: Arquivo JSON com lista de máscaras RLE
            image_id: Id da imagem (padrão: prefixo do nome do arquivo)
            image_shape: (H, W) esperado, quando conhecido

        Returns:
            ProposalPool: Pool na ordem do arquivo

        Raises:
            MalformedFileException: JSON inválido ou registro fora do formato
            EmptyPoolException: Lista vazia
            BadRLEException: Runs inválidos
            DimensionMismatchException: Dimensões diferentes da imagem
        """
        path = Path(path)
        if image_id is None:
            image_id = path.name[: -len(PROPOSALS_SUFFIX)] if path.name.endswith(PROPOSALS_SUFFIX) else path.stem
        raw = read_json(path)
        if not isinstance(raw, list):
            raise MalformedFileException(f"{path}: esperado uma lista JSON de máscaras RLE")
        if len(raw) == 0:
            raise EmptyPoolException(f"{path}: lista de propostas vazia")

        masks = []
        for index, item in enumerate(raw):
            try:
                record = RLEMaskRecord.model_validate(item)
            except ValidationError as e:
                raise MalformedFileException(
                    f"{path}: máscara {index} fora do formato RLE", details=e.errors(include_url=False)
                )
            if image_shape is not None and (record.h, record.w) != tuple(image_shape):
                raise DimensionMismatchException(
                    f"{path}: máscara {index} tem {record.w}x{record.h}, imagem tem {image_shape[1]}x{image_shape[0]}"
                )
            try:
                pixels = decode_rle(record.w, record.h, record.runs)
            except BoxSupException as e:
                e.message = f"{path}: máscara {index}: {e.message}"
                raise
            if not pixels.any():
                raise EmptyMaskException(f"{path}: máscara {index} sem pixels")
            masks.append(pixels)
        return ProposalPool.from_masks(image_id, masks)

    @staticmethod
    def load_pools(
        samples: Sequence[Sample],
        proposals_dir: Optional[Path] = None,
    ) -> Dict[str, ProposalPool]:
        """
        Importa os pools das amostras (manifest ou diretório de propostas)

        Returns:
            Dict[str, ProposalPool]: Pools por image_id; amostras sem arquivo ficam de fora
        """
        pools: Dict[str, ProposalPool] = {}
        for sample in samples:
            path = None
            if proposals_dir is not None:
                candidate = Path(proposals_dir) / f"{sample.image_id}{PROPOSALS_SUFFIX}"
                path = candidate if candidate.is_file() else None
            if path is None and sample.proposals_path:
                path = Path(sample.proposals_path)
            if path is not None:
                pools[sample.image_id] = ProposalService.import_proposals(path, sample.image_id, sample.shape)
        return pools

    @staticmethod
    def proposal_recall(
        pools: Dict[str, ProposalPool],
        samples: Sequence[Sample],
        iou_threshold: float = 0.5,
    ) -> RecallReport:
        """
        Fração das instâncias de GT com algum candidato de mask IoU ≥ limiar

        Args:
            pools: Pools por image_id
            samples: Amostras com gt_instances
            iou_threshold: Limiar de IoU

        Returns:
            RecallReport: Contagens e recall
        """
        instances = 0
        recalled = 0
        for sample in samples:
            if not sample.gt_instances or sample.image_id not in pools:
                continue
            pool = pools[sample.image_id]
            stack = pool.masks.reshape(len(pool), -1)
            for _, instance in sample.gt_instances:
                gt = instance.pixels.ravel()
                union = (stack | gt).sum(axis=1)
                inter = (stack & gt).sum(axis=1)
                best = float(np.max(np.where(union > 0, inter / np.maximum(union, 1), 1.0)))
                instances += 1
                recalled += int(best >= iou_threshold)
        sizes = [len(p) for p in pools.values()]
        return RecallReport(
            iou_threshold=iou_threshold,
            instances=instances,
            recalled=recalled,
            recall=recalled / instances if instances else 0.0,
            mean_pool_size=float(np.mean(sizes)) if sizes else 0.0,
        )


def _relabel_raster_order(labels: np.ndarray) -> np.ndarray:
    """Renumera rótulos como 0..R-1 pela ordem da primeira ocorrência"""
    flat = labels.ravel()
    _, first_index, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(first_index.size, dtype=np.int64)
    rank[np.argsort(first_index, kind="stable")] = np.arange(first_index.size)
    return rank[inverse].reshape(labels.shape)


def _adjacent_pairs(partition: np.ndarray) -> np.ndarray:
    """Pares distintos (a, b) de regiões 4-vizinhas, a < b"""
    horizontal = np.stack([partition[:, :-1].ravel(), partition[:, 1:].ravel()], axis=1)
    vertical = np.stack([partition[:-1, :].ravel(), partition[1:, :].ravel()], axis=1)
    pairs = np.concatenate([horizontal, vertical])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)
