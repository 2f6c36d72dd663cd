"""
Service para a atualização de rótulos: custos E_o/E_r, seleção de candidatos e composição da supervisão
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax

from boxsup.models.assignment import CandidateCost, SegmentLabeling
from boxsup.models.geometry import BACKGROUND, LabelMap
from boxsup.models.network import ScoreMap
from boxsup.models.proposal import CandidateSegment, ProposalPool
from boxsup.models.sample import AnnotationKind, BoxAnnotation, Sample
from boxsup.schemas.files import LabelingRecord
from boxsup.services.geometry_service import GeometryService
from boxsup.utils.exceptions import DimensionMismatchException, UnsupervisedSampleException
from boxsup.utils.io import atomic_write_text

logger = logging.getLogger(__name__)

REGION_BOX_UNION_SEGMENT = "box_union_segment"
REGION_SEGMENT = "segment"


class AssignmentService:
    """Service para o passo de rótulos da alternância"""

    @staticmethod
    def overlap_cost(box: BoxAnnotation, seg: CandidateSegment, hypothesized_label: int) -> float:
        """
        Custo de sobreposição de um candidato

        Args:
            box: Caixa anotada
            seg: Segmento candidato
            hypothesized_label: Rótulo l_S hipotético do segmento

        Returns:
            float: (1 − IoU(caixa, retângulo justo do segmento)) · δ(l_B, l_S)
        """
        if box.label != hypothesized_label:
            return 0.0
        return 1.0 - GeometryService.box_iou(box.rect, seg.tight_box)

    @staticmethod
    def pool_overlap_cost(box: BoxAnnotation, pool: ProposalPool, labels: Sequence[int]) -> float:
        """
        E_o do pool inteiro: média dos custos de sobreposição sobre os N candidatos

        Args:
            box: Caixa anotada
            pool: Pool de candidatos
            labels: Rótulo atribuído a cada segmento (ordem dos ids)
        """
        if len(labels) != len(pool):
            raise DimensionMismatchException("Um rótulo por segmento do pool é obrigatório")
        total = sum(
            AssignmentService.overlap_cost(box, seg, label) for seg, label in zip(pool.segments, labels)
        )
        return total / len(pool)

    @staticmethod
    def regression_cost(
        scores: ScoreMap,
        box: BoxAnnotation,
        seg: CandidateSegment,
        region: str = REGION_BOX_UNION_SEGMENT,
    ) -> float:
        """
        Custo de regressão de um candidato (entropia cruzada média)

        A rotulagem hipotética é box.label em S e fundo em B∖S. A média é
        tomada sobre B∪S (padrão) ou apenas sobre S.

        Args:
            scores: Scores pré-softmax (C, H, W)
            box: Caixa anotada
            seg: Segmento candidato
            region: "box_union_segment" ou "segment"

        Returns:
            float: Perda média por pixel, ≥ 0
        """
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape[1:] != seg.mask.pixels.shape:
            raise DimensionMismatchException(
                f"Scores {scores.shape[1:]} não cobrem a máscara {seg.mask.pixels.shape}"
            )
        log_probs = log_softmax(scores, axis=0)
        in_segment = seg.mask.pixels
        if region == REGION_SEGMENT:
            return float(-log_probs[box.label][in_segment].mean())
        height, width = in_segment.shape
        in_box = GeometryService.rect_to_mask(box.rect, width, height)
        fg_loss = -log_probs[box.label][in_segment].sum()
        bg_loss = -log_probs[BACKGROUND][in_box & ~in_segment].sum()
        return float((fg_loss + bg_loss) / np.count_nonzero(in_box | in_segment))

    @staticmethod
    def candidate_costs(
        box: BoxAnnotation,
        pool: ProposalPool,
        scores: Optional[ScoreMap],
        lambda_weight: float,
        region: str = REGION_BOX_UNION_SEGMENT,
        log_probs: Optional[np.ndarray] = None,
    ) -> List[CandidateCost]:
        """
        Custos e_o, e_r e combinado de todos os candidatos para uma caixa

        Vetorizado sobre o pool; e_r só é calculado quando λ > 0.

        Returns:
            List[CandidateCost]: Um custo por segmento, na ordem dos ids
        """
        e_o = 1.0 - GeometryService.box_iou_many(box.rect, pool.boxes)
        n = len(pool)
        if lambda_weight > 0:
            if log_probs is None:
                if scores is None:
                    raise ValueError("Scores são obrigatórios quando λ > 0")
                log_probs = log_softmax(np.asarray(scores, dtype=np.float64), axis=0)
            e_r = _vectorized_regression_cost(log_probs, box, pool, region)
        else:
            e_r = np.zeros(n)
        combined = e_o + lambda_weight * e_r
        return [
            CandidateCost(segment_id=i, e_o=float(e_o[i]), e_r=float(e_r[i]), combined=float(combined[i]))
            for i in range(n)
        ]

    @staticmethod
    def select_candidates(
        boxes: Sequence[BoxAnnotation],
        pool: ProposalPool,
        scores: Optional[ScoreMap],
        lambda_weight: float,
        k: int,
        rng: np.random.Generator,
        region: str = REGION_BOX_UNION_SEGMENT,
        keep_costs: bool = False,
        margin: Optional[float] = None,
    ) -> SegmentLabeling:
        """
        Escolhe um segmento por caixa

        Para cada caixa, independentemente, os candidatos são ordenados por
        custo combinado crescente (empate → menor segment_id). Com k=1 vence
        o primeiro; com k>1 sorteia-se uniformemente entre os k primeiros.
        Com margin, o sorteio fica restrito aos k primeiros cujo custo não
        passa do melhor + margin (o primeiro sempre entra).

        Args:
            boxes: Caixas da imagem
            pool: Pool de candidatos (não vazio)
            scores: Scores da rede (pode ser None quando λ = 0)
            lambda_weight: Peso λ
            k: Tamanho do conjunto sorteado (≥ 1)
            rng: Gerador do fluxo (seed, imagem, época)
            region: Região de E_r
            keep_costs: Guarda os custos na rotulagem (dump/inspeção)
            margin: Folga de custo sobre o melhor candidato (None = sem corte)

        Returns:
            SegmentLabeling: Índice da caixa → id do segmento
        """
        if k < 1:
            raise ValueError("k deve ser >= 1")
        log_probs = None
        if lambda_weight > 0 and boxes:
            log_probs = log_softmax(np.asarray(scores, dtype=np.float64), axis=0)
        labeling = SegmentLabeling(image_id=pool.image_id)
        ids = np.arange(len(pool))
        for index, box in enumerate(boxes):
            costs = AssignmentService.candidate_costs(
                box, pool, scores, lambda_weight, region=region, log_probs=log_probs
            )
            combined = np.array([c.combined for c in costs])
            order = np.lexsort((ids, combined))
            top = order[:k]
            if margin is not None:
                top = top[combined[top] <= combined[order[0]] + margin]
            if len(top) == 1:
                choice = top[0]
            else:
                choice = top[int(rng.integers(len(top)))]
            labeling.selections[index] = int(choice)
            if keep_costs:
                labeling.costs[index] = costs
        return labeling

    @staticmethod
    def paint(
        masks: Sequence[np.ndarray],
        boxes: Sequence[BoxAnnotation],
        shape: Tuple[int, int],
    ) -> LabelMap:
        """
        Pinta uma máscara por caixa sobre um canvas de fundo

        Caixas maiores são pintadas primeiro e as menores por cima
        (empate de área → ordem da lista).

        Args:
            masks: Máscara booleana de cada caixa
            boxes: Caixas (fornecem rótulo e área)
            shape: (H, W) do canvas
        """
        canvas = np.full(shape, BACKGROUND, dtype=np.uint8)
        order = sorted(range(len(boxes)), key=lambda i: (-GeometryService.box_area(boxes[i].rect), i))
        for i in order:
            canvas[masks[i]] = boxes[i].label
        return canvas

    @staticmethod
    def compose_supervision(
        labeling: SegmentLabeling,
        boxes: Sequence[BoxAnnotation],
        pool: ProposalPool,
        shape: Tuple[int, int],
    ) -> LabelMap:
        """
        Compõe o mapa de supervisão a partir dos segmentos escolhidos

        Returns:
            LabelMap: Fundo em todo pixel não coberto; segmentos com o rótulo da caixa
        """
        if len(labeling.selections) != len(boxes):
            raise ValueError(
                f"Rotulagem incompleta: {len(labeling.selections)} seleções para {len(boxes)} caixas"
            )
        masks = [pool[labeling.selections[i]].mask.pixels for i in range(len(boxes))]
        return AssignmentService.paint(masks, boxes, shape)

    @staticmethod
    def training_target(
        sample: Sample,
        labeling: Optional[SegmentLabeling] = None,
        pool: Optional[ProposalPool] = None,
        kind: Optional[AnnotationKind] = None,
    ) -> LabelMap:
        """
        Alvo de treino de uma amostra (regra semi-supervisionada)

        Args:
            sample: Amostra
            labeling: Rotulagem corrente (amostras por caixa)
            pool: Pool da amostra (amostras por caixa)
            kind: Anotação usada (padrão: sample.annotation)

        Returns:
            LabelMap: Máscara de GT literal, ou a composição dos segmentos escolhidos

        Raises:
            UnsupervisedSampleException: Sem máscara e sem caixas
        """
        kind = kind or sample.annotation
        if kind == "mask" and sample.gt_mask is not None:
            return sample.gt_mask
        if sample.boxes is not None:
            if not sample.boxes:
                return np.full(sample.shape, BACKGROUND, dtype=np.uint8)
            if labeling is None or pool is None:
                raise ValueError(f"Amostra '{sample.image_id}' por caixa exige rotulagem e pool")
            return AssignmentService.compose_supervision(labeling, sample.boxes, pool, sample.shape)
        raise UnsupervisedSampleException(f"Amostra '{sample.image_id}' sem máscara e sem caixas")

    @staticmethod
    def dump_labeling(labeling: SegmentLabeling, epoch: int, directory: Path) -> Path:
        """Grava <image_id>.labeling.json (índice da caixa → id do segmento)"""
        record = LabelingRecord(image_id=labeling.image_id, epoch=epoch, selections=labeling.selections)
        path = Path(directory) / f"{labeling.image_id}.labeling.json"
        return atomic_write_text(path, record.model_dump_json(indent=2) + "\n")


def _vectorized_regression_cost(
    log_probs: np.ndarray,
    box: BoxAnnotation,
    pool: ProposalPool,
    region: str,
) -> np.ndarray:
    """e_r de todos os candidatos de uma vez (mesma definição de regression_cost)"""
    height, width = pool.shape
    stack = pool.masks.reshape(len(pool), -1).astype(np.float64)
    nll_fg = -log_probs[box.label].ravel()
    seg_area = stack.sum(axis=1)
    fg_sum = stack @ nll_fg
    if region == REGION_SEGMENT:
        return fg_sum / seg_area
    in_box = GeometryService.rect_to_mask(box.rect, width, height).ravel()
    nll_bg_box = np.where(in_box, -log_probs[BACKGROUND].ravel(), 0.0)
    bg_sum = nll_bg_box.sum() - stack @ nll_bg_box
    overlap = stack @ in_box.astype(np.float64)
    union = in_box.sum() + seg_area - overlap
    return (fg_sum + bg_sum) / union
