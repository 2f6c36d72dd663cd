"""
Service do algoritmo alternado: atualização de rótulos, época de rede, baselines estáticas e inferência
"""
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from boxsup.config import settings
from boxsup.models.assignment import SegmentLabeling
from boxsup.models.geometry import BACKGROUND, LabelMap
from boxsup.models.network import GradientSet, ModelParams
from boxsup.models.proposal import ProposalPool
from boxsup.models.sample import AnnotationKind, Sample
from boxsup.models.training import TrainState
from boxsup.schemas.config import NetConfig, TrainConfig
from boxsup.schemas.files import HistoryRecord
from boxsup.services.assignment_service import AssignmentService
from boxsup.services.dataset_service import DatasetService
from boxsup.services.eval_service import EvalService
from boxsup.services.geometry_service import GeometryService
from boxsup.services.pixelnet_service import PixelNetService
from boxsup.utils.exceptions import (
    ConfigException,
    DivergedGradientException,
    EmptyPoolException,
    UnsupervisedSampleException,
)
from boxsup.utils.io import atomic_write_text
from boxsup.utils.rng import rng_for

logger = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoints"
LAST_CHECKPOINT = "last.npz"
DIVERGED_CHECKPOINT = "diverged.npz"
HISTORY_FILE = "history.jsonl"


class TrainerService:
    """Service para o laço externo de treino e para a inferência"""

    @staticmethod
    def annotation_kinds(samples: Sequence[Sample], mode: str) -> Dict[str, AnnotationKind]:
        """
        Anotação usada por amostra no modo de supervisão

        mask e box forçam o tipo para todas as amostras; semi segue o
        tipo declarado em cada amostra.

        Raises:
            UnsupervisedSampleException: Amostra sem a anotação exigida
            ConfigException: semi sem ao menos uma amostra de cada tipo
        """
        kinds: Dict[str, AnnotationKind] = {}
        for sample in samples:
            kind = sample.annotation if mode == "semi" else mode
            if kind == "mask" and sample.gt_mask is None:
                raise UnsupervisedSampleException(f"Amostra '{sample.image_id}' sem máscara no modo {mode}")
            if kind == "box" and sample.boxes is None:
                raise UnsupervisedSampleException(f"Amostra '{sample.image_id}' sem caixas no modo {mode}")
            kinds[sample.image_id] = kind
        if mode == "semi" and not {"mask", "box"} <= set(kinds.values()):
            raise ConfigException("Modo semi exige amostras anotadas por máscara e por caixa")
        return kinds

    @staticmethod
    def static_rectangles(samples: Sequence[Sample]) -> Dict[str, LabelMap]:
        """
        Baseline de retângulos: cada caixa preenchida com seu rótulo

        Mesma regra de sobreposição da composição (caixas menores por cima).
        """
        supervision = {}
        for sample in samples:
            boxes = sample.boxes or []
            masks = [GeometryService.rect_to_mask(b.rect, sample.width, sample.height) for b in boxes]
            supervision[sample.image_id] = AssignmentService.paint(masks, boxes, sample.shape)
        return supervision

    @staticmethod
    def colormodel_mask(image: np.ndarray, rect, iterations: int) -> np.ndarray:
        """
        Frente de uma caixa por modelos de cor média (substituto simples do GrabCut)

        Começa com frente = interior da caixa e fundo = resto da imagem; a
        cada rodada ajusta a cor média de cada modelo e reatribui os pixels
        da caixa ao modelo mais próximo (empate → frente).

        Returns:
            np.ndarray: Máscara booleana contida na caixa
        """
        height, width = image.shape[:2]
        in_box = GeometryService.rect_to_mask(rect, width, height)
        foreground = in_box.copy()
        pixels = np.asarray(image, dtype=np.float64)
        for _ in range(iterations):
            background = ~foreground
            if not background.any():
                break
            fg_mean = pixels[foreground].mean(axis=0)
            bg_mean = pixels[background].mean(axis=0)
            d_fg = ((pixels - fg_mean) ** 2).sum(axis=-1)
            d_bg = ((pixels - bg_mean) ** 2).sum(axis=-1)
            updated = in_box & (d_fg <= d_bg)
            if not updated.any():
                break
            foreground = updated
        return foreground

    @staticmethod
    def static_colormodel(samples: Sequence[Sample], iterations: int) -> Dict[str, LabelMap]:
        """Baseline de modelo de cor, fixa por todo o treino"""
        supervision = {}
        for sample in samples:
            boxes = sample.boxes or []
            masks = [TrainerService.colormodel_mask(sample.image, b.rect, iterations) for b in boxes]
            supervision[sample.image_id] = AssignmentService.paint(masks, boxes, sample.shape)
        return supervision

    @staticmethod
    def epoch_update_labels(
        state: TrainState,
        samples: Sequence[Sample],
        pools: Mapping[str, ProposalPool],
        config: TrainConfig,
        kinds: Optional[Dict[str, AnnotationKind]] = None,
        workers: int = 1,
        dump_dir: Optional[Path] = None,
    ) -> Dict[str, LabelMap]:
        """
        Recalcula a supervisão das amostras por caixa com a rede atual

        Amostras por máscara recebem o GT literal. Na época 0, com
        epoch0_overlap_only, a seleção usa só E_o (λ = 0).

        Args:
            state: Estado (params e época corrente)
            samples: Amostras de treino
            pools: Pool de candidatos por image_id
            config: Hiperparâmetros
            kinds: Anotação por amostra (padrão: sample.annotation)
            workers: Paralelismo por imagem
            dump_dir: Diretório para <image_id>.labeling.json

        Returns:
            Dict[str, LabelMap]: Supervisão por image_id, na ordem das amostras
        """
        kinds = kinds or {s.image_id: s.annotation for s in samples}
        epoch = state.epoch
        lambda_weight = 0.0 if epoch == 0 and config.epoch0_overlap_only else config.lambda_weight
        box_samples = [s for s in samples if kinds[s.image_id] == "box"]
        for sample in box_samples:
            if sample.boxes and sample.image_id not in pools:
                raise EmptyPoolException(f"Sem pool de propostas para a amostra '{sample.image_id}'")

        results = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_update_sample_labels)(
                state.params,
                sample,
                pools.get(sample.image_id),
                lambda_weight,
                config.effective_k,
                config.er_region,
                rng_for(config.seed, sample.image_id, epoch),
                config.candidate_margin,
            )
            for sample in box_samples
        )
        estimated = {}
        for sample, (labeling, target) in zip(box_samples, results):
            estimated[sample.image_id] = target
            if dump_dir is not None:
                AssignmentService.dump_labeling(labeling, epoch, dump_dir)
        logger.debug(f"Época {epoch}: rótulos atualizados para {len(box_samples)} amostras (λ={lambda_weight})")

        supervision = {}
        for sample in samples:
            if kinds[sample.image_id] == "mask":
                supervision[sample.image_id] = AssignmentService.training_target(sample, kind="mask")
            else:
                supervision[sample.image_id] = estimated[sample.image_id]
        return supervision

    @staticmethod
    def epoch_update_network(
        state: TrainState,
        samples: Sequence[Sample],
        config: TrainConfig,
        workers: int = 1,
    ) -> Tuple[ModelParams, GradientSet, float]:
        """
        Uma época de SGD sobre a supervisão corrente

        Embaralhamento por (seed, época); gradientes de cada mini-batch
        calculados por imagem em paralelo e reduzidos na ordem do batch.

        Returns:
            Tuple[ModelParams, GradientSet, float]: Parâmetros, velocidade e perda média da época

        Raises:
            DivergedGradientException: Perda ou gradiente não finitos
        """
        lr = PixelNetService.lr_schedule(state.epoch, config.base_lr, config.lr_drop_every, config.lr_drop_factor)
        order = rng_for(config.seed, "shuffle", state.epoch).permutation(len(samples))
        params, velocity = state.params, state.velocity
        losses: List[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = [samples[i] for i in order[start : start + config.batch_size]]
            results = Parallel(n_jobs=workers, prefer="threads")(
                delayed(PixelNetService.loss_and_gradients)(params, s.image, state.supervision[s.image_id])
                for s in batch
            )
            batch_losses = [loss for loss, _ in results]
            if not np.all(np.isfinite(batch_losses)):
                raise DivergedGradientException(f"Perda não finita na época {state.epoch}")
            losses.extend(batch_losses)
            grads = GradientSet.sum(g for _, g in results).scale(1.0 / len(batch))
            params, velocity = PixelNetService.sgd_step(params, grads, lr, velocity, config.momentum)
        return params, velocity, float(np.mean(losses))

    @staticmethod
    def train(
        samples: Sequence[Sample],
        pools: Mapping[str, ProposalPool],
        net_config: NetConfig,
        config: TrainConfig,
        run_dir: Optional[Path] = None,
        workers: int = 1,
        state: Optional[TrainState] = None,
    ) -> Tuple[ModelParams, TrainState]:
        """
        Alterna atualização de rótulos e época de rede até config.epochs

        Args:
            samples: Amostras de treino
            pools: Pools por image_id (amostras por caixa)
            net_config: Arquitetura
            config: Hiperparâmetros de treino
            run_dir: Diretório do run (history.jsonl e checkpoints), opcional
            workers: Paralelismo por imagem
            state: Estado para continuar (resume); None começa do zero

        Returns:
            Tuple[ModelParams, TrainState]: Parâmetros finais e estado

        Raises:
            DivergedGradientException: Após gravar checkpoints/diverged.npz
        """
        if not samples:
            raise UnsupervisedSampleException("Nenhuma amostra de treino")
        kinds = TrainerService.annotation_kinds(samples, config.supervision_mode)
        if state is None:
            state = TrainState(params=PixelNetService.init_params(net_config))
        gts = DatasetService.ground_truths(samples)
        track_quality = len(gts) == len(samples)

        static = None
        if config.baseline != "none":
            box_samples = [s for s in samples if kinds[s.image_id] == "box"]
            if config.baseline == "rectangles":
                static = TrainerService.static_rectangles(box_samples)
            else:
                static = TrainerService.static_colormodel(box_samples, config.colormodel_iterations)
            logger.info(f"Supervisão estática '{config.baseline}' para {len(box_samples)} amostras")

        epochs = range(state.epoch, config.epochs)
        progress = tqdm(epochs, desc="train", unit="epoch", disable=not settings.SHOW_PROGRESS)
        for epoch in progress:
            if static is not None:
                state.supervision = {
                    s.image_id: static[s.image_id] if kinds[s.image_id] == "box" else s.gt_mask for s in samples
                }
            else:
                dump_dir = None
                if config.dump_labelings and run_dir is not None:
                    dump_dir = Path(run_dir) / "labelings" / f"epoch_{epoch:03d}"
                state.supervision = TrainerService.epoch_update_labels(
                    state, samples, pools, config, kinds, workers, dump_dir
                )
            quality = None
            if track_quality:
                quality = EvalService.supervision_quality(state.supervision, gts, net_config.num_classes)

            lr = PixelNetService.lr_schedule(epoch, config.base_lr, config.lr_drop_every, config.lr_drop_factor)
            try:
                params, velocity, mean_loss = TrainerService.epoch_update_network(state, samples, config, workers)
            except DivergedGradientException:
                if run_dir is not None:
                    TrainerService._checkpoint(state, Path(run_dir) / CHECKPOINT_DIR / DIVERGED_CHECKPOINT)
                logger.error(f"Treino divergiu na época {epoch}")
                raise
            state.params, state.velocity = params, velocity
            state.epoch = epoch + 1
            state.history.append(
                HistoryRecord(epoch=epoch, lr=lr, mean_loss=mean_loss, supervision_miou=quality)
            )
            quality_text = f"{quality:.4f}" if quality is not None else "-"
            logger.info(f"Época {epoch}: lr={lr:.2e} loss={mean_loss:.4f} supervision_miou={quality_text}")
            if run_dir is not None:
                TrainerService._checkpoint(state, Path(run_dir) / CHECKPOINT_DIR / LAST_CHECKPOINT)
                TrainerService.write_history(state.history, Path(run_dir) / HISTORY_FILE)
        return state.params, state

    @staticmethod
    def resume(
        checkpoint: Path,
        samples: Sequence[Sample],
        pools: Mapping[str, ProposalPool],
        config: TrainConfig,
        run_dir: Optional[Path] = None,
        workers: int = 1,
    ) -> Tuple[ModelParams, TrainState]:
        """
        Continua um treino a partir de um checkpoint

        Os fluxos aleatórios dependem só de (seed, imagem, época), então o
        histórico posterior é idêntico ao de um treino sem interrupção.
        """
        params, velocity, header = PixelNetService.load_checkpoint(checkpoint)
        if params.config is None:
            raise ConfigException(f"Checkpoint {checkpoint} sem configuração da rede")
        state = TrainState(
            params=params,
            velocity=velocity,
            epoch=int(header["epoch"]),
            history=[HistoryRecord.model_validate(h) for h in header.get("history", [])],
        )
        logger.info(f"Retomando de {checkpoint} na época {state.epoch}")
        return TrainerService.train(samples, pools, params.config, config, run_dir, workers, state)

    @staticmethod
    def infer(params: ModelParams, image: np.ndarray, scales: Sequence[float] = (1.0,)) -> LabelMap:
        """
        Rótulos por pixel com média de scores em várias escalas

        Para cada escala: redimensiona a imagem, forward, reamostra os scores
        de volta ao tamanho original. Argmax da média (empate → menor classe).
        Não usa propostas.
        """
        if not scales:
            raise ValueError("scales não pode ser vazio")
        height, width = image.shape[:2]
        total = None
        for scale in scales:
            resized = PixelNetService.resize_image(image, scale)
            scores = PixelNetService.forward(params, resized)
            if scores.shape[1:] != (height, width):
                scores = PixelNetService.resize_scores(scores, height, width)
            total = scores.copy() if total is None else total + scores
        mean_scores = total / len(scales)
        return np.argmax(mean_scores, axis=0).astype(np.uint8)

    @staticmethod
    def infer_all(
        params: ModelParams,
        samples: Sequence[Sample],
        scales: Sequence[float] = (1.0,),
        workers: int = 1,
    ) -> Dict[str, LabelMap]:
        predictions = Parallel(n_jobs=workers, prefer="threads")(
            delayed(TrainerService.infer)(params, s.image, scales) for s in samples
        )
        return {s.image_id: pred for s, pred in zip(samples, predictions)}

    @staticmethod
    def write_history(history: Sequence[HistoryRecord], path: Path) -> Path:
        """Regrava history.jsonl com um registro por época"""
        text = "".join(record.model_dump_json() + "\n" for record in history)
        return atomic_write_text(path, text)

    @staticmethod
    def _checkpoint(state: TrainState, path: Path) -> Path:
        return PixelNetService.save_checkpoint(
            path,
            state.params,
            state.velocity,
            epoch=state.epoch,
            history=[record.model_dump(mode="json") for record in state.history],
        )


def _update_sample_labels(
    params: ModelParams,
    sample: Sample,
    pool: Optional[ProposalPool],
    lambda_weight: float,
    k: int,
    region: str,
    rng: np.random.Generator,
    margin: Optional[float] = None,
) -> Tuple[SegmentLabeling, LabelMap]:
    if not sample.boxes:
        return SegmentLabeling(image_id=sample.image_id), np.full(sample.shape, BACKGROUND, dtype=np.uint8)
    scores = PixelNetService.forward(params, sample.image) if lambda_weight > 0 else None
    labeling = AssignmentService.select_candidates(
        sample.boxes, pool, scores, lambda_weight, k, rng, region, margin=margin
    )
    return labeling, AssignmentService.training_target(sample, labeling, pool, kind="box")
