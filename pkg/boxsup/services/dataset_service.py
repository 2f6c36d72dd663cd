"""
Service de dados: gerador sintético determinístico e I/O de imagens, máscaras, caixas e manifest

Layout de um dataset gerado:
    images/<id>.png            RGB 8 bits
    masks/<id>.png             rótulos 8 bits (255 = IGNORE)
    instances/<id>.png         id da instância visível (0 = nenhuma)
    boxes/<id>.boxes.jsonl     uma caixa por linha
    manifest.json
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from PIL import Image
from pydantic import ValidationError

from boxsup.models.geometry import BACKGROUND, IGNORE, BinaryMask, LabelMap, PixelRect
from boxsup.models.sample import BoxAnnotation, Sample
from boxsup.schemas.config import SynthConfig
from boxsup.schemas.files import BoxRecord, DatasetManifest, ManifestEntry
from boxsup.services.geometry_service import GeometryService
from boxsup.utils.exceptions import (
    BoxOutOfBoundsException,
    DimensionMismatchException,
    InconsistentAnnotationException,
    LabelOutOfRangeException,
    MalformedFileException,
    PlacementFailedException,
    UnsupportedBitDepthException,
)
from boxsup.utils.io import atomic_write, atomic_write_text, read_json, require_file
from boxsup.utils.rng import rng_for

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
BOXES_SUFFIX = ".boxes.jsonl"

# Cor base de cada forma (RGB em [0, 1]); o fundo é escuro e neutro
CLASS_COLORS = {
    "disk": (0.85, 0.25, 0.20),
    "rectangle": (0.20, 0.70, 0.30),
    "triangle": (0.25, 0.35, 0.85),
}
BACKGROUND_COLOR = (0.15, 0.15, 0.15)


class DatasetService:
    """Service para geração e leitura de datasets"""

    @staticmethod
    def synth_sample(config: SynthConfig, split: str, index: int, annotation: str = "mask") -> Sample:
        """
        Gera uma amostra sintética em memória

        Determinística por (seed, split, índice). Instâncias posteriores
        ocultam as anteriores; um posicionamento é rejeitado se deixar
        alguma instância com área visível < min_visible_area. As caixas
        cobrem a parte VISÍVEL de cada instância.

        Raises:
            PlacementFailedException: max_retries tentativas sem posicionamento válido
        """
        rng = rng_for(config.seed, "synth", split, index)
        size = config.image_size
        image_id = f"{split}_{index:04d}"
        ys, xs = np.mgrid[0:size, 0:size] + 0.5

        image = np.empty((size, size, 3))
        image[:] = np.clip(np.asarray(BACKGROUND_COLOR) + rng.normal(0.0, config.color_jitter, 3), 0.0, 1.0)
        instance_map = np.zeros((size, size), dtype=np.uint8)
        labels: List[int] = []

        count = int(rng.integers(config.instances_min, config.instances_max + 1))
        for _ in range(count):
            for _attempt in range(config.max_retries):
                class_index = int(rng.integers(len(config.classes)))
                extent = rng.uniform(config.size_min, config.size_max) * size
                cx = rng.uniform(extent / 2, size - extent / 2)
                cy = rng.uniform(extent / 2, size - extent / 2)
                aspect = rng.uniform(0.6, 1.0)
                shape = _rasterize(config.classes[class_index], xs, ys, cx, cy, extent, aspect)
                if shape.sum() < config.min_visible_area:
                    continue
                if not config.allow_occlusion and np.any(instance_map[shape] > 0):
                    continue
                candidate = instance_map.copy()
                candidate[shape] = len(labels) + 1
                visible = np.bincount(candidate.ravel(), minlength=len(labels) + 2)[1:]
                if np.any(visible < config.min_visible_area):
                    continue
                color = np.asarray(CLASS_COLORS[config.classes[class_index]]) + rng.normal(0.0, config.color_jitter, 3)
                image[shape] = np.clip(color, 0.0, 1.0)
                instance_map = candidate
                labels.append(class_index + 1)
                break
            else:
                raise PlacementFailedException(
                    f"'{image_id}': nenhuma posição válida após {config.max_retries} tentativas",
                    details={"image_id": image_id, "placed": len(labels), "requested": count},
                )

        image = image + rng.normal(0.0, config.pixel_noise, image.shape)
        image = _quantize(image)
        gt_mask = np.zeros((size, size), dtype=np.uint8)
        instances = []
        boxes = []
        for instance_id, label in enumerate(labels, start=1):
            visible = BinaryMask(instance_map == instance_id)
            gt_mask[visible.pixels] = label
            instances.append((label, visible))
            boxes.append(BoxAnnotation(rect=GeometryService.tight_bbox(visible), label=label))
        return Sample(
            image_id=image_id,
            image=image,
            boxes=boxes,
            gt_mask=gt_mask,
            gt_instances=instances,
            annotation=annotation,
            split=split,
        )

    @staticmethod
    def annotation_plan(config: SynthConfig) -> List[str]:
        """Tipo de anotação de cada amostra de treino (fração mask_fraction por máscara)"""
        n = config.num_images
        n_mask = int(np.floor(config.mask_fraction * n + 0.5))
        order = rng_for(config.seed, "annotation").permutation(n)
        kinds = ["box"] * n
        for index in order[:n_mask]:
            kinds[int(index)] = "mask"
        return kinds

    @staticmethod
    def synth_generate(config: SynthConfig, root: Path, workers: int = 1) -> Tuple[DatasetManifest, Path]:
        """
        Gera e grava o dataset sintético (treino + teste)

        Args:
            config: Parâmetros do gerador
            root: Diretório raiz do dataset
            workers: Paralelismo por amostra

        Returns:
            Tuple[DatasetManifest, Path]: Manifest e caminho do manifest.json
        """
        root = Path(root)
        kinds = DatasetService.annotation_plan(config)
        jobs = [("train", i, kinds[i]) for i in range(config.num_images)]
        jobs += [("test", i, "mask") for i in range(config.num_test_images)]
        entries = Parallel(n_jobs=workers)(
            delayed(_generate_and_write)(config, root, split, index, kind) for split, index, kind in jobs
        )
        manifest = DatasetManifest(
            num_classes=len(config.classes) + 1,
            class_names=["background", *config.classes],
            samples=entries,
        )
        path = atomic_write_text(root / MANIFEST_NAME, manifest.model_dump_json(indent=2, exclude_none=True) + "\n")
        logger.info(f"Dataset sintético gravado em {root}: {len(entries)} amostras")
        return manifest, path

    @staticmethod
    def load_manifest(path: Path) -> DatasetManifest:
        """
        Raises:
            MissingFileException / MalformedFileException
        """
        raw = read_json(path)
        try:
            return DatasetManifest.model_validate(raw)
        except ValidationError as e:
            raise MalformedFileException(f"{path}: manifest inválido", details=e.errors(include_url=False))

    @staticmethod
    def load_dataset(path: Path, split: Optional[str] = None, workers: int = 1) -> List[Sample]:
        """
        Carrega e valida as amostras de um manifest

        Verifica arquivos, dimensões, rótulos, limites das caixas e, quando
        há mapa de instâncias, caixa == tight_bbox da instância visível.

        Args:
            path: Caminho do manifest.json
            split: Filtra as amostras por split (None = todas)
            workers: Paralelismo por amostra

        Returns:
            List[Sample]: Amostras na ordem do manifest
        """
        path = Path(path)
        manifest = DatasetService.load_manifest(path)
        entries = [e for e in manifest.samples if split is None or e.split == split]
        return Parallel(n_jobs=workers, prefer="threads")(
            delayed(_load_entry)(path.parent, entry, manifest.num_classes) for entry in entries
        )

    @staticmethod
    def read_mask(path: Path, num_classes: Optional[int] = None) -> LabelMap:
        """
        Lê um mapa de rótulos 8 bits (PNG cinza/paleta ou PGM); 255 = IGNORE

        Raises:
            UnsupportedBitDepthException: Modo diferente de 8 bits
            LabelOutOfRangeException: Valor >= num_classes e != 255
        """
        path = require_file(path)
        with Image.open(path) as img:
            if img.mode not in ("L", "P"):
                raise UnsupportedBitDepthException(f"{path}: modo {img.mode} não é uma máscara de 8 bits")
            labels = np.array(img, dtype=np.uint8)
        if num_classes is not None:
            bad = (labels >= num_classes) & (labels != IGNORE)
            if bad.any():
                value = int(labels[bad][0])
                raise LabelOutOfRangeException(
                    f"{path}: rótulo {value} fora de 0..{num_classes - 1}", details={"path": str(path), "label": value}
                )
        return labels

    @staticmethod
    def write_mask(path: Path, labels: LabelMap) -> Path:
        """Grava um mapa de rótulos como PNG ou PGM (pela extensão)"""
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
            raise LabelOutOfRangeException("Mapa de rótulos deve ser 2D com valores em 0..255")
        img = Image.fromarray(labels.astype(np.uint8))
        return atomic_write(path, lambda tmp: img.save(tmp, format=_pil_format(path)))

    @staticmethod
    def read_image(path: Path) -> np.ndarray:
        """
        Lê uma imagem RGB 8 bits (PNG ou PPM) como float32 (H, W, 3) em [0, 1]
        """
        path = require_file(path)
        with Image.open(path) as img:
            if img.mode not in ("RGB", "RGBA", "L", "P"):
                raise UnsupportedBitDepthException(f"{path}: modo {img.mode} não é uma imagem de 8 bits")
            pixels = np.array(img.convert("RGB"), dtype=np.uint8)
        return pixels.astype(np.float32) / np.float32(255.0)

    @staticmethod
    def write_image(path: Path, image: np.ndarray) -> Path:
        """Grava uma imagem (H, W, 3) em [0, 1] como RGB 8 bits"""
        pixels = np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
        img = Image.fromarray(pixels)
        return atomic_write(path, lambda tmp: img.save(tmp, format=_pil_format(path)))

    @staticmethod
    def read_boxes(path: Path, width: int, height: int, num_classes: Optional[int] = None) -> List[BoxAnnotation]:
        """
        Lê um arquivo de caixas JSON lines

        Raises:
            MalformedFileException: Linha fora do formato (com número da linha)
            BoxOutOfBoundsException: Caixa fora da imagem
            LabelOutOfRangeException: Rótulo >= num_classes
        """
        path = require_file(path)
        boxes = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = BoxRecord.model_validate_json(line)
            except ValidationError as e:
                raise MalformedFileException(
                    f"{path}:{lineno}: caixa inválida", details=e.errors(include_url=False)
                )
            rect = PixelRect(x0=record.x0, y0=record.y0, x1=record.x1, y1=record.y1)
            if not rect.fits(width, height):
                raise BoxOutOfBoundsException(
                    f"{path}:{lineno}: caixa {rect.as_tuple()} fora da imagem {width}x{height}"
                )
            if num_classes is not None and record.label >= num_classes:
                raise LabelOutOfRangeException(f"{path}:{lineno}: rótulo {record.label} >= {num_classes}")
            boxes.append(BoxAnnotation(rect=rect, label=record.label))
        return boxes

    @staticmethod
    def write_boxes(path: Path, boxes: Sequence[BoxAnnotation]) -> Path:
        lines = [
            json.dumps({"label": b.label, "x0": b.rect.x0, "y0": b.rect.y0, "x1": b.rect.x1, "y1": b.rect.y1})
            for b in boxes
        ]
        return atomic_write_text(path, "".join(line + "\n" for line in lines))

    @staticmethod
    def ground_truths(samples: Sequence[Sample]) -> Dict[str, LabelMap]:
        return {s.image_id: s.gt_mask for s in samples if s.gt_mask is not None}


def _rasterize(
    name: str,
    xs: np.ndarray,
    ys: np.ndarray,
    cx: float,
    cy: float,
    extent: float,
    aspect: float,
) -> np.ndarray:
    """Forma avaliada nos centros dos pixels"""
    half = extent / 2
    if name == "disk":
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= half**2
    if name == "rectangle":
        return (np.abs(xs - cx) <= half) & (np.abs(ys - cy) <= half * aspect)
    # triângulo isósceles com a ponta para cima
    top = cy - half
    bottom = cy + half
    t = (ys - top) / extent
    return (ys >= top) & (ys <= bottom) & (np.abs(xs - cx) <= t * half)


def _quantize(image: np.ndarray) -> np.ndarray:
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return pixels.astype(np.float32) / np.float32(255.0)


def _pil_format(path: Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        return "PPM"
    if suffix == ".png":
        return "PNG"
    raise UnsupportedBitDepthException(f"{path}: extensão não suportada (use .png, .pgm ou .ppm)")


def _generate_and_write(config: SynthConfig, root: Path, split: str, index: int, kind: str) -> ManifestEntry:
    sample = DatasetService.synth_sample(config, split, index, kind)
    image_id = sample.image_id
    instance_map = np.zeros(sample.shape, dtype=np.uint8)
    for instance_id, (_, visible) in enumerate(sample.gt_instances, start=1):
        instance_map[visible.pixels] = instance_id
    DatasetService.write_image(root / "images" / f"{image_id}.png", sample.image)
    DatasetService.write_mask(root / "masks" / f"{image_id}.png", sample.gt_mask)
    DatasetService.write_mask(root / "instances" / f"{image_id}.png", instance_map)
    DatasetService.write_boxes(root / "boxes" / f"{image_id}{BOXES_SUFFIX}", sample.boxes)
    return ManifestEntry(
        image_id=image_id,
        image=f"images/{image_id}.png",
        mask=f"masks/{image_id}.png",
        boxes=f"boxes/{image_id}{BOXES_SUFFIX}",
        instances=f"instances/{image_id}.png",
        annotation=kind,
        split=split,
    )


def _load_entry(root: Path, entry: ManifestEntry, num_classes: int) -> Sample:
    image = DatasetService.read_image(root / entry.image)
    height, width = image.shape[:2]
    gt_mask = None
    if entry.mask is not None:
        gt_mask = DatasetService.read_mask(root / entry.mask, num_classes)
        if gt_mask.shape != (height, width):
            raise DimensionMismatchException(f"'{entry.image_id}': máscara {gt_mask.shape} e imagem {(height, width)}")
    boxes = None
    if entry.boxes is not None:
        boxes = DatasetService.read_boxes(root / entry.boxes, width, height, num_classes)
    gt_instances = None
    if entry.instances is not None:
        gt_instances = _load_instances(root / entry.instances, entry.image_id, gt_mask, boxes, (height, width))
    return Sample(
        image_id=entry.image_id,
        image=image,
        boxes=boxes,
        gt_mask=gt_mask,
        gt_instances=gt_instances,
        annotation=entry.annotation,
        split=entry.split,
        proposals_path=str(root / entry.proposals) if entry.proposals else None,
    )


def _load_instances(
    path: Path,
    image_id: str,
    gt_mask: Optional[LabelMap],
    boxes: Optional[List[BoxAnnotation]],
    shape: Tuple[int, int],
) -> List[Tuple[int, BinaryMask]]:
    """Lê o mapa de instâncias e confere caixas e máscara contra ele"""
    instance_map = DatasetService.read_mask(path)
    if instance_map.shape != shape:
        raise DimensionMismatchException(f"'{image_id}': mapa de instâncias {instance_map.shape} e imagem {shape}")
    if gt_mask is None:
        raise InconsistentAnnotationException(f"'{image_id}': mapa de instâncias sem máscara de GT")
    count = int(instance_map.max())
    if boxes is not None and len(boxes) != count:
        raise InconsistentAnnotationException(f"'{image_id}': {len(boxes)} caixas para {count} instâncias")
    foreground = (gt_mask != BACKGROUND) & (gt_mask != IGNORE)
    if not np.array_equal(instance_map > 0, foreground):
        raise InconsistentAnnotationException(f"'{image_id}': instâncias não cobrem exatamente a frente da máscara")
    instances = []
    for instance_id in range(1, count + 1):
        pixels = instance_map == instance_id
        if not pixels.any():
            raise InconsistentAnnotationException(f"'{image_id}': instância {instance_id} sem pixels visíveis")
        values = np.unique(gt_mask[pixels])
        if values.size != 1:
            raise InconsistentAnnotationException(f"'{image_id}': instância {instance_id} com rótulos {values.tolist()}")
        label = int(values[0])
        mask = BinaryMask(pixels)
        if boxes is not None:
            box = boxes[instance_id - 1]
            if box.label != label or box.rect != GeometryService.tight_bbox(mask):
                raise InconsistentAnnotationException(
                    f"'{image_id}': caixa {instance_id - 1} difere do retângulo justo da instância",
                    details={"box": box.rect.as_tuple(), "tight": GeometryService.tight_bbox(mask).as_tuple()},
                )
        instances.append((label, mask))
    return instances
