"""
Service da rede de rotulagem por pixel: forward, perda, backpropagation exata, SGD e checkpoints

Arquitetura padrão: conv3×3 → ReLU → conv3×3 → ReLU → average pool 2× →
conv3×3 → ReLU → conv1×1(C) → upsample bilinear 2×. Todas as convoluções
usam padding "same" com zeros; o pooling completa a imagem com zeros até
um múltiplo do stride e o upsample recorta de volta ao tamanho original.
"""
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import log_softmax

from boxsup.models.geometry import IGNORE, LabelMap
from boxsup.models.network import GradientSet, ModelParams, ScoreMap
from boxsup.schemas.config import NetConfig
from boxsup.schemas.report import GradCheckReport, GradCheckSeedResult
from boxsup.utils.exceptions import (
    DimensionMismatchException,
    DivergedGradientException,
    LabelOutOfRangeException,
    MalformedFileException,
    NoSupervisedPixelsException,
)
from boxsup.utils.io import atomic_write, require_file
from boxsup.utils.rng import rng_for

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


class PixelNetService:
    """Service para a rede X_θ implementada do zero sobre numpy"""

    @staticmethod
    def init_params(config: NetConfig, dtype=np.float32) -> ModelParams:
        """
        Inicializa θ: kernels gaussianos escalados (He) e vieses nulos

        O classificador final começa zerado, então a perda inicial é
        exatamente ln C.

        Args:
            config: Arquitetura
            dtype: float32 para treino, float64 para verificação de gradiente

        Returns:
            ModelParams: Parâmetros na ordem declarada das camadas
        """
        rng = rng_for(config.seed, "init")
        arrays = []
        in_channels = config.input_channels
        for index, kernel in enumerate(config.kernel_sizes):
            is_classifier = index == config.num_layers - 1
            out_channels = config.num_classes if is_classifier else config.hidden_channels[index]
            fan_in = in_channels * kernel * kernel
            if is_classifier:
                weight = np.zeros((out_channels, in_channels, kernel, kernel))
            else:
                std = config.weight_init_scale * math.sqrt(2.0 / fan_in)
                weight = rng.normal(0.0, std, size=(out_channels, in_channels, kernel, kernel))
            arrays.append((f"conv{index + 1}.weight", weight.astype(dtype)))
            arrays.append((f"conv{index + 1}.bias", np.zeros(out_channels, dtype=dtype)))
            in_channels = out_channels
        return ModelParams(arrays, config=config)

    @staticmethod
    def forward(params: ModelParams, image: np.ndarray) -> ScoreMap:
        """
        Scores pré-softmax em resolução cheia

        Args:
            params: Parâmetros (com o NetConfig em params.config)
            image: Imagem (H, W, C_in)

        Returns:
            ScoreMap: (num_classes, H, W)
        """
        scores, _ = _forward(params, image, keep_cache=False)
        return scores

    @staticmethod
    def coarse_features(params: ModelParams, image: np.ndarray) -> np.ndarray:
        """Scores antes do upsample bilinear (num_classes, ⌈H/s⌉, ⌈W/s⌉)"""
        _, cache = _forward(params, image, keep_cache=True)
        return cache["coarse"]

    @staticmethod
    def pixel_loss(scores: ScoreMap, target: LabelMap) -> Tuple[float, np.ndarray]:
        """
        Entropia cruzada softmax média sobre os pixels não IGNORE

        Args:
            scores: (C, H, W)
            target: Mapa de rótulos (H, W)

        Returns:
            Tuple[float, np.ndarray]: Perda média e campo de perda por pixel
            (zero nos pixels IGNORE)

        Raises:
            NoSupervisedPixelsException: Todos os pixels são IGNORE
        """
        loss, field, _ = _loss_and_score_grad(scores, target, with_grad=False)
        return loss, field

    @staticmethod
    def loss_and_gradients(
        params: ModelParams,
        image: np.ndarray,
        target: LabelMap,
    ) -> Tuple[float, GradientSet]:
        """
        Um forward e um backward: perda média e gradiente analítico exato

        Returns:
            Tuple[float, GradientSet]: (perda, ∂perda/∂θ)
        """
        scores, cache = _forward(params, image, keep_cache=True)
        loss, _, dscores = _loss_and_score_grad(scores, target, with_grad=True)
        return loss, _backward(params, cache, dscores)

    @staticmethod
    def backward(params: ModelParams, image: np.ndarray, target: LabelMap) -> GradientSet:
        """Gradiente de pixel_loss∘forward em relação a todos os parâmetros"""
        return PixelNetService.loss_and_gradients(params, image, target)[1]

    @staticmethod
    def sgd_step(
        params: ModelParams,
        grads: GradientSet,
        lr: float,
        velocity: Optional[GradientSet] = None,
        momentum: float = 0.9,
    ) -> Tuple[ModelParams, GradientSet]:
        """
        Um passo de SGD com momentum

        v ← momentum·v + g ;  θ ← θ − lr·v

        Args:
            params: Parâmetros atuais
            grads: Gradientes do mini-batch
            lr: Taxa de aprendizado
            velocity: Estado de momentum (None → zeros)
            momentum: Coeficiente de momentum

        Returns:
            Tuple[ModelParams, GradientSet]: Novos parâmetros e nova velocidade

        Raises:
            DivergedGradientException: Gradiente com valores não finitos
        """
        if params.shapes() != grads.shapes():
            raise DimensionMismatchException("Gradientes com shapes diferentes dos parâmetros")
        if not grads.is_finite():
            raise DivergedGradientException("Gradiente com valores não finitos")
        if velocity is None:
            velocity = GradientSet(((name, np.zeros_like(arr)) for name, arr in params.items()), config=params.config)
        new_velocity = velocity.zip_map(grads, lambda v, g: (momentum * v + g).astype(v.dtype))
        new_params = params.zip_map(new_velocity, lambda p, v: (p - lr * v).astype(p.dtype))
        return new_params, new_velocity

    @staticmethod
    def lr_schedule(epoch: int, base_lr: float, drop_every: int, factor: float = 0.1) -> float:
        """
        Taxa de aprendizado em degraus

        Returns:
            float: base_lr · factor^⌊epoch / drop_every⌋
        """
        if epoch < 0:
            raise ValueError("epoch deve ser >= 0")
        return base_lr * factor ** (epoch // drop_every)

    @staticmethod
    def resize_scores(scores: np.ndarray, height: int, width: int) -> np.ndarray:
        """
        Reamostragem bilinear (centros de pixel, bordas replicadas) de (C, h, w) para (C, height, width)
        """
        if height < 1 or width < 1:
            raise DimensionMismatchException(f"Dimensão de saída inválida: {width}x{height}")
        scores = np.asarray(scores)
        rows = interpolation_matrix(scores.shape[1], height).astype(scores.dtype, copy=False)
        cols = interpolation_matrix(scores.shape[2], width).astype(scores.dtype, copy=False)
        return np.matmul(np.matmul(rows, scores), cols.T)

    @staticmethod
    def rescale_scores(scores: ScoreMap, factor: float) -> ScoreMap:
        """
        Reescala bilinear por um fator

        Args:
            scores: (C, H, W)
            factor: Fator > 0; saída com round(factor·dim)

        Raises:
            DimensionMismatchException: Dimensão de saída < 1
        """
        if factor <= 0:
            raise ValueError("factor deve ser > 0")
        height = _round_half_up(factor * scores.shape[1])
        width = _round_half_up(factor * scores.shape[2])
        return PixelNetService.resize_scores(scores, height, width)

    @staticmethod
    def resize_image(image: np.ndarray, factor: float) -> np.ndarray:
        """Reescala bilinear de uma imagem (H, W, C) por um fator"""
        if factor == 1.0:
            return image
        resized = PixelNetService.rescale_scores(np.moveaxis(image, -1, 0), factor)
        return np.moveaxis(resized, 0, -1)

    @staticmethod
    def gradient_check(
        config: NetConfig,
        seeds: Sequence[int],
        size: int = 8,
        threshold: float = 1e-4,
        epsilon: float = 1e-6,
        max_entries: int = 20,
    ) -> GradCheckReport:
        """
        Compara backward com diferenças finitas centrais em precisão dupla

        Para cada seed: parâmetros, imagem size×size e alvo aleatórios (com
        alguns pixels IGNORE). O erro de cada tensor é
        ‖analítico − numérico‖ / max(‖analítico‖, ‖numérico‖); até
        max_entries entradas sorteadas por tensor são perturbadas.

        Returns:
            GradCheckReport: Erro relativo máximo por seed
        """
        report = GradCheckReport(threshold=threshold)
        for seed in seeds:
            rng = rng_for(seed, "gradcheck")
            params = PixelNetService.init_params(config.model_copy(update={"seed": seed}), dtype=np.float64)
            params = params.map(
                lambda a: rng.normal(0.0, 1.0 / math.sqrt(np.prod(a.shape[1:])) if a.ndim > 1 else 0.1, size=a.shape)
            )
            image = rng.uniform(0.0, 1.0, size=(size, size, config.input_channels))
            target = rng.integers(0, config.num_classes, size=(size, size)).astype(np.uint8)
            target[rng.uniform(size=(size, size)) < 0.1] = IGNORE
            target[0, 0] = 0

            _, grads = PixelNetService.loss_and_gradients(params, image, target)
            worst = 0.0
            for name, tensor in params.items():
                flat = tensor.reshape(-1)
                count = min(max_entries, flat.size)
                entries = rng.choice(flat.size, size=count, replace=False)
                analytic = grads[name].reshape(-1)[entries]
                numeric = np.empty(count)
                for j, entry in enumerate(entries):
                    original = flat[entry]
                    flat[entry] = original + epsilon
                    plus, _ = PixelNetService.pixel_loss(PixelNetService.forward(params, image), target)
                    flat[entry] = original - epsilon
                    minus, _ = PixelNetService.pixel_loss(PixelNetService.forward(params, image), target)
                    flat[entry] = original
                    numeric[j] = (plus - minus) / (2 * epsilon)
                scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
                if scale > 0:
                    worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
            logger.debug(f"Gradcheck seed {seed}: erro relativo máximo {worst:.3e}")
            report.results.append(GradCheckSeedResult(seed=seed, max_relative_error=worst))
        return report

    @staticmethod
    def save_checkpoint(
        path: Path,
        params: ModelParams,
        velocity: Optional[GradientSet] = None,
        epoch: int = 0,
        history: Optional[List[dict]] = None,
    ) -> Path:
        """
        Grava o checkpoint .npz

        Layout: `header` (bytes UTF-8 de um JSON com format_version,
        net_config, param_names, epoch, history), `param/<nome>` e, se
        houver, `velocity/<nome>`, na ordem declarada das camadas.
        """
        header = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "net_config": params.config.model_dump(mode="json") if params.config else None,
            "param_names": params.names,
            "epoch": epoch,
            "history": history or [],
            "has_velocity": velocity is not None,
        }
        arrays: Dict[str, np.ndarray] = {
            "header": np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)
        }
        for name, arr in params.items():
            arrays[f"param/{name}"] = arr
        if velocity is not None:
            for name, arr in velocity.items():
                arrays[f"velocity/{name}"] = arr

        def writer(tmp: Path) -> None:
            with open(tmp, "wb") as handle:
                np.savez(handle, **arrays)

        return atomic_write(path, writer)

    @staticmethod
    def load_checkpoint(path: Path) -> Tuple[ModelParams, Optional[GradientSet], dict]:
        """
        Lê um checkpoint gravado por save_checkpoint

        Returns:
            Tuple[ModelParams, Optional[GradientSet], dict]: Parâmetros, velocidade e cabeçalho
        """
        path = require_file(path)
        try:
            with np.load(path, allow_pickle=False) as data:
                header = json.loads(bytes(data["header"]).decode("utf-8"))
                if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
                    raise MalformedFileException(f"{path}: versão de checkpoint não suportada")
                config = NetConfig.model_validate(header["net_config"]) if header.get("net_config") else None
                names = header["param_names"]
                params = ModelParams(((n, data[f"param/{n}"]) for n in names), config=config)
                velocity = None
                if header.get("has_velocity"):
                    velocity = GradientSet(((n, data[f"velocity/{n}"]) for n in names), config=config)
        except (KeyError, ValueError, OSError) as e:
            raise MalformedFileException(f"{path}: checkpoint inválido ({e})")
        return params, velocity, header


def interpolation_matrix(n_in: int, n_out: int) -> np.ndarray:
    """
    Matriz (n_out, n_in) de interpolação linear 1D

    Convenção de centros de pixel: src = (i + 0.5)·n_in/n_out − 0.5,
    limitado a [0, n_in − 1].
    """
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    low = np.floor(src).astype(np.int64)
    high = np.minimum(low + 1, n_in - 1)
    frac = src - low
    matrix = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(matrix, (rows, low), 1.0 - frac)
    np.add.at(matrix, (rows, high), frac)
    return matrix


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pad = weight.shape[-1] // 2
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, weight.shape[-2:], axis=(1, 2))
    out = np.tensordot(weight, windows, axes=([1, 2, 3], [0, 3, 4]))
    return out + bias[:, None, None], windows


def _conv_backward(
    dout: np.ndarray,
    windows: np.ndarray,
    weight: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pad = weight.shape[-1] // 2
    dweight = np.tensordot(dout, windows, axes=([1, 2], [1, 2]))
    dbias = dout.sum(axis=(1, 2))
    padded = np.pad(dout, ((0, 0), (pad, pad), (pad, pad)))
    dwindows = sliding_window_view(padded, weight.shape[-2:], axis=(1, 2))
    dx = np.tensordot(weight[:, :, ::-1, ::-1], dwindows, axes=([0, 2, 3], [0, 3, 4]))
    return dx, dweight, dbias


def _pool_forward(x: np.ndarray, stride: int) -> np.ndarray:
    channels, height, width = x.shape
    ph, pw = -height % stride, -width % stride
    padded = np.pad(x, ((0, 0), (0, ph), (0, pw)))
    hh, ww = padded.shape[1] // stride, padded.shape[2] // stride
    return padded.reshape(channels, hh, stride, ww, stride).mean(axis=(2, 4))


def _pool_backward(dout: np.ndarray, stride: int, height: int, width: int) -> np.ndarray:
    expanded = np.repeat(np.repeat(dout, stride, axis=1), stride, axis=2) / (stride * stride)
    return expanded[:, :height, :width]


def _forward(params: ModelParams, image: np.ndarray, keep_cache: bool) -> Tuple[np.ndarray, dict]:
    config: NetConfig = params.config
    if config is None:
        raise ValueError("ModelParams sem NetConfig")
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != config.input_channels:
        raise DimensionMismatchException(
            f"Imagem com shape {image.shape}, esperado (H, W, {config.input_channels})"
        )
    dtype = params.dtype
    height, width = image.shape[:2]
    h = np.ascontiguousarray(np.moveaxis(image, -1, 0), dtype=dtype)
    stride = config.downsample
    n_hidden = len(config.hidden_channels)
    layers = []
    pool_shape = None
    for index in range(config.num_layers):
        if stride > 1 and index == config.downsample_after:
            pool_shape = h.shape[1:]
            h = _pool_forward(h, stride)
        weight = params[f"conv{index + 1}.weight"]
        bias = params[f"conv{index + 1}.bias"]
        pre, windows = _conv_forward(h, weight, bias)
        h = np.maximum(pre, 0) if index < n_hidden else pre
        layers.append({"windows": windows if keep_cache else None, "active": pre > 0 if keep_cache else None})
    coarse = h
    if stride > 1:
        padded_h = coarse.shape[1] * stride
        padded_w = coarse.shape[2] * stride
        rows = interpolation_matrix(coarse.shape[1], padded_h)[:height].astype(dtype)
        cols = interpolation_matrix(coarse.shape[2], padded_w)[:width].astype(dtype)
        scores = np.matmul(np.matmul(rows, coarse), cols.T)
    else:
        rows = cols = None
        scores = coarse
    cache = {}
    if keep_cache:
        cache = {
            "layers": layers,
            "pool_shape": pool_shape,
            "rows": rows,
            "cols": cols,
            "coarse": coarse,
        }
    return scores, cache


def _loss_and_score_grad(
    scores: np.ndarray,
    target: LabelMap,
    with_grad: bool,
) -> Tuple[float, np.ndarray, Optional[np.ndarray]]:
    scores = np.asarray(scores)
    target = np.asarray(target)
    if scores.shape[1:] != target.shape:
        raise DimensionMismatchException(f"Scores {scores.shape[1:]} e alvo {target.shape} incompatíveis")
    num_classes = scores.shape[0]
    valid = target != IGNORE
    if np.any(target[valid] >= num_classes):
        raise LabelOutOfRangeException(f"Alvo com rótulo >= C={num_classes}")
    count = int(np.count_nonzero(valid))
    if count == 0:
        raise NoSupervisedPixelsException("Todos os pixels do alvo são IGNORE")
    safe_target = np.where(valid, target, 0).astype(np.int64)
    log_probs = log_softmax(scores, axis=0)
    picked = np.take_along_axis(log_probs, safe_target[None], axis=0)[0]
    field = np.where(valid, -picked, 0.0).astype(scores.dtype)
    loss = float(field.sum(dtype=np.float64) / count)
    dscores = None
    if with_grad:
        dscores = np.exp(log_probs)
        picked_prob = np.take_along_axis(dscores, safe_target[None], axis=0)
        np.put_along_axis(dscores, safe_target[None], picked_prob - 1.0, axis=0)
        dscores = (dscores * valid[None] / count).astype(scores.dtype)
    return loss, field, dscores


def _backward(params: ModelParams, cache: dict, dscores: np.ndarray) -> GradientSet:
    config: NetConfig = params.config
    stride = config.downsample
    n_hidden = len(config.hidden_channels)
    if stride > 1:
        grad = np.matmul(np.matmul(cache["rows"].T, dscores), cache["cols"])
    else:
        grad = dscores
    grads: Dict[str, np.ndarray] = {}
    for index in reversed(range(config.num_layers)):
        layer = cache["layers"][index]
        if index < n_hidden:
            grad = grad * layer["active"]
        weight = params[f"conv{index + 1}.weight"]
        grad, dweight, dbias = _conv_backward(grad, layer["windows"], weight)
        grads[f"conv{index + 1}.weight"] = dweight.astype(weight.dtype, copy=False)
        grads[f"conv{index + 1}.bias"] = dbias.astype(weight.dtype, copy=False)
        if stride > 1 and index == config.downsample_after:
            height, width = cache["pool_shape"]
            grad = _pool_backward(grad, stride, height, width)
    return GradientSet(((name, grads[name]) for name in params.names), config=config)
