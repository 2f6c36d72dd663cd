"""
Fixtures compartilhadas: imagens pequenas, pools e redes mínimas
"""
import numpy as np
import pytest

from boxsup.models.geometry import PixelRect
from boxsup.models.proposal import ProposalPool
from boxsup.models.sample import BoxAnnotation
from boxsup.schemas.config import NetConfig, ProposerConfig, SynthConfig, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_net_config():
    """conv3×3(4) → pool 2× → conv3×3(4) → conv1×1(3) → upsample"""
    return NetConfig(
        input_channels=3,
        num_classes=3,
        hidden_channels=[4, 4],
        kernel_sizes=[3, 3, 1],
        downsample_after=1,
        downsample=2,
        seed=0,
    )


@pytest.fixture
def two_halves_image():
    """Imagem 16×16: metade esquerda escura, metade direita vermelha"""
    image = np.zeros((16, 16, 3))
    image[:, :8] = (0.1, 0.1, 0.1)
    image[:, 8:] = (0.9, 0.2, 0.2)
    return image


@pytest.fixture
def exact_proposer_config():
    return ProposerConfig(graph_scale=1.0, sigma=0.0, min_region_size=1, merge_levels=1, max_proposals=100)


@pytest.fixture
def small_synth_config():
    return SynthConfig(
        image_size=32,
        num_images=4,
        num_test_images=2,
        instances_min=1,
        instances_max=2,
        size_min=0.3,
        size_max=0.5,
        min_visible_area=20,
        seed=3,
    )


@pytest.fixture
def fast_train_config():
    return TrainConfig(epochs=2, batch_size=2, base_lr=0.05, seed=0)


def rect(x0, y0, x1, y1) -> PixelRect:
    return PixelRect(x0=x0, y0=y0, x1=x1, y1=y1)


def box(x0, y0, x1, y1, label=1) -> BoxAnnotation:
    return BoxAnnotation(rect=rect(x0, y0, x1, y1), label=label)


def rect_pixels(x0, y0, x1, y1, width, height) -> np.ndarray:
    pixels = np.zeros((height, width), dtype=bool)
    pixels[y0:y1, x0:x1] = True
    return pixels


def random_pool(rng, count, width=16, height=16, image_id="img") -> ProposalPool:
    """Pool de retângulos aleatórios (todos não vazios)"""
    masks = []
    for _ in range(count):
        x0 = int(rng.integers(0, width - 1))
        y0 = int(rng.integers(0, height - 1))
        x1 = int(rng.integers(x0 + 1, width + 1))
        y1 = int(rng.integers(y0 + 1, height + 1))
        masks.append(rect_pixels(x0, y0, x1, y1, width, height))
    return ProposalPool.from_masks(image_id, masks)
