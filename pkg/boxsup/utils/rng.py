"""
Fluxos de números aleatórios reprodutíveis

Cada fluxo é derivado de uma chave inteira (seed global, id da imagem,
época...) via SeedSequence + PCG64, portanto não depende da ordem de
execução nem do número de workers.
"""
import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def stable_key(value: Key) -> int:
    """Converte str/int em inteiro estável entre plataformas e processos"""
    if isinstance(value, str):
        return zlib.crc32(value.encode("utf-8"))
    return int(value)


def rng_for(*keys: Key) -> np.random.Generator:
    """
    Cria um gerador independente para a tupla de chaves

    Args:
        *keys: Componentes da chave (ex: seed, image_id, epoch)

    Returns:
        np.random.Generator: Gerador PCG64 determinístico
    """
    entropy = [stable_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
