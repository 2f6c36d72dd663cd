"""
Parâmetros, gradientes e mapas de score da rede de rotulagem por pixel
"""
from collections import OrderedDict
from typing import Callable, Dict, Iterable, Iterator, Tuple

import numpy as np

# Scores pré-softmax (C, H, W) na resolução da imagem
ScoreMap = np.ndarray


class ParamSet:
    """
    Conjunto ordenado de arrays nomeados (ordem declarada das camadas)

    Base comum de ModelParams e GradientSet. `config` guarda o NetConfig
    que define a arquitetura.
    """

    def __init__(self, arrays: Iterable[Tuple[str, np.ndarray]], config=None):
        self._arrays: "OrderedDict[str, np.ndarray]" = OrderedDict(arrays)
        self.config = config

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    @property
    def names(self) -> list:
        return list(self._arrays)

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self._arrays.values())).dtype

    def map(self, fn: Callable[[np.ndarray], np.ndarray]):
        return type(self)(((name, fn(arr)) for name, arr in self._arrays.items()), config=self.config)

    def zip_map(self, other: "ParamSet", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        return type(self)(
            ((name, fn(arr, other[name])) for name, arr in self._arrays.items()), config=self.config
        )

    def copy(self):
        return self.map(np.copy)

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(a))) for a in self._arrays.values())

    def shapes(self) -> Dict[str, tuple]:
        return {name: arr.shape for name, arr in self._arrays.items()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self.names == other.names and all(
            np.array_equal(arr, other[name]) for name, arr in self._arrays.items()
        )

    def __repr__(self):
        total = sum(a.size for a in self._arrays.values())
        return f"<{type(self).__name__}(tensors={len(self)}, values={total})>"


class ModelParams(ParamSet):
    """Parâmetros θ: kernels `convN.weight` (Cout, Cin, k, k) e vieses `convN.bias` (Cout,)"""


class GradientSet(ParamSet):
    """Gradientes com os mesmos nomes e shapes de ModelParams"""

    def scale(self, factor: float) -> "GradientSet":
        return self.map(lambda a: a * factor)

    @classmethod
    def sum(cls, grads: Iterable["GradientSet"]) -> "GradientSet":
        """Soma em ordem fixa (reduções bit-estáveis)"""
        total = None
        for g in grads:
            total = g.copy() if total is None else total.zip_map(g, np.add)
        return total
