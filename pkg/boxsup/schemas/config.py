"""
Schemas Pydantic para a configuração dos experimentos
"""
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from boxsup.utils.exceptions import ConfigException


class StrictModel(BaseModel):
    """Base que rejeita chaves desconhecidas"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ProposerConfig(StrictModel):
    """Gerador de propostas embutido (segmentação por grafo + fusão gulosa)"""
    graph_scale: float = Field(default=100.0, gt=0, description="Parâmetro k da segmentação por grafo (escala 0-255)")
    sigma: float = Field(default=0.5, ge=0, description="Suavização gaussiana antes da segmentação")
    min_region_size: int = Field(default=20, ge=1, description="Regiões menores são fundidas a um vizinho")
    merge_levels: int = Field(default=3, ge=0, description="Rodadas de fusão gulosa por similaridade de cor")
    max_proposals: int = Field(default=100, ge=1, description="Tamanho máximo do pool por imagem")
    dedup_iou: float = Field(default=0.95, gt=0, le=1, description="Pares com mask IoU acima disso são deduplicados")
    boundary_jitter: int = Field(
        default=0, ge=0, description="Raio máximo das variantes erodidas/dilatadas de cada região (0 = sem variantes)"
    )
    seed: int = Field(default=0, ge=0, description="Registrado no pool; o gerador embutido é determinístico")


class NetConfig(StrictModel):
    """
    Arquitetura da rede de rotulagem por pixel

    hidden_channels define as convoluções com ReLU; kernel_sizes tem um
    elemento a mais (o classificador final com num_classes saídas).
    O downsample (average pooling) entra depois de `downsample_after`
    convoluções e é desfeito por upsample bilinear na saída.
    """
    input_channels: int = Field(default=3, ge=1)
    num_classes: int = Field(default=4, ge=2, description="Fundo + classes de frente")
    hidden_channels: List[int] = Field(default_factory=lambda: [16, 16, 32])
    kernel_sizes: List[int] = Field(default_factory=lambda: [3, 3, 3, 1])
    downsample_after: int = Field(default=2, ge=0)
    downsample: int = Field(default=2, ge=1, description="Fator de redução (stride de saída)")
    weight_init_scale: float = Field(default=1.0, gt=0, description="Multiplicador do desvio padrão de He")
    seed: int = Field(default=0, ge=0)

    @field_validator("kernel_sizes")
    @classmethod
    def validate_kernels(cls, v):
        if any(k < 1 or k % 2 == 0 for k in v):
            raise ValueError("Kernels devem ser ímpares e positivos")
        return v

    @field_validator("hidden_channels")
    @classmethod
    def validate_channels(cls, v):
        if any(c < 1 for c in v):
            raise ValueError("Larguras de canal devem ser positivas")
        return v

    @model_validator(mode="after")
    def validate_layers(self):
        if len(self.kernel_sizes) != len(self.hidden_channels) + 1:
            raise ValueError("kernel_sizes deve ter len(hidden_channels) + 1 elementos")
        if self.downsample_after > len(self.hidden_channels):
            raise ValueError("downsample_after maior que o número de convoluções ocultas")
        return self

    @property
    def num_layers(self) -> int:
        return len(self.kernel_sizes)


class TrainConfig(StrictModel):
    """Hiperparâmetros do algoritmo alternado (padrões em escala completa)"""
    lambda_weight: float = Field(default=3.0, ge=0, alias="lambda", description="Peso λ de E_r")
    k: int = Field(default=5, ge=1, description="Candidatos de menor custo sorteados por caixa")
    batch_size: int = Field(default=20, ge=1)
    epochs: int = Field(default=45, ge=1)
    base_lr: float = Field(default=0.001, ge=0)
    lr_drop_every: int = Field(default=15, ge=1)
    lr_drop_factor: float = Field(default=0.1, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    supervision_mode: Literal["mask", "box", "semi"] = "box"
    baseline: Literal["none", "rectangles", "colormodel"] = "none"
    colormodel_iterations: int = Field(default=5, ge=0)
    sampling: Literal["topk_random", "winner_takes_all"] = "topk_random"
    candidate_margin: Optional[float] = Field(
        default=None,
        ge=0,
        description="Só entram no sorteio os k primeiros com custo ≤ melhor + margem (None = k primeiros)",
    )
    er_region: Literal["box_union_segment", "segment"] = Field(
        default="box_union_segment", description="Região onde E_r de um candidato é medido"
    )
    epoch0_overlap_only: bool = Field(default=True, description="Época 0 seleciona só por E_o (λ=0)")
    dump_labelings: bool = False
    seed: int = Field(default=0, ge=0)

    @property
    def effective_k(self) -> int:
        return 1 if self.sampling == "winner_takes_all" else self.k


class SynthConfig(StrictModel):
    """Gerador do conjunto sintético (disco, retângulo, triângulo → classes 1..3)"""
    image_size: int = Field(default=64, ge=32)
    num_images: int = Field(default=200, ge=1, description="Amostras de treino")
    num_test_images: int = Field(default=50, ge=0)
    classes: List[str] = Field(default_factory=lambda: ["disk", "rectangle", "triangle"])
    instances_min: int = Field(default=1, ge=0)
    instances_max: int = Field(default=3, ge=0)
    size_min: float = Field(default=0.2, gt=0, le=1, description="Tamanho mínimo relativo ao lado da imagem")
    size_max: float = Field(default=0.45, gt=0, le=1)
    color_jitter: float = Field(default=0.06, ge=0, description="σ da cor de cada instância")
    pixel_noise: float = Field(default=0.03, ge=0, description="σ do ruído por pixel")
    allow_occlusion: bool = True
    min_visible_area: int = Field(default=40, ge=1)
    mask_fraction: float = Field(default=1.0, ge=0, le=1, description="Fração do treino anotada por máscara")
    max_retries: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)

    @field_validator("classes")
    @classmethod
    def validate_classes(cls, v):
        allowed = {"disk", "rectangle", "triangle"}
        if not v or any(c not in allowed for c in v) or len(set(v)) != len(v):
            raise ValueError(f"Classes devem ser distintas e pertencer a {sorted(allowed)}")
        return v

    @model_validator(mode="after")
    def validate_ranges(self):
        if self.instances_min > self.instances_max:
            raise ValueError("instances_min maior que instances_max")
        if self.size_min > self.size_max:
            raise ValueError("size_min maior que size_max")
        return self


class DataConfig(StrictModel):
    """Localização dos dados do experimento"""
    manifest: Optional[str] = Field(default=None, description="Caminho do manifest.json")
    proposals_dir: Optional[str] = Field(default=None, description="Diretório com <image_id>.proposals.json")
    train_split: str = "train"
    test_split: str = "test"


class InferConfig(StrictModel):
    scales: List[float] = Field(default_factory=lambda: [1.0])

    @field_validator("scales")
    @classmethod
    def validate_scales(cls, v):
        if not v or any(s <= 0 for s in v):
            raise ValueError("scales deve ser não vazio e positivo")
        return v


class EvalConfig(StrictModel):
    trimap_widths: List[int] = Field(default_factory=lambda: [1, 2, 3, 5, 8, 12])
    recall_iou: float = Field(default=0.5, gt=0, le=1)

    @field_validator("trimap_widths")
    @classmethod
    def validate_widths(cls, v):
        if not v or any(w < 1 for w in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("trimap_widths deve ser não vazio, positivo e estritamente crescente")
        return v


class RunConfig(StrictModel):
    """Arquivo de configuração completo de um run"""
    data: DataConfig = Field(default_factory=DataConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    proposer: ProposerConfig = Field(default_factory=ProposerConfig)
    net: NetConfig = Field(default_factory=NetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    infer: InferConfig = Field(default_factory=InferConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        """Aplica o --seed da linha de comando a todas as seções com seed"""
        if seed is None:
            return self
        return self.model_copy(
            update={
                "synth": self.synth.model_copy(update={"seed": seed}),
                "proposer": self.proposer.model_copy(update={"seed": seed}),
                "net": self.net.model_copy(update={"seed": seed}),
                "train": self.train.model_copy(update={"seed": seed}),
            }
        )

    def snapshot(self) -> str:
        """JSON canônico usado como snapshot do run"""
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"


def load_run_config(path: str) -> RunConfig:
    """
    Carrega o arquivo de configuração (TOML ou JSON)

    Args:
        path: Caminho do arquivo

    Returns:
        RunConfig: Configuração validada

    Raises:
        ConfigException: Arquivo ausente ou sintaxe inválida
        pydantic.ValidationError: Chaves desconhecidas ou valores inválidos
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigException(f"Arquivo de configuração não encontrado: {config_path}")
    text = config_path.read_text(encoding="utf-8")
    try:
        if config_path.suffix.lower() == ".toml":
            raw = tomllib.loads(text)
        else:
            raw = json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigException(f"Sintaxe inválida em {config_path}: {e}")
    return RunConfig.model_validate(raw)
