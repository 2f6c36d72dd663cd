"""
Schemas Pydantic dos formatos de arquivo (RLE, caixas, manifest, histórico, rotulagens)
"""
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class RLEMaskRecord(BaseModel):
    """Objeto JSON de máscara: {"w": int, "h": int, "runs": [start, len, ...]}"""
    model_config = ConfigDict(extra="forbid")

    w: int = Field(..., ge=1)
    h: int = Field(..., ge=1)
    runs: List[int] = Field(default_factory=list)


class BoxRecord(BaseModel):
    """Uma linha do arquivo de caixas (JSON lines)"""
    model_config = ConfigDict(extra="forbid")

    label: int = Field(..., ge=1, le=254)
    x0: int
    y0: int
    x1: int
    y1: int

    @model_validator(mode="after")
    def validate_extent(self):
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError("Caixa degenerada")
        return self


class ManifestEntry(BaseModel):
    """Entrada por amostra do manifest (caminhos relativos à raiz do dataset)"""
    model_config = ConfigDict(extra="forbid")

    image_id: str = Field(..., min_length=1)
    image: str
    mask: Optional[str] = None
    boxes: Optional[str] = None
    instances: Optional[str] = None
    proposals: Optional[str] = None
    annotation: Literal["mask", "box"] = "box"
    split: str = "train"

    @model_validator(mode="after")
    def validate_annotation(self):
        if self.annotation == "mask" and self.mask is None:
            raise ValueError(f"Amostra '{self.image_id}' anotada por máscara sem arquivo de máscara")
        if self.annotation == "box" and self.boxes is None:
            raise ValueError(f"Amostra '{self.image_id}' anotada por caixa sem arquivo de caixas")
        return self


class DatasetManifest(BaseModel):
    """Conteúdo de manifest.json"""
    model_config = ConfigDict(extra="forbid")

    version: int = 1
    num_classes: int = Field(..., ge=2, le=255)
    class_names: List[str] = Field(default_factory=list)
    samples: List[ManifestEntry] = Field(default_factory=list)

    @field_validator("samples")
    @classmethod
    def validate_unique_ids(cls, v):
        ids = [entry.image_id for entry in v]
        if len(ids) != len(set(ids)):
            raise ValueError("image_id duplicado no manifest")
        return v


class HistoryRecord(BaseModel):
    """Uma linha de history.jsonl"""
    epoch: int
    lr: float
    mean_loss: float
    supervision_miou: Optional[float] = None


class LabelingRecord(BaseModel):
    """Conteúdo de <image_id>.labeling.json (índice da caixa → id do segmento)"""
    image_id: str
    epoch: int
    selections: Dict[int, int]
