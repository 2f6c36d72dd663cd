"""
Schemas Pydantic dos relatórios de avaliação
"""
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class IouReport(BaseModel):
    """IoU por classe (None quando a união é zero) e média sobre as classes presentes"""
    per_class: List[Optional[float]]
    mean_iou: float = Field(..., ge=0, le=1)
    pixel_count: int = Field(..., ge=0)


class TrimapRow(BaseModel):
    band_width: int = Field(..., ge=1)
    boundary_miou: Optional[float] = Field(None, description="None quando a banda não tem pixels")
    interior_miou: Optional[float] = Field(None, description="None quando o interior não tem pixels")


class TrimapReport(BaseModel):
    rows: List[TrimapRow] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_widths(self):
        widths = [row.band_width for row in self.rows]
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise ValueError("Larguras da banda devem ser estritamente crescentes")
        return self


class GradCheckSeedResult(BaseModel):
    seed: int
    max_relative_error: float


class GradCheckReport(BaseModel):
    threshold: float
    results: List[GradCheckSeedResult] = Field(default_factory=list)

    @property
    def max_relative_error(self) -> float:
        return max((r.max_relative_error for r in self.results), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.threshold


class RecallReport(BaseModel):
    iou_threshold: float
    instances: int
    recalled: int
    recall: float
    mean_pool_size: float
