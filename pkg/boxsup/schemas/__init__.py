"""
Schemas Pydantic para configuração, arquivos e relatórios
"""
from boxsup.schemas.config import (
    DataConfig,
    EvalConfig,
    InferConfig,
    NetConfig,
    ProposerConfig,
    RunConfig,
    SynthConfig,
    TrainConfig,
    load_run_config,
)
from boxsup.schemas.files import (
    BoxRecord,
    DatasetManifest,
    HistoryRecord,
    LabelingRecord,
    ManifestEntry,
    RLEMaskRecord,
)
from boxsup.schemas.report import (
    GradCheckReport,
    GradCheckSeedResult,
    IouReport,
    RecallReport,
    TrimapReport,
    TrimapRow,
)

__all__ = [
    "DataConfig",
    "EvalConfig",
    "InferConfig",
    "NetConfig",
    "ProposerConfig",
    "RunConfig",
    "SynthConfig",
    "TrainConfig",
    "load_run_config",
    "BoxRecord",
    "DatasetManifest",
    "HistoryRecord",
    "LabelingRecord",
    "ManifestEntry",
    "RLEMaskRecord",
    "GradCheckReport",
    "GradCheckSeedResult",
    "IouReport",
    "RecallReport",
    "TrimapReport",
    "TrimapRow",
]
