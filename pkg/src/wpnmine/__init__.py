"""Mining and triage of web push notification ad campaigns.

Pipeline stages: ingest JSONL notification logs, embed message text,
combine soft-cosine text distance with landing-URL path distance,
cluster by agglomerative linkage with a silhouette-selected cut, label
campaigns and malicious/suspicious content, and group clusters into
meta-clusters through shared landing domains. A report CLI and an
analyst triage HTTP service sit on top.
"""

from ._kernels import BACKEND_NAME
from .config import PipelineConfig, load_config
from .errors import (
    ConfigError,
    HostParseError,
    PipelineError,
    SchemaError,
    UrlParseError,
    WpnMineError,
)
from .ingest import Dataset, load_dataset
from .model import WpnRecord, parse_url
from .report import PipelineArtifacts, PipelineReport, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "ConfigError",
    "Dataset",
    "HostParseError",
    "PipelineArtifacts",
    "PipelineConfig",
    "PipelineError",
    "PipelineReport",
    "SchemaError",
    "UrlParseError",
    "WpnMineError",
    "WpnRecord",
    "load_config",
    "load_dataset",
    "parse_url",
    "run_pipeline",
    "__version__",
]
