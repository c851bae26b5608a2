"""Training-free appliance state detection from aggregate household power.

The pipeline turns raw channel files into a uniform 6-second grid, derives
per-appliance knowledge profiles, assembles prompts for a chat-completion
model window by window (carrying predicted states forward as context),
normalizes the model's JSON output, and scores the result against
threshold-derived ground truth.
"""

from .client import BackendConfig, RawResponse, complete, make_backend, mock_complete
from .driver import RunConfig, SeriesResult, context_tail, run_series
from .errors import PromptNilmError
from .harness import ExperimentSpec, run_ablation, run_eval, run_sweep
from .ingest import HouseLayout, PowerSeries, RawReading, Region, load_channel, load_house, parse_labels
from .knowledge import ApplianceProfile, KnowledgeToggle, extract_profile, render_knowledge
from .metrics import ConfusionCounts, ScoreReport, Scores, confusion, overall, scores
from .normalizer import NormalizationOutcome, WindowPrediction, fix_length, normalize
from .preprocess import (
    ApplianceSpec,
    StateSeries,
    UniformSeries,
    aggregate_mains,
    backfill,
    resample_mean,
    threshold_states,
)
from .prompt import ContextBlock, OneShotExample, PromptConfig, WindowInput, build_prompt

__version__ = "0.1.0"

__all__ = [
    "ApplianceProfile",
    "ApplianceSpec",
    "BackendConfig",
    "ConfusionCounts",
    "ContextBlock",
    "ExperimentSpec",
    "HouseLayout",
    "KnowledgeToggle",
    "NormalizationOutcome",
    "OneShotExample",
    "PowerSeries",
    "PromptConfig",
    "PromptNilmError",
    "RawReading",
    "RawResponse",
    "Region",
    "RunConfig",
    "ScoreReport",
    "Scores",
    "SeriesResult",
    "StateSeries",
    "UniformSeries",
    "WindowInput",
    "WindowPrediction",
    "aggregate_mains",
    "backfill",
    "build_prompt",
    "complete",
    "confusion",
    "context_tail",
    "extract_profile",
    "fix_length",
    "load_channel",
    "load_house",
    "make_backend",
    "mock_complete",
    "normalize",
    "overall",
    "parse_labels",
    "render_knowledge",
    "resample_mean",
    "run_ablation",
    "run_eval",
    "run_series",
    "run_sweep",
    "scores",
    "threshold_states",
]
