"""Geospatial indicator prediction pipeline.

Spatial sampling, geographic retrieval with record/replay fixtures,
two-stage prompting against pluggable chat models, 0.0-9.9 answer
binning, shallow baselines, and an evaluation/ablation/bias harness that
runs fully offline on synthetic cities.
"""

from .geo import BBox, GeoPoint, bounding_box, haversine_distance
from .sampling import SampleOrder, SplitConfig, farthest_first_order, split_dataset
from .binning import BinLabel, BinScale, fit_bin_scale, from_bin, to_bin
from .evaluation import MetricsReport, evaluate_run, mae, r_squared, rmse, run_ablations
from .prompts import (AblationFlags, PRESETS, PromptBundle, Rationale,
                      render_answer_prompt, render_rationale_prompt)
from .gateway import Gateway, ModelConfig, ModelResponse, parse_bin_answer, predict_sample
from .baselines import (GbrtConfig, GbrtModel, KnnConfig, gbrt_fit, gbrt_predict,
                        import_external_predictions, knn_predict)
from .bias import BiasRecord, PoiCategory, bias_correlation_table, pearson_r, poi_counts
from .tasks import TASKS, IndicatorTask, get_task

__version__ = "0.1.0"

__all__ = [
    "BBox", "GeoPoint", "bounding_box", "haversine_distance",
    "SampleOrder", "SplitConfig", "farthest_first_order", "split_dataset",
    "BinLabel", "BinScale", "fit_bin_scale", "from_bin", "to_bin",
    "MetricsReport", "evaluate_run", "mae", "r_squared", "rmse", "run_ablations",
    "AblationFlags", "PRESETS", "PromptBundle", "Rationale",
    "render_answer_prompt", "render_rationale_prompt",
    "Gateway", "ModelConfig", "ModelResponse", "parse_bin_answer", "predict_sample",
    "GbrtConfig", "GbrtModel", "KnnConfig", "gbrt_fit", "gbrt_predict",
    "import_external_predictions", "knn_predict",
    "BiasRecord", "PoiCategory", "bias_correlation_table", "pearson_r", "poi_counts",
    "TASKS", "IndicatorTask", "get_task",
    "__version__",
]
