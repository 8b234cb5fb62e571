from .knn import KnnConfig, knn_predict
from .gbrt import GbrtConfig, GbrtModel, gbrt_fit, gbrt_predict
from .external import import_external_predictions

__all__ = [
    "KnnConfig", "knn_predict",
    "GbrtConfig", "GbrtModel", "gbrt_fit", "gbrt_predict",
    "import_external_predictions",
]
