from .dataset import Dataset, collect_dataset, hk_target, load_dataset, save_dataset
from .features import FeatureExtractor, LocalInput, extract_features
from .heuristic import LearnedLocalHeuristic, predict_hk
from .network import (Model, ModelLoadError, evaluate_loss, gradient_check, load_model, new_model,
                      save_model, train)

__all__ = [
    "Dataset", "collect_dataset", "hk_target", "load_dataset", "save_dataset",
    "FeatureExtractor", "LocalInput", "extract_features",
    "LearnedLocalHeuristic", "predict_hk",
    "Model", "ModelLoadError", "evaluate_loss", "gradient_check", "load_model", "new_model",
    "save_model", "train",
]
