from .model import (ALGORITHMS, DEFAULTS, FitError, Model, Prediction, SchemaMismatch,
                    UnsupportedOperation, dumps, feature_importance, fit, load_model, loads,
                    predict, predict_proba, save_model)

__all__ = [
    "ALGORITHMS", "DEFAULTS", "FitError", "Model", "Prediction", "SchemaMismatch",
    "UnsupportedOperation", "dumps", "feature_importance", "fit", "load_model", "loads",
    "predict", "predict_proba", "save_model",
]
