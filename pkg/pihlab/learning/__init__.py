from pihlab.learning._common import AXES, FEATURE_NAMES, FeatureSelector, sign_with_tiebreak
from pihlab.learning.dataset import (
    DATASET_COLUMNS,
    Dataset,
    DatasetRecord,
    collect_dataset,
    sample_misalignment,
)
from pihlab.learning.gp import (
    GpRegressor,
    RbfKernelParams,
    gp_fit,
    gp_load,
    gp_predict,
    gp_save,
    tune_lengthscale,
)
from pihlab.learning.classify import (
    DirectionClassifier,
    DirectionModels,
    MagnitudeRegressor,
    fit_direction_classifier,
    fit_direction_models,
    fit_magnitude_regressor,
    predict_direction,
)
from pihlab.learning.forest import (
    ForestConfig,
    RandomForest,
    feature_importance,
    fit_forest,
    fit_forest_arrays,
)
from pihlab.learning.evaluate import EvaluationReport, evaluate_models
