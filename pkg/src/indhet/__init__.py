"""Industrial heterogeneity metrics: zonotope Gini volume, normalized maximum
entropy, tangent-against-input-axes angles and maximum-entropy production
function estimation."""

__version__ = "0.1.0"

from .entropy import MEReport, h_max, h_star, kmeans_fit, me_report, normalized_me
from .ingest import FirmObservation, PanelKey, SurveyRecord, build_panels, parse_survey_csv
from .meregress import BasisSpec, fit_me_density, fit_me_regression, predict, scale_to_unit
from .zonotope import (GeneratorSet, gini_volume, normalization_bias_report, tangent_angles,
                       zonotope_volume)

__all__ = [
    "BasisSpec",
    "FirmObservation",
    "GeneratorSet",
    "MEReport",
    "PanelKey",
    "SurveyRecord",
    "build_panels",
    "fit_me_density",
    "fit_me_regression",
    "gini_volume",
    "h_max",
    "h_star",
    "kmeans_fit",
    "me_report",
    "normalization_bias_report",
    "normalized_me",
    "parse_survey_csv",
    "predict",
    "scale_to_unit",
    "tangent_angles",
    "zonotope_volume",
]
