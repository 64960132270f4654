"""Hypothesis-driven decision support built on weight of evidence over
Gaussian class-conditional models, with the study instruments (conditions,
uncertainty-based instance selection, reliance metrics) used to evaluate
decision-support designs."""

from .dataset import (
    ConceptActivationTable,
    CsvSchema,
    DiscretizationSpec,
    LabeledTable,
    balance,
    discretize_target,
    load_concepts,
    load_csv,
    split,
)
from .errors import EngineError
from .evidence import (
    CATEGORIES,
    ConditionView,
    EvidenceItem,
    HypothesisReport,
    SignificanceScale,
    bucket,
    condition_view,
    rank_hypotheses,
    report,
    uncertainty,
)
from .metrics import (
    ModelTrace,
    StudyResponse,
    brier,
    over_reliance,
    precision_recall_f1,
    select_instances,
    selected_hypotheses_pct,
    under_reliance,
)
from .model import (
    Assumption,
    ClassStats,
    GaussianEvidenceModel,
    Label,
    classify,
    classify_joint,
    conditional_gaussian,
    fit,
    log_density_independent,
    log_density_subset,
    mixture_log_density,
    per_feature_woe,
    posterior,
    total_woe,
    woe,
)
from .persistence import load_model, save_model

__all__ = [
    "Assumption",
    "CATEGORIES",
    "ClassStats",
    "ConceptActivationTable",
    "ConditionView",
    "CsvSchema",
    "DiscretizationSpec",
    "EngineError",
    "EvidenceItem",
    "GaussianEvidenceModel",
    "HypothesisReport",
    "Label",
    "LabeledTable",
    "ModelTrace",
    "SignificanceScale",
    "StudyResponse",
    "balance",
    "brier",
    "bucket",
    "classify",
    "classify_joint",
    "condition_view",
    "conditional_gaussian",
    "discretize_target",
    "fit",
    "load_concepts",
    "load_csv",
    "load_model",
    "log_density_independent",
    "log_density_subset",
    "mixture_log_density",
    "over_reliance",
    "per_feature_woe",
    "posterior",
    "precision_recall_f1",
    "rank_hypotheses",
    "report",
    "save_model",
    "select_instances",
    "selected_hypotheses_pct",
    "split",
    "total_woe",
    "uncertainty",
    "under_reliance",
    "woe",
]

__version__ = "0.1.0"
