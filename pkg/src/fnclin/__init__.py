"""Safe linear surrogates of the power-system frequency nadir constraint."""

from .sfr import (
    CommitmentScenario,
    FrequencyTrace,
    NadirResult,
    OtherInertiaDevice,
    ResParams,
    SystemModel,
    TgParams,
    build_system,
    find_nadir,
    simulate_response,
    system_inertia,
)
from .reduced import ReducedModel, aggregate, analytic_margin, analytic_nadir
from .margin import MarginResult, MarginSpec, margin_bisect, verify_monotone
from .features import ElmWeights, embed_unit, feature_matrix, feature_vector, init_weights
from .pwl import (
    BaselineModel,
    PwlModel,
    eval_pwl,
    eval_pwl_batch,
    fit_segment_lp,
    predict_baseline,
    predict_margin,
    train_baseline,
    train_elm_pwl,
)
from .data import (
    GenOptions,
    LabeledDataset,
    generate_scenarios,
    label_dataset,
    load_dataset,
    perturb_dataset,
    save_dataset,
    split,
)
from .constraints import audit_constraints, emit_constraints
from .evaluate import metrics, parse_config, render_report, run_experiment

__version__ = "0.1.0"
