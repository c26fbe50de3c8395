"""Estimate risk preferences and choice precision from poker hand histories."""

from .hands import AliasMap, HandRecord, ParseError, parse_hand_log, validate_hands
from .decisions import PreflopDecision, extract_preflop_decisions, label_trigger_states
from .models import (
    NormalizationSpec,
    PayoffModels,
    WinModel,
    build_gamble,
    fit_payoff_models,
    fit_win_model,
)
from .rum import (
    DEFAULT_SCAN,
    FitConfig,
    Gamble,
    RumFit,
    RumFitError,
    RumParams,
    ScanGrid,
    choice_probability,
    classify_gamble,
    diagnose_omega_validity,
    fit_rum,
    log_likelihood,
    monotonic_domain,
)
from .simulate import (
    AgentProfile,
    GambleConfig,
    generate_gambles,
    recovery_experiment,
    simulate_agent,
)
from .reports import BootstrapConfig, compare_parameters, fold_rate_report, rationality_table
from .pipeline import RunConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AliasMap",
    "HandRecord",
    "ParseError",
    "parse_hand_log",
    "validate_hands",
    "PreflopDecision",
    "extract_preflop_decisions",
    "label_trigger_states",
    "NormalizationSpec",
    "PayoffModels",
    "WinModel",
    "build_gamble",
    "fit_payoff_models",
    "fit_win_model",
    "DEFAULT_SCAN",
    "FitConfig",
    "Gamble",
    "RumFit",
    "RumFitError",
    "RumParams",
    "ScanGrid",
    "choice_probability",
    "classify_gamble",
    "diagnose_omega_validity",
    "fit_rum",
    "log_likelihood",
    "monotonic_domain",
    "AgentProfile",
    "GambleConfig",
    "generate_gambles",
    "recovery_experiment",
    "simulate_agent",
    "BootstrapConfig",
    "compare_parameters",
    "fold_rate_report",
    "rationality_table",
    "RunConfig",
    "run_pipeline",
    "__version__",
]
