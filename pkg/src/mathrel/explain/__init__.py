from .aggregate import ClassBarSummary, EmptyGroup, aggregate_bar, load_attributions, save_attributions
from .render import render_reports
from .shapley import (
    EXACT_LIMIT,
    Attribution,
    ExplainConfig,
    ModelGame,
    TooManyTokens,
    ValueFunctionSpec,
    coalition_value,
    exact_values,
    explain_all_classes,
    explain_predicted,
    sampled_values,
    set_function_game,
    shapley_exact,
    shapley_sampled,
)

__all__ = [
    "Attribution", "ClassBarSummary", "EXACT_LIMIT", "EmptyGroup", "ExplainConfig", "ModelGame",
    "TooManyTokens", "ValueFunctionSpec", "aggregate_bar", "coalition_value", "exact_values",
    "explain_all_classes", "explain_predicted", "load_attributions", "render_reports",
    "sampled_values", "save_attributions", "set_function_game", "shapley_exact", "shapley_sampled",
]
