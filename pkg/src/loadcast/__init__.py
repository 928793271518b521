"""Consumer-type-aware short-term electricity load forecasting toolkit.

Pipeline: classify consumers by load-profile rules, build task-specific
feature matrices, train tree-ensemble forecasters (with holiday/workday
fusion or baseline-augmented hybrid strategies per type), tune them with a
TPE search, and evaluate day-ahead and 15-minute forecasts under a
rolling-origin production scenario with MAPE/MAE threshold scores.
"""

__version__ = "0.1.0"
