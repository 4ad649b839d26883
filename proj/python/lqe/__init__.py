"""Next-second link-quality forecasting from RSRP/SINR traces.

Thin bindings over the C++ core: trace I/O, EMA decomposition, LSTM
training, forecasting and grade metrics.
"""

from ._core import (
    GRADES,
    EvalReport,
    Forecast,
    Model,
    SessionTrace,
    TrainResult,
    accuracy,
    decompose,
    evaluate,
    forecast,
    generate_synthetic_trace,
    grade_of,
    load_model,
    macro_f1,
    read_trace_csv,
    save_model,
    train,
    write_trace_csv,
)

__all__ = [
    "GRADES",
    "EvalReport",
    "Forecast",
    "Model",
    "SessionTrace",
    "TrainResult",
    "accuracy",
    "decompose",
    "evaluate",
    "forecast",
    "generate_synthetic_trace",
    "grade_of",
    "load_model",
    "macro_f1",
    "read_trace_csv",
    "save_model",
    "train",
    "write_trace_csv",
]
