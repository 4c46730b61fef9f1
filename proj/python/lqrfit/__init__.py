"""Linear policy fitting with Kalman constraints."""

import json as _json

from ._core import (
    ConvergenceError,
    DimensionError,
    Error,
    SingularSystemError,
    SolverError,
    ValidationError,
    build_aircraft,
    build_small_random,
    check_kalman_feasible,
    closed_loop_cost,
    fit_kalman,
    generate_demos,
    huber_value,
    kalman_residual,
    policy_fit,
    project_psd,
    solve_lqr,
    spectral_radius,
)
from ._core import _run_experiment as _core_run


def run_experiment(config=None, output_dir=None):
    """Run a benchmark sweep; returns the per-N summary as a dict."""
    text = _json.dumps(config or {})
    return _json.loads(_core_run(text, "" if output_dir is None else str(output_dir)))


__all__ = [name for name in dir() if not name.startswith("_")]
