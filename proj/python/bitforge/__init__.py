"""Adversarial testbed for intermittent next-bit estimators on stationary
ergodic binary processes.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from ._core import (  # noqa: F401
    CodingFunction,
    EnumerationBudgetError,
    Estimator,
    ForgeConfig,
    ForgeResult,
    HypothesisViolationError,
    ImpossibleHistoryError,
    LevelRecord,
    LevelVerify,
    ProbEstimate,
    RandomStream,
    StoppingRule,
    VerifyReport,
    brute_force_cond_prob,
    callback_estimator,
    callback_rule,
    cond_prob_history,
    continuity_probe,
    d_star,
    encode,
    enumerate_paths_to_hit,
    hitting_time,
    invert,
    last_reset_index,
    make_estimator,
    make_rule,
    run_forge,
    run_session,
    run_verify,
    simulate_path,
    stationary_prob,
    stationary_sample,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
