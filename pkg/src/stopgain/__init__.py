"""Profit/loss distribution of a stop-protected affine feedback trading rule.

The package has four layers: parameter types and closed-form gain expressions
(:mod:`stopgain.model`), the distribution functions (:mod:`stopgain.cdf`), a
seeded Monte Carlo sampler (:mod:`stopgain.simulate`) and the comparison
harness tying the two together (:mod:`stopgain.verify`).  The ``stopgain``
command line wraps all of it.
"""

from .cdf import (
    BRANCH_FLOOR,
    BRANCH_MIDDLE,
    BRANCH_NO_STOP,
    BRANCH_UPPER,
    CdfQuery,
    CdfValue,
    ShorthandContext,
    a_of_x,
    b_of_x_t,
    big_x,
    cdf_no_stop,
    cdf_with_stop,
    joint_cdf_stopped,
    joint_cdf_unstopped,
    joint_survival,
    omega,
    std_normal_cdf,
    stopping_time_cdf,
    theta,
)
from .errors import (
    DomainError,
    EmptySampleError,
    ParameterError,
    RegimeError,
    ResourceError,
    StopgainError,
)
from .model import (
    GainSample,
    MarketParams,
    Regime,
    TradeSpec,
    check_survivability,
    control_value,
    expected_gain_lower_bound,
    g_star,
    g_star_t,
    gain_no_stop,
    gain_stopped,
    timid_floor,
    z_star,
)
from .simulate import (
    BatchResult,
    PathGrid,
    PricePath,
    SeedSpec,
    StoppedPath,
    detect_stop,
    gain_trajectory,
    run_batch,
    sample_path,
)
from .verify import (
    ComparisonReport,
    EmpiricalCdf,
    FigureResult,
    LegResult,
    PropertyReport,
    compare,
    comparison_grid,
    empirical_cdf,
    property_suite,
    replicate,
    reproduce_figure,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "StopgainError",
    "ParameterError",
    "RegimeError",
    "DomainError",
    "ResourceError",
    "EmptySampleError",
    # model
    "MarketParams",
    "TradeSpec",
    "Regime",
    "GainSample",
    "z_star",
    "g_star",
    "g_star_t",
    "timid_floor",
    "gain_no_stop",
    "gain_stopped",
    "control_value",
    "check_survivability",
    "expected_gain_lower_bound",
    # cdf
    "std_normal_cdf",
    "ShorthandContext",
    "CdfQuery",
    "CdfValue",
    "BRANCH_FLOOR",
    "BRANCH_MIDDLE",
    "BRANCH_UPPER",
    "BRANCH_NO_STOP",
    "big_x",
    "a_of_x",
    "b_of_x_t",
    "cdf_no_stop",
    "omega",
    "stopping_time_cdf",
    "joint_survival",
    "theta",
    "joint_cdf_stopped",
    "joint_cdf_unstopped",
    "cdf_with_stop",
    # simulate
    "PathGrid",
    "PricePath",
    "StoppedPath",
    "SeedSpec",
    "BatchResult",
    "sample_path",
    "detect_stop",
    "gain_trajectory",
    "run_batch",
    # verify
    "EmpiricalCdf",
    "ComparisonReport",
    "FigureResult",
    "LegResult",
    "PropertyReport",
    "empirical_cdf",
    "compare",
    "comparison_grid",
    "replicate",
    "reproduce_figure",
    "property_suite",
]
