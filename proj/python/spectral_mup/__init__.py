"""Width-aware parameterization of MLPs.

Thin wrapper over the compiled ``_core`` module. Matrices go in and out as
2-d numpy arrays; batches are column-major (features x batch).
"""

from ._core import (
    Activation,
    ConfigError,
    HyperParams,
    InvalidArgument,
    IoError,
    LayerRole,
    LayerSpec,
    LossKind,
    Mlp,
    NumericalError,
    OptimizerKind,
    ParamScheme,
    ScalingRule,
    Trainer,
    build,
    coord_check,
    derive_rule,
    lr_sweep,
    matrix_fractional_power,
    mlp_specs,
    newton_schulz_orthogonalize,
    numerical_rank,
    parse_optimizer,
    parse_scheme,
    rule_table,
    run_cli,
    singular_values,
    spectral_norm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
