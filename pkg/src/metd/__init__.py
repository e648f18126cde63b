"""Matrix exponential time differencing for ``Q' = LQ + QR + N(Q, t)``."""
from .errors import (BootstrapError, BudgetError, ConfigError, DegenerateProblemError,
                     DimensionError, DivergenceError, ExcludedModeError, MetdError,
                     NumericRangeError, OracleFailureError, PaddingViolationError)
from .matcore import PhiSet, commutator, expm, phi_functions, phi_set
from .stepper import (MatrixOdeProblem, PropagatorTable, StepState, build_table, initial_state,
                      integrate, step_metd1, step_metd2, step_metd2rk, vectorized_etd1_step)
from .extensions import (BchExpansion, bch_z, build_regularized_adjacency, build_sylvester_table,
                         padded_expm_R, regularize_z, scaled_bch, step_metd1_sylvester)

__version__ = "0.1.0"
