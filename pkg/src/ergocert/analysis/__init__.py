"""Certification frameworks for ergodicity, output controllability and
antithetic integral control."""

from .certificate import (Certificate, ControlSpec, Framework, PreconditionError, Property,
                          Verdict)
from .checker import CheckResult, check_certificate
from .driver import FRAMEWORKS, certify, certify_all, overall, prepare, verdict_table
from .interval import (aic_interval, ergodicity_interval, ergodicity_interval_bimolecular,
                       output_controllability_interval)
from .nominal import (aic_nominal, ergodicity_bimolecular_nominal, ergodicity_nominal,
                      graph_path, output_controllability, rank_row_controllable,
                      setpoint_bound_nominal)
from .robust import (RobustFamily, aic_robust, ergodicity_robust, ergodicity_robust_bimolecular,
                     output_controllability_robust, reduce_to_cv)
from .sign import aic_sign, ergodicity_sign, output_controllability_sign
from .structural import aic_structural, ergodicity_structural, output_controllability_structural

__all__ = [name for name in dir() if not name.startswith("_")]
