"""Robust discrimination designs for rival nonlinear regression models."""

from .bounds import (BoundResult, bound_iterative, bound_lp, conditionally_linear_certificate,
                     conditionally_linear_point, format_bound_report, replay_certificate)
from .bvls import BvlsSolution, bvls
from .criterion import (ConfidenceBox, delta_given_theta, delta_r, delta_r_bvls,
                        delta_unrestricted)
from .errors import (DeltaDesignError, FitFailure, GuardExceeded, InvalidArgument, NotFound,
                     NumericDomainError, SolverFailure)
from .fitting import FitConfig, fit_mle, levenberg_marquardt
from .linearization import (LinearizedPair, PointTable, QuadraticForm, linearize,
                            quadratic_components)
from .models import (DesignSpace, DiscriminationProblem, ExactDesign, RegressionModel,
                     builtin_pair, custom_model, encompassing_mean, get_model, mean_vector,
                     model_names, register_model)
from .search import (SearchConfig, SearchResult, enumerate_optimal, kl_exchange,
                     round_approximate, sweep_r)
from .simplex import LpProblem, LpSolution, simplex_solve
from .simulation import (ErrorModel, SimConfig, SimReport, batch_hit_rates, batched_rates,
                         correct_decision_lower_bound, decide, run_simulation)
from .special import chi2_cdf, gammainc_lower

__version__ = "0.1.0"
