"""Partially noncentered data augmentation for the Gaussian AR(1)-plus-noise
model: EM fitters with optimal working parameters, a two-block Gibbs sampler
and a variational approximation sharing the same convergence rate, plus an
experiment CLI.
"""

from .backends import BACKEND
from .model import (
    ModelParams,
    Parametrization,
    TimeSeries,
    from_alpha,
    gls_location,
    log_likelihood,
    read_series_csv,
    simulate,
    to_alpha,
    write_series_csv,
)
from .em import (
    FitReport,
    InfoEntries,
    SmoothedMoments,
    algorithm1,
    algorithm2,
    algorithm3,
    default_init,
    e_step,
    info_entries,
    rate_location,
    update_mu,
    update_phi,
    update_sigma_eps,
    update_sigma_eta,
    write_fit_csv,
)
from .gibbs import Chain, lag1_autocorr, run_chain, sample_mu, sample_states
from .vb import VbState, vb_fit, vb_iterate, vb_rate
from .workparam import (
    LocationScheme,
    ScaleScheme,
    a_hat_asymptotic,
    a_opt_scale,
    location_scheme,
    scale_approx,
    scale_opt,
    w_opt_bounds,
    w_opt_common,
    w_opt_location,
    w_opt_location_closed,
)

__version__ = "0.1.0"
