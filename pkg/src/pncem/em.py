"""E-step moments, conditional-maximization updates and the three fitters.

The missing data are the transformed states alpha = sigma_eta^{-a}(x - w mu).
Their conditional law given y is Gaussian with

    mean  m = sigma_eta^{-a} (Omega^{-1} z + mu (1 - w)),  z = (y - mu 1)/sigma_eps^2
    cov   V = sigma_eta^{-2a} Omega^{-1},

of which only the diagonal and first off-diagonal are ever needed.  The
working parameters (a, w) do not change the fitted model, only the speed of
the fit:

* algorithm1 -- mu unknown; with w equal to the optimal location weights the
  update map has zero derivative and the fit lands on the GLS value in one
  iteration.
* algorithm2 -- sigma_eta^2 unknown; schemes select a and w per iteration.
* algorithm3 -- all four parameters unknown; each iteration runs three
  cycles (mu | phi and sigma_eps^2 jointly | sigma_eta^2), refreshing the
  moments and the parametrization before each conditional update.

All fits terminate when the relative increase in the observed-data
log-likelihood drops below ``tol`` (default 1e-8) or after ``max_iter``
iterations (default 10000).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from . import tridiag, workparam
from .model import ModelParams, Parametrization, TimeSeries

__all__ = [
    "SmoothedMoments",
    "TrajectoryPoint",
    "FitReport",
    "InfoEntries",
    "SigmaEtaRootError",
    "PhiRootError",
    "e_step",
    "update_mu",
    "update_sigma_eps",
    "update_sigma_eta",
    "update_phi",
    "rate_location",
    "info_entries",
    "algorithm1",
    "algorithm2",
    "algorithm3",
    "default_init",
    "write_fit_csv",
]

LOCATION_SCHEMES = ("centered", "noncentered", "partial")
SCALE_SCHEMES = ("centered", "noncentered", "partial", "approx")


class SigmaEtaRootError(ArithmeticError):
    """The scale update equation has no positive root in the search bracket."""


class PhiRootError(ArithmeticError):
    """No real root of the phi update cubic found inside (-1, 1)."""


@dataclass(frozen=True)
class SmoothedMoments:
    """Conditional mean of alpha plus the needed pieces of its covariance."""

    m: np.ndarray
    v_diag: np.ndarray
    v_offdiag: np.ndarray
    tr_v: float
    tr_lambda_v: float


class TrajectoryPoint(NamedTuple):
    params: ModelParams
    loglik: float
    a: float
    w_mean: float
    rate: Optional[float]


@dataclass
class FitReport:
    trajectory: list
    iterations: int
    terminated_by: str  # "tolerance" or "max-iterations"
    final: ModelParams
    cycle_logliks: list = field(default_factory=list)
    flags: list = field(default_factory=list)


@dataclass(frozen=True)
class InfoEntries:
    """Augmented/missing information entries at the supplied parametrization."""

    i_mu: float
    i_mis_mu: float
    i_sig_eta: float
    i_sig_eps: float
    i_phi: float
    i_sig_eps_phi: float


# ---------------------------------------------------------------------------
# E-step and conditional updates
# ---------------------------------------------------------------------------

def e_step(y: TimeSeries, params: ModelParams, par: Parametrization,
           factor=None, selinv=None) -> SmoothedMoments:
    """Smoothed moments of alpha given y at theta, O(n).

    ``factor`` and ``selinv`` allow reuse of the Omega factorization across
    calls that keep (sigma_eta^2, sigma_eps^2, phi) fixed; this module never
    caches them itself.
    """
    yv = y.y
    n = yv.size
    if factor is None:
        factor = tridiag.factorize(tridiag.build_omega(params, n))
    if selinv is None:
        selinv = tridiag.selected_inverse(factor)
    z = (yv - params.mu) / params.sigma_eps_sq
    s_a = params.sigma_eta_sq ** (par.a / 2.0)
    m = (tridiag.solve(factor, z) + params.mu * par.w_tilde) / s_a
    scale = params.sigma_eta_sq ** (-par.a)
    if scale == 1.0:  # selected-inverse arrays are never mutated downstream
        v_diag = selinv.inv_diag
        v_offdiag = selinv.inv_offdiag
    else:
        v_diag = scale * selinv.inv_diag
        v_offdiag = scale * selinv.inv_offdiag
    phi = params.phi
    tr_lambda_v = (
        v_diag[0] + v_diag[-1]
        + (1.0 + phi * phi) * float(v_diag[1:-1].sum())
        - 2.0 * phi * float(v_offdiag.sum())
    )
    return SmoothedMoments(m, v_diag, v_offdiag, float(v_diag.sum()), tr_lambda_v)


def _tau(params: ModelParams, par: Parametrization, lam: tridiag.SymTridiag) -> float:
    wt = par.w_tilde
    return float(
        par.w @ par.w / params.sigma_eps_sq + lam.quad_form(wt) / params.sigma_eta_sq
    )


def update_mu(y: TimeSeries, moments: SmoothedMoments, params: ModelParams,
              par: Parametrization, lam=None) -> float:
    """Conditional maximizer of Q over mu:

    mu = {(y - sigma_eta^a m)' w / sigma_eps^2
          + sigma_eta^{a-2} m' Lambda (1-w)} / tau(w),
    tau(w) = w'w / sigma_eps^2 + (1-w)' Lambda (1-w) / sigma_eta^2.
    """
    if lam is None:
        lam = tridiag.build_lambda(params.phi, y.n)
    s_a = params.sigma_eta_sq ** (par.a / 2.0)
    tau = _tau(params, par, lam)
    assert tau > 0.0, "tau(w) must be positive for valid inputs"
    num = (y.y - s_a * moments.m) @ par.w / params.sigma_eps_sq
    num += s_a / params.sigma_eta_sq * (moments.m @ lam.matvec(par.w_tilde))
    return float(num / tau)


def update_sigma_eps(y: TimeSeries, moments: SmoothedMoments, params: ModelParams,
                     par: Parametrization) -> float:
    """Conditional maximizer over sigma_eps^2: mean squared residual plus the
    smoothing variance carried through the observation equation."""
    s_a = params.sigma_eta_sq ** (par.a / 2.0)
    resid = y.y - params.mu * par.w - s_a * moments.m
    return float((resid @ resid + s_a * s_a * moments.tr_v) / y.n)


def update_sigma_eta(y: TimeSeries, moments: SmoothedMoments, params: ModelParams,
                     par: Parametrization, lam=None) -> float:
    """Conditional maximizer over sigma_eta^2.

    Closed forms exist for a = 0 and for (a = 1, w = 1); any other scheme
    leaves a scalar equation in s = sigma_eta^2,

        (1-a) s^a A + mu^2 B + (a-2) mu s^{a/2} C
            + a s {s^{a/2} D - s^a E} / sigma_eps^2 - n (1-a) s = 0,

    with A = m'Lam m + tr(Lam V), B = w~'Lam w~, C = m'Lam w~,
    D = (y - mu w)'m, E = m'm + tr(V).  The root is bracketed on a 64-point
    log grid spanning [1e-8, 1e8] times the current value and bisected to
    1e-12 relative width; with several sign changes the candidate maximizing
    Q is kept.
    """
    n = y.n
    a = par.a
    if lam is None:
        lam = tridiag.build_lambda(params.phi, n)
    wt = par.w_tilde
    m = moments.m

    if a == 0.0:
        dev = m - params.mu * wt
        return float((lam.quad_form(dev) + moments.tr_lambda_v) / n)
    if a == 1.0 and np.all(par.w == 1.0):
        denom = m @ m + moments.tr_v
        return float(((y.y - params.mu) @ m) ** 2 / denom**2)

    qa = float(lam.quad_form(m) + moments.tr_lambda_v)  # A
    qb = float(lam.quad_form(wt))                       # B
    qc = float(m @ lam.matvec(wt))                      # C
    qd = float((y.y - params.mu * par.w) @ m)           # D
    qe = float(m @ m + moments.tr_v)                    # E
    mu, se2 = params.mu, params.sigma_eps_sq

    def residual(s: float) -> float:
        sh = s ** (0.5 * a)
        sa = sh * sh
        return ((1.0 - a) * sa * qa + mu * mu * qb + (a - 2.0) * mu * sh * qc
                + a * s / se2 * (sh * qd - sa * qe) - n * (1.0 - a) * s)

    def q_value(s: float) -> float:
        # phi- and sigma_eps-independent terms dropped; enough to rank roots
        sh = s ** (0.5 * a)
        sa = sh * sh
        return (-(sa * qe - 2.0 * sh * qd) / se2 - n * (1.0 - a) * np.log(s)
                - (sa * qa - 2.0 * mu * sh * qc + mu * mu * qb) / s)

    s_prev = params.sigma_eta_sq
    grid = s_prev * np.logspace(-8.0, 8.0, 64)
    sh_g = grid ** (0.5 * a)
    values = ((1.0 - a) * sh_g**2 * qa + mu * mu * qb + (a - 2.0) * mu * sh_g * qc
              + a * grid / se2 * (sh_g * qd - sh_g**2 * qe) - n * (1.0 - a) * grid)
    roots = []
    for k in range(63):
        f_lo, f_hi = values[k], values[k + 1]
        if f_lo == 0.0:
            roots.append(grid[k])
            continue
        if f_lo * f_hi >= 0.0:
            continue
        lo, hi = grid[k], grid[k + 1]
        for _ in range(200):
            if hi - lo <= 1e-12 * hi:
                break
            mid = 0.5 * (lo + hi)
            f_mid = residual(mid)
            if f_mid == 0.0:
                lo = hi = mid
                break
            if f_lo * f_mid < 0.0:
                hi = mid
            else:
                lo, f_lo = mid, f_mid
        roots.append(0.5 * (lo + hi))
    if values[-1] == 0.0:
        roots.append(grid[-1])
    if not roots:
        raise SigmaEtaRootError(
            f"no positive root in [{grid[0]:.3e}, {grid[-1]:.3e}]"
        )
    best = float(max(roots, key=q_value))
    # generalized-EM safeguard: near a flat maximum the bracketed root can be
    # computed slightly downhill of the current value; never step downhill
    if q_value(best) < q_value(s_prev):
        return float(s_prev)
    return best


def _real_cubic_roots(c3: float, c2: float, c1: float, c0: float) -> list:
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0 via the depressed cubic."""
    scale = max(abs(c3), abs(c2), abs(c1), abs(c0))
    if scale == 0.0:
        return []
    if abs(c3) < 1e-14 * scale:
        if abs(c2) < 1e-14 * scale:
            return [] if c1 == 0.0 else [-c0 / c1]
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return []
        sq = np.sqrt(disc)
        return [(-c1 + sq) / (2.0 * c2), (-c1 - sq) / (2.0 * c2)]
    p = (3.0 * c3 * c1 - c2 * c2) / (3.0 * c3 * c3)
    q = (2.0 * c2**3 - 9.0 * c3 * c2 * c1 + 27.0 * c3 * c3 * c0) / (27.0 * c3**3)
    shift = -c2 / (3.0 * c3)
    disc = 0.25 * q * q + p**3 / 27.0
    if disc > 0.0:
        root = np.sqrt(disc)
        roots = [np.cbrt(-0.5 * q + root) + np.cbrt(-0.5 * q - root)]
    elif p == 0.0:
        roots = [0.0]
    elif disc == 0.0:
        roots = [3.0 * q / p, -1.5 * q / p]
    else:
        r = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(1.5 * q / p * np.sqrt(-3.0 / p), -1.0, 1.0)
        theta = np.arccos(arg) / 3.0
        roots = [r * np.cos(theta - 2.0 * np.pi * k / 3.0) for k in range(3)]
    out = []
    for x in (x + shift for x in roots):
        for _ in range(2):  # Newton polish on the original cubic
            fx = ((c3 * x + c2) * x + c1) * x + c0
            dfx = (3.0 * c3 * x + 2.0 * c2) * x + c1
            if dfx != 0.0:
                x -= fx / dfx
        out.append(float(x))
    return out


def update_phi(moments: SmoothedMoments, params: ModelParams,
               par: Parametrization) -> float:
    """Conditional maximizer over phi: stationary points solve the cubic

        G phi^3 - P phi^2 - (sigma_eta^2 + G) phi + P = 0,

    P = sum_{t<n} (zeta_t zeta_{t+1} + sigma_eta^{2a} V_{t,t+1}),
    G = sum_{1<t<n} (zeta_t^2 + sigma_eta^{2a} V_{tt}),
    zeta = sigma_eta^a m - mu (1-w).  The cubic changes sign between -1 and
    +1 (it equals +-sigma_eta^2 at the endpoints), so a root always exists;
    among real roots inside (-1, 1) the one with the largest Q value wins,
    with ties broken by proximity to the current phi.
    """
    s_a = params.sigma_eta_sq ** (par.a / 2.0)
    s2a = s_a * s_a
    zeta = s_a * moments.m - params.mu * par.w_tilde
    big_p = float(zeta[:-1] @ zeta[1:] + s2a * moments.v_offdiag.sum())
    big_g = float(zeta[1:-1] @ zeta[1:-1] + s2a * moments.v_diag[1:-1].sum())
    sn2 = params.sigma_eta_sq

    candidates = [
        x for x in _real_cubic_roots(big_g, -big_p, -(sn2 + big_g), big_p)
        if abs(x) < 1.0 - 1e-12
    ]
    if not candidates:
        raise PhiRootError("no real root of the phi cubic inside (-1, 1)")

    def q_value(ph: float) -> float:
        return np.log1p(-ph * ph) - (ph * ph * big_g - 2.0 * ph * big_p) / sn2

    best_q = max(q_value(x) for x in candidates)
    near_best = [x for x in candidates if q_value(x) >= best_q - 1e-12]
    best = float(min(near_best, key=lambda x: abs(x - params.phi)))
    # generalized-EM safeguard: with a near-double root the polished cubic
    # solution can sit marginally below the current point in Q; stay put then
    if q_value(best) < q_value(params.phi):
        return params.phi
    return best


# ---------------------------------------------------------------------------
# Convergence-rate diagnostics and information entries
# ---------------------------------------------------------------------------

def rate_location(params: ModelParams, w: np.ndarray) -> float:
    """EM rate for the mu-only fit: rho(w)' Omega^{-1} rho(w) / tau(w), with
    rho(w) = 1/sigma_eps^2 - Omega (1 - w).  Zero exactly at the optimal w;
    always below one because tau - rho'Omega^{-1}rho = 1'S1 > 0."""
    w = np.asarray(w, dtype=np.float64)
    n = w.size
    par = Parametrization(0.0, w)
    lam = tridiag.build_lambda(params.phi, n)
    omega = tridiag.build_omega(params, n)
    factor = tridiag.factorize(omega)
    rho = 1.0 / params.sigma_eps_sq - omega.matvec(par.w_tilde)
    rate = rho @ tridiag.solve(factor, rho) / _tau(params, par, lam)
    return float(max(rate, 0.0))


def info_entries(y: TimeSeries, params: ModelParams, par: Parametrization,
                 moments: Optional[SmoothedMoments] = None) -> InfoEntries:
    """Entries of the augmented (and missing) information at theta.

    The mu and sigma_eta^2 entries depend on the scheme (that dependence is
    what the working parameters exploit); the (sigma_eps^2, phi) block does
    not, and the phi entry is evaluated with the (a=0, w=1) moments.
    """
    yv = y.y
    n = yv.size
    lam = tridiag.build_lambda(params.phi, n)
    omega = tridiag.build_omega(params, n)
    factor = tridiag.factorize(omega)

    i_mu = _tau(params, par, lam)
    rho = 1.0 / params.sigma_eps_sq - omega.matvec(par.w_tilde)
    i_mis_mu = float(rho @ tridiag.solve(factor, rho))

    a = par.a
    wt = par.w_tilde
    z = (yv - params.mu) / params.sigma_eps_sq
    omega_inv_z = tridiag.solve(factor, z)
    i_expr = (
        params.mu**2 * a * a * omega.quad_form(wt) / 2.0
        + params.mu * a * a * (z @ wt)
        - 2.0 * a * params.mu / params.sigma_eta_sq * (omega_inv_z @ lam.matvec(wt))
        + n * (1.0 - a) ** 2
        + a * a * (z @ omega_inv_z) / 2.0
    )
    i_sig_eta = float(i_expr) / (2.0 * params.sigma_eta_sq**2)

    par01 = Parametrization(0.0, np.ones(n))
    if moments is not None and par.a == 0.0 and np.all(par.w == 1.0):
        m01 = moments
    else:
        m01 = e_step(y, params, par01, factor=factor)
    phi = params.phi
    i_phi = (1.0 + phi * phi) / (1.0 - phi * phi) ** 2 + (
        m01.m[1:-1] @ m01.m[1:-1] + np.sum(m01.v_diag[1:-1])
    ) / params.sigma_eta_sq

    return InfoEntries(
        i_mu=i_mu,
        i_mis_mu=i_mis_mu,
        i_sig_eta=i_sig_eta,
        i_sig_eps=n / (2.0 * params.sigma_eps_sq**2),
        i_phi=float(i_phi),
        i_sig_eps_phi=0.0,
    )


# ---------------------------------------------------------------------------
# Fitters
# ---------------------------------------------------------------------------

def _new_loglik_evaluator():
    from .model import _LoglikEvaluator

    return _LoglikEvaluator()


def _converged(ll: float, ll_prev: float, tol: float) -> bool:
    return (ll - ll_prev) < tol * (1.0 + abs(ll_prev))


def default_init(y: TimeSeries) -> ModelParams:
    """Moment-based starting point: sample mean, half the sample variance for
    both noise components, and the lag-1 autocorrelation clamped to [-0.9, 0.9]."""
    yv = y.y
    mu0 = float(np.mean(yv))
    var = float(np.var(yv))
    dev = yv - mu0
    denom = dev @ dev
    rho1 = float(dev[:-1] @ dev[1:] / denom) if denom > 0 else 0.0
    return ModelParams(
        mu=mu0,
        sigma_eta_sq=var / 2.0,
        sigma_eps_sq=var / 2.0,
        phi=float(np.clip(rho1, -0.9, 0.9)),
    )


def algorithm1(y: TimeSeries, init_mu: float, params_known: ModelParams,
               scheme: str = "partial", tol: float = 1e-8,
               max_iter: int = 10000) -> FitReport:
    """Fit mu with (sigma_eta^2, sigma_eps^2, phi) known.

    ``scheme`` picks the location weights: "centered" (w=0), "noncentered"
    (w=1) or "partial" (the optimal weights, computed once since they do not
    depend on mu).  a = 0 throughout; the rate is independent of a.
    """
    if scheme not in LOCATION_SCHEMES:
        raise ValueError(f"scheme must be one of {LOCATION_SCHEMES}")
    yv = y.y
    n = yv.size
    params = replace(params_known, mu=float(init_mu))
    factor = tridiag.factorize(tridiag.build_omega(params, n))
    selinv = tridiag.selected_inverse(factor)
    lam = tridiag.build_lambda(params.phi, n)
    if scheme == "centered":
        w = np.zeros(n)
    elif scheme == "noncentered":
        w = np.ones(n)
    else:
        w = workparam.w_opt_location(params, n, factor=factor)
    par = Parametrization(0.0, w)
    rate = rate_location(params, w)
    w_mean = float(np.mean(w))

    ll_eval = _new_loglik_evaluator()
    ll = ll_eval.value(params, yv, lam)
    trajectory = [TrajectoryPoint(params, ll, 0.0, w_mean, rate)]
    terminated = "max-iterations"
    iterations = max_iter
    for it in range(1, max_iter + 1):
        moments = e_step(y, params, par, factor=factor, selinv=selinv)
        params = replace(params, mu=update_mu(y, moments, params, par, lam=lam))
        ll_new = ll_eval.value(params, yv, lam)
        trajectory.append(TrajectoryPoint(params, ll_new, 0.0, w_mean, rate))
        if _converged(ll_new, ll, tol):
            terminated = "tolerance"
            iterations = it
            ll = ll_new
            break
        ll = ll_new
    return FitReport(trajectory, iterations, terminated, params)


def _scale_par(scheme: str, y: TimeSeries, params: ModelParams, factor,
               flags: list, lam=None) -> Parametrization:
    n = y.n
    if scheme == "centered":
        return Parametrization.centered(n)
    if scheme == "noncentered":
        return Parametrization.noncentered(n)
    if scheme == "approx":
        a, w = workparam.scale_approx(params.gamma, params.phi, n)
        return Parametrization(a, w)
    try:
        sc = workparam.scale_opt(y, params, factor=factor, lam=lam)
        return Parametrization(sc.a_opt, sc.w_opt)
    except workparam.DegenerateScaleError:
        flags.append("degenerate-a-opt")
        a, w = workparam.scale_approx(params.gamma, params.phi, n)
        return Parametrization(a, w)


def algorithm2(y: TimeSeries, init_sigma_eta_sq: float, params_known: ModelParams,
               scheme: str = "partial", tol: float = 1e-8,
               max_iter: int = 10000) -> FitReport:
    """Fit sigma_eta^2 with (mu, sigma_eps^2, phi) known.

    "partial" recomputes the optimal (a, w) from the current estimate every
    iteration (falling back to the approximate scheme when a_opt degenerates);
    "approx" uses w = 1 and the data-free a at the current signal-to-noise
    ratio; "centered"/"noncentered" use the fixed schemes and their closed
    form updates.
    """
    if scheme not in SCALE_SCHEMES:
        raise ValueError(f"scheme must be one of {SCALE_SCHEMES}")
    yv = y.y
    n = yv.size
    lam = tridiag.build_lambda(params_known.phi, n)
    params = replace(params_known, sigma_eta_sq=float(init_sigma_eta_sq))
    factor = tridiag.factorize(tridiag.omega_from_lambda(params, lam))
    ll_eval = _new_loglik_evaluator()
    ll = ll_eval.value(params, yv, lam)
    trajectory = [TrajectoryPoint(params, ll, 0.0, 0.0, None)]
    flags: list = []
    terminated = "max-iterations"
    iterations = max_iter
    for it in range(1, max_iter + 1):
        par = _scale_par(scheme, y, params, factor, flags, lam=lam)
        moments = e_step(y, params, par, factor=factor)
        sn2 = update_sigma_eta(y, moments, params, par, lam=lam)
        params = replace(params, sigma_eta_sq=sn2)
        factor = tridiag.factorize(tridiag.omega_from_lambda(params, lam))
        ll_new = ll_eval.value(params, yv, lam)
        trajectory.append(
            TrajectoryPoint(params, ll_new, par.a, float(np.mean(par.w)), None)
        )
        if _converged(ll_new, ll, tol):
            terminated = "tolerance"
            iterations = it
            ll = ll_new
            break
        ll = ll_new
    return FitReport(trajectory, iterations, terminated, params, flags=flags)


def algorithm3(y: TimeSeries, init: Optional[ModelParams] = None,
               cycle2_scheme: str = "noncentered", scale_scheme: str = "partial",
               tol: float = 1e-8, max_iter: int = 10000) -> FitReport:
    """Fit all four parameters; each iteration runs three cycles with a fresh
    E-step and its own parametrization.

    Cycle 1 uses a = 0 with the optimal location weights and updates mu.
    Cycle 2 uses the centered or noncentered scheme (``cycle2_scheme``) and
    updates phi and sigma_eps^2 jointly (their Q cross term is zero).
    Cycle 3 uses ``scale_scheme`` (as in :func:`algorithm2`) and updates
    sigma_eta^2.  The observed-data log-likelihood is recorded after every
    cycle and must be nondecreasing throughout.
    """
    if cycle2_scheme not in ("centered", "noncentered"):
        raise ValueError("cycle2_scheme must be 'centered' or 'noncentered'")
    if scale_scheme not in SCALE_SCHEMES:
        raise ValueError(f"scale_scheme must be one of {SCALE_SCHEMES}")
    yv = y.y
    n = yv.size
    params = default_init(y) if init is None else init
    par2_factory = (Parametrization.centered if cycle2_scheme == "centered"
                    else Parametrization.noncentered)
    lam = tridiag.build_lambda(params.phi, n)
    factor = tridiag.factorize(tridiag.omega_from_lambda(params, lam))
    ll_eval = _new_loglik_evaluator()
    ll = ll_eval.value(params, yv, lam)
    trajectory = [TrajectoryPoint(params, ll, 0.0, 0.0, None)]
    cycle_logliks: list = []
    flags: list = []
    terminated = "max-iterations"
    iterations = max_iter
    for it in range(1, max_iter + 1):
        # Cycle 1: location. Omega does not involve mu, so factor stays
        # valid, and cycle 2 can reuse the same selected inverse.
        selinv = tridiag.selected_inverse(factor)
        w1 = workparam.w_opt_location(params, n, factor=factor)
        par1 = Parametrization(0.0, w1)
        moments = e_step(y, params, par1, factor=factor, selinv=selinv)
        params = replace(params, mu=update_mu(y, moments, params, par1, lam=lam))
        cycle_logliks.append(ll_eval.value(params, yv, lam))

        # Cycle 2: (phi, sigma_eps^2) jointly under a fixed scheme.
        par2 = par2_factory(n)
        moments = e_step(y, params, par2, factor=factor, selinv=selinv)
        try:
            phi_new = update_phi(moments, params, par2)
        except PhiRootError:
            flags.append("phi-root-failure")
            phi_new = params.phi
        se2_new = update_sigma_eps(y, moments, params, par2)
        params = replace(params, phi=phi_new, sigma_eps_sq=se2_new)
        lam = tridiag.build_lambda(params.phi, n)
        factor = tridiag.factorize(tridiag.omega_from_lambda(params, lam))
        cycle_logliks.append(ll_eval.value(params, yv, lam))

        # Cycle 3: scale.
        par3 = _scale_par(scale_scheme, y, params, factor, flags, lam=lam)
        moments = e_step(y, params, par3, factor=factor)
        sn2_new = update_sigma_eta(y, moments, params, par3, lam=lam)
        params = replace(params, sigma_eta_sq=sn2_new)
        factor = tridiag.factorize(tridiag.omega_from_lambda(params, lam))
        ll_new = ll_eval.value(params, yv, lam)
        cycle_logliks.append(ll_new)

        trajectory.append(
            TrajectoryPoint(params, ll_new, par3.a, float(np.mean(par3.w)), None)
        )
        if _converged(ll_new, ll, tol):
            terminated = "tolerance"
            iterations = it
            ll = ll_new
            break
        ll = ll_new
    return FitReport(trajectory, iterations, terminated, params,
                     cycle_logliks=cycle_logliks, flags=flags)


def write_fit_csv(report: FitReport, path) -> None:
    """Per-iteration trajectory as CSV; the rate column is blank where the
    location-rate diagnostic does not apply."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["iter", "mu", "sigma_eta_sq", "sigma_eps_sq", "phi", "loglik", "a", "rate"]
        )
        for i, pt in enumerate(report.trajectory):
            writer.writerow(
                [
                    i,
                    repr(pt.params.mu),
                    repr(pt.params.sigma_eta_sq),
                    repr(pt.params.sigma_eps_sq),
                    repr(pt.params.phi),
                    repr(pt.loglik),
                    repr(pt.a),
                    "" if pt.rate is None else repr(pt.rate),
                ]
            )
