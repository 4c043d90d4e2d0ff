"""Optimal and approximate working parameters for the augmentation scheme.

Location case (only mu unknown): the EM rate is minimized to zero by

    w_opt = 1 - Omega^{-1} 1 / sigma_eps^2,

computable either by one tridiagonal solve or from the closed form of the
first row of Q^{-1} (:func:`w_opt_location_closed`).  Scale case (only
sigma_eta^2 unknown): the jointly optimal pair is

    a_opt = 1 - z' Omega^{-1} Lambda Omega^{-1} z / (n sigma_eta^2)
    w_opt = 1 - Omega^{-1} {2 Lambda Omega^{-1} z / (a_opt sigma_eta^2) - z} / mu

with z = (y - mu 1)/sigma_eps^2, and a data-free large-n approximation sets
w = 1, a = 1 / {1 + gamma / (2 (1 - phi^2))}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tridiag
from .model import ModelParams, TimeSeries

__all__ = [
    "LocationScheme",
    "ScaleScheme",
    "DegenerateScaleError",
    "w_opt_location",
    "w_opt_location_closed",
    "w_opt_bounds",
    "w_opt_common",
    "location_scheme",
    "a_opt_scale",
    "scale_opt",
    "a_hat_asymptotic",
    "scale_approx",
]

DEGENERATE_A_TOL = 1e-10


class DegenerateScaleError(ArithmeticError):
    """a_opt is numerically zero and w_opt (which divides by it) is undefined."""


@dataclass(frozen=True)
class LocationScheme:
    w_opt: np.ndarray
    bounds_low: float
    bounds_high: float


@dataclass(frozen=True)
class ScaleScheme:
    a_opt: float
    w_opt: np.ndarray
    a_hat: float
    a_approx: float
    z: np.ndarray


def w_opt_location(params: ModelParams, n: int, factor=None) -> np.ndarray:
    """w_opt = 1 - Omega^{-1} 1 / sigma_eps^2, one O(n) solve.

    Independent of mu, so it can be computed once before iterating.
    """
    if factor is None:
        factor = tridiag.factorize(tridiag.build_omega(params, n))
    return 1.0 - tridiag.solve(factor, np.ones(n)) / params.sigma_eps_sq


def w_opt_location_closed(params: ModelParams, n: int) -> np.ndarray:
    """Same vector from the closed form, using only first-row quantities of Q^{-1}.

    w_t = {(1-phi)^2 + b gamma (1-phi) (v_t + v_{n-t+1})} / {(1-phi)^2 + gamma},
    and the constant (1+gamma)^{-1} when phi = 0.
    """
    gamma = params.gamma
    if params.phi == 0.0:
        return np.full(n, 1.0 / (1.0 + gamma))
    qcf = tridiag.q_closed_form(params, n)
    vsum = qcf.v + qcf.v[::-1]
    omp = 1.0 - params.phi
    return (omp * omp + qcf.b * gamma * omp * vsum) / (omp * omp + gamma)


def w_opt_bounds(params: ModelParams) -> tuple[float, float]:
    """(low, high) enclosing every entry of the location w_opt; tight at phi = 0.

    With B1 = gamma/{(1-phi)^2 + gamma} and B2 = gamma/(1 - phi^2 + gamma),
    the interval is [1-B1, 1-B2] for 0 <= phi < 1 and [1-B2, 1+B2-2*B1] for
    -1 < phi < 0.
    """
    gamma, phi = params.gamma, params.phi
    b1 = gamma / ((1.0 - phi) ** 2 + gamma)
    b2 = gamma / (1.0 - phi * phi + gamma)
    if phi >= 0.0:
        return 1.0 - b1, 1.0 - b2
    return 1.0 - b2, 1.0 + b2 - 2.0 * b1


def w_opt_common(params: ModelParams, n: int) -> float:
    """Best single weight shared by all t: {n gamma / (1' Lambda 1) + 1}^{-1}.

    1' Lambda 1 = n (1-phi)^2 + 2 phi (1-phi) follows from the stencil.
    """
    phi = params.phi
    one_lambda_one = n * (1.0 - phi) ** 2 + 2.0 * phi * (1.0 - phi)
    return 1.0 / (n * params.gamma / one_lambda_one + 1.0)


def location_scheme(params: ModelParams, n: int) -> LocationScheme:
    low, high = w_opt_bounds(params)
    return LocationScheme(w_opt_location(params, n), low, high)


def a_opt_scale(y: TimeSeries, params: ModelParams, factor=None, lam=None) -> float:
    """Just the optimal scale exponent, without the location weights.

    mu = 0: 1/{1 + y'Omega^{-1}y / (2 n sigma_eps^4)}, always in (0, 1].
    mu != 0: 1 - z'Omega^{-1} Lambda Omega^{-1} z / (n sigma_eta^2), which is
    below 1 but can be negative on small samples.
    """
    yv = y.y
    n = yv.size
    if factor is None:
        factor = tridiag.factorize(tridiag.build_omega(params, n))
    if params.mu == 0.0:
        quad = yv @ tridiag.solve(factor, yv)
        return float(1.0 / (1.0 + quad / (2.0 * n * params.sigma_eps_sq**2)))
    if lam is None:
        lam = tridiag.build_lambda(params.phi, n)
    z = (yv - params.mu) / params.sigma_eps_sq
    omega_inv_z = tridiag.solve(factor, z)
    quad = z @ tridiag.solve(factor, lam.matvec(omega_inv_z))
    return float(1.0 - quad / (n * params.sigma_eta_sq))


def scale_opt(y: TimeSeries, params: ModelParams, factor=None, lam=None) -> ScaleScheme:
    """Optimal (a, w) for the scale update at the current parameter values.

    Both depend on the realized data through z, so they are recomputed from
    the latest sigma_eta^2 estimate at every iteration.  mu = 0 is a separate
    branch: the rate is then independent of w and

        a_opt = 1 / {1 + y' Omega^{-1} y / (2 n sigma_eps^4)}  in (0, 1];

    w is returned as the ones vector in that case.  For mu != 0, a_opt can be
    arbitrarily close to zero on unlucky samples; since w_opt divides by it,
    |a_opt| < 1e-10 raises DegenerateScaleError and callers fall back to
    :func:`scale_approx`.
    """
    yv = y.y
    n = yv.size
    if factor is None:
        factor = tridiag.factorize(tridiag.build_omega(params, n))
    if lam is None:
        lam = tridiag.build_lambda(params.phi, n)
    gamma = params.gamma
    a_hat = a_hat_asymptotic(gamma, params.phi)
    a_approx, _ = scale_approx(gamma, params.phi)
    z = (yv - params.mu) / params.sigma_eps_sq
    a_opt = a_opt_scale(y, params, factor=factor, lam=lam)

    if params.mu == 0.0:
        return ScaleScheme(a_opt, np.ones(n), a_hat, a_approx, z)

    if abs(a_opt) < DEGENERATE_A_TOL:
        raise DegenerateScaleError(f"a_opt = {a_opt}; w_opt undefined")
    lam_omega_inv_z = lam.matvec(tridiag.solve(factor, z))
    w_tilde = tridiag.solve(
        factor, 2.0 * lam_omega_inv_z / (a_opt * params.sigma_eta_sq) - z
    ) / params.mu
    return ScaleScheme(a_opt, 1.0 - w_tilde, a_hat, a_approx, z)


def a_hat_asymptotic(gamma: float, phi: float) -> float:
    """Large-n limit of a_opt: 1 - gamma [{(1-phi)^2+gamma}{(1+phi)^2+gamma}]^{-1/2}.

    Even in phi and strictly decreasing in gamma.
    """
    if not (gamma > 0 and abs(phi) < 1.0):
        raise ValueError("need gamma > 0 and |phi| < 1")
    prod = ((1.0 - phi) ** 2 + gamma) * ((1.0 + phi) ** 2 + gamma)
    return float(1.0 - gamma / np.sqrt(prod))


def scale_approx(gamma: float, phi: float, n: int = 1) -> tuple[float, np.ndarray]:
    """Data-free large-n scheme: w = 1 and a = 1 / {1 + gamma / (2 (1 - phi^2))}."""
    if not (gamma > 0 and abs(phi) < 1.0):
        raise ValueError("need gamma > 0 and |phi| < 1")
    a = 1.0 / (1.0 + gamma / (2.0 * (1.0 - phi * phi)))
    return a, np.ones(n)
