"""Symmetric tridiagonal algebra for the AR(1)-plus-noise model.

Two matrices drive everything: the stationary AR(1) precision stencil

    Lambda = tridiag with diagonal (1, 1+phi^2, ..., 1+phi^2, 1)
             and off-diagonal entries -phi,

and the latent-state conditional precision

    Omega = I / sigma_eps^2 + Lambda / sigma_eta^2.

For phi != 0 the scaled matrix Q = sigma_eta^2 * Omega / |phi| has a
closed-form inverse: Q^{-1}_{tj} = u_t v_j for t <= j, built from the roots
of x^2 - c x + 1 (see :func:`q_closed_form`).  All factorization-based
operations are O(n) and run on the selected kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends

__all__ = [
    "SymTridiag",
    "TridiagFactor",
    "SelectedInverse",
    "QClosedForm",
    "FactorizationError",
    "build_lambda",
    "build_omega",
    "factorize",
    "solve",
    "selected_inverse",
    "log_det",
    "q_closed_form",
    "q_row_sum",
    "q_traces",
]


class FactorizationError(ArithmeticError):
    """Raised when a pivot falls below 1e-300 (matrix not positive definite)."""


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal matrix; only the diagonal and one off-diagonal stored."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64)
        offdiag = np.asarray(self.offdiag, dtype=np.float64)
        if diag.ndim != 1 or diag.size < 2:
            raise ValueError("diag must be a vector of length >= 2")
        if offdiag.shape != (diag.size - 1,):
            raise ValueError("offdiag must have length len(diag) - 1")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError("length mismatch in matvec")
        out = self.diag * x
        out[:-1] += self.offdiag * x[1:]
        out[1:] += self.offdiag * x[:-1]
        return out

    def quad_form(self, x: np.ndarray) -> float:
        """x' M x without forming the matvec twice."""
        x = np.asarray(x, dtype=np.float64)
        return float(self.diag @ (x * x) + 2.0 * (self.offdiag @ (x[:-1] * x[1:])))


@dataclass(frozen=True)
class TridiagFactor:
    """L D L^T factorization: positive pivots d, subdiagonal multipliers l."""

    d: np.ndarray
    l: np.ndarray

    @property
    def n(self) -> int:
        return self.d.size


@dataclass(frozen=True)
class SelectedInverse:
    """Diagonal and first off-diagonal of the inverse of an SPD tridiagonal."""

    inv_diag: np.ndarray
    inv_offdiag: np.ndarray


def build_lambda(phi: float, n: int) -> SymTridiag:
    """Stationary AR(1) precision stencil; log det equals log(1 - phi^2)."""
    if not abs(phi) < 1.0:
        raise ValueError(f"phi must lie in (-1, 1), got {phi}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    diag = np.full(n, 1.0 + phi * phi)
    diag[0] = diag[-1] = 1.0
    return SymTridiag(diag, np.full(n - 1, -phi))


def build_omega(params, n: int) -> SymTridiag:
    """Conditional state precision Omega = I/sigma_eps^2 + Lambda/sigma_eta^2."""
    return omega_from_lambda(params, build_lambda(params.phi, n))


def omega_from_lambda(params, lam: SymTridiag) -> SymTridiag:
    """build_omega with a prebuilt Lambda (hot-loop variant)."""
    ie = 1.0 / params.sigma_eps_sq
    in_ = 1.0 / params.sigma_eta_sq
    return SymTridiag(ie + in_ * lam.diag, in_ * lam.offdiag)


def factorize(m: SymTridiag) -> TridiagFactor:
    d, l, info = backends.ldl_factor(m.diag, m.offdiag)
    if info:
        raise FactorizationError(
            f"pivot {info - 1} is <= {backends.PIVOT_MIN}; matrix not positive definite"
        )
    return TridiagFactor(d, l)


def solve(f: TridiagFactor, rhs: np.ndarray) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (f.n,):
        raise ValueError(f"rhs has length {rhs.size}, expected {f.n}")
    return backends.ldl_solve(f.d, f.l, rhs)


def selected_inverse(f: TridiagFactor) -> SelectedInverse:
    sd, so = backends.selected_inverse(f.d, f.l)
    return SelectedInverse(sd, so)


def log_det(f: TridiagFactor) -> float:
    return float(np.sum(np.log(f.d)))


# ---------------------------------------------------------------------------
# Closed form for Q^{-1}, Q = sigma_eta^2 * Omega / |phi| = (gamma I + Lambda)/|phi|
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QClosedForm:
    """Rank-one-per-triangle representation Q^{-1}_{tj} = u_t v_j (t <= j).

    b is the sign of phi; the scaled matrix has diagonal (c1, c, ..., c, c1)
    and off-diagonal -b, with c1 = (1+gamma)/|phi| > 1 and c = c1 + |phi| > 2.
    r_plus > 1 > r_minus are the roots of x^2 - c x + 1, and

        kappa_seq[t] = v_plus r_plus^t - v_minus r_minus^t   (t = 0..n-1)
        kappa        = v_plus^2 r_plus^{n-1} - v_minus^2 r_minus^{n-1}
        u_t = b^{t-1} kappa_{t-1} / kappa_0,  v_t = b^{t-1} kappa_{n-t} / kappa.

    v is evaluated in a normalized form using only powers of r_minus in
    (0, 1), so it stays finite for any n.  u, kappa and kappa_seq grow like
    r_plus^t and are stored raw (they overflow for very large n; use
    :meth:`inverse_entry`, which is normalized, when entries are needed).
    """

    n: int
    phi: float
    gamma: float
    b: float
    c1: float
    c: float
    r_plus: float
    r_minus: float
    v: np.ndarray
    u: np.ndarray
    kappa: float
    kappa_seq: np.ndarray
    v_plus: float = field(repr=False, default=0.0)
    v_minus: float = field(repr=False, default=0.0)

    def inverse_entry(self, t: int, j: int) -> float:
        """(Q^{-1})_{tj}, 1-based indices, stable for any n."""
        if not (1 <= t <= self.n and 1 <= j <= self.n):
            raise IndexError(f"indices ({t}, {j}) out of range for n={self.n}")
        if t > j:
            t, j = j, t
        rm, vp, vm, n = self.r_minus, self.v_plus, self.v_minus, self.n
        num = (vp - vm * rm ** (2 * (t - 1))) * (vp - vm * rm ** (2 * (n - j)))
        den = (vp - vm) * (vp * vp - vm * vm * rm ** (2 * (n - 1)))
        return self.b ** (t + j - 2) * rm ** (j - t) * num / den


def q_closed_form(params, n: int) -> QClosedForm:
    """Closed-form pieces of Q^{-1}; rejects phi = 0 (Q is undefined there).

    Callers must branch to the phi = 0 formulas themselves: in that case
    Lambda = I and Omega = (1/sigma_eps^2 + 1/sigma_eta^2) I.
    """
    phi = params.phi
    if phi == 0.0:
        raise ValueError("q_closed_form requires phi != 0")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    gamma = params.gamma
    ap = abs(phi)
    b = phi / ap
    c1 = (1.0 + gamma) / ap
    c = c1 + ap
    # r_minus = 1/r_plus avoids cancellation in (c - sqrt(c^2-4))/2 for large c
    r_plus = 0.5 * (c + np.sqrt(c * c - 4.0))
    r_minus = 1.0 / r_plus
    vp = r_plus - ap
    vm = r_minus - ap

    t = np.arange(1, n + 1)
    bpow = np.where((t - 1) % 2 == 0, 1.0, b)
    # v_t = b^{t-1} r_minus^{t-1} (vp - vm r_minus^{2(n-t)}) / (vp^2 - vm^2 r_minus^{2(n-1)})
    v = (
        bpow
        * r_minus ** (t - 1)
        * (vp - vm * r_minus ** (2 * (n - t)))
        / (vp * vp - vm * vm * r_minus ** (2 * (n - 1)))
    )
    ts = np.arange(n)
    with np.errstate(over="ignore"):  # raw sequences may overflow; see docstring
        kappa_seq = vp * r_plus**ts - vm * r_minus**ts
        kappa = vp * vp * r_plus ** (n - 1) - vm * vm * r_minus ** (n - 1)
        u = bpow * (vp * r_plus ** (t - 1) - vm * r_minus ** (t - 1)) / kappa_seq[0]
    return QClosedForm(
        n=n, phi=phi, gamma=gamma, b=b, c1=c1, c=c,
        r_plus=r_plus, r_minus=r_minus, v=v, u=u,
        kappa=kappa, kappa_seq=kappa_seq, v_plus=vp, v_minus=vm,
    )


def q_row_sum(qcf: QClosedForm, t: int) -> float:
    """Sum of row t (1-based) of Q^{-1}: (2b - c)^{-1} {b(1-phi)(v_t + v_{n-t+1}) - 1}."""
    if not 1 <= t <= qcf.n:
        raise IndexError(f"row index {t} out of range for n={qcf.n}")
    vsum = qcf.v[t - 1] + qcf.v[qcf.n - t]
    return (qcf.b * (1.0 - qcf.phi) * vsum - 1.0) / (2.0 * qcf.b - qcf.c)


def q_traces(qcf: QClosedForm) -> tuple[float, float]:
    """(tr Q^{-1}, tr Q^{-2}) in closed form.

    Both expressions are ratios of quantities growing like powers of r_plus;
    they are evaluated after dividing numerator and denominator by
    r_plus^{n-1} (resp. r_plus^{2n-2}) so that only powers of r_minus in
    (0, 1) remain.
    """
    n, phi, gamma = qcf.n, qcf.phi, qcf.gamma
    rp, rm, vp, vm, c = qcf.r_plus, qcf.r_minus, qcf.v_plus, qcf.v_minus, qcf.c
    k0 = vp - vm
    kap_n = vp * vp - vm * vm * rm ** (2 * (n - 1))  # kappa / r_plus^{n-1}

    tr1 = (
        n * k0 * (vp * vp + vm * vm * rm ** (2 * (n - 1)))
        + 2.0 * gamma * (rp - rm ** (2 * n - 1))
    ) / (k0 * k0 * kap_n)

    s_n = (
        (
            4.0 * n * n * gamma * gamma
            + 8.0 * n * gamma * (phi * phi - 1.0)
            - 4.0 * gamma * (1.0 + phi * phi)
            + 2.0 * (phi * phi - 1.0) ** 2
        )
        * rm ** (2 * n - 2)
        + n * c / k0 * (vp**4 - vm**4 * rm ** (4 * n - 4))
        + 4.0 * gamma / (k0 * k0) * (
            4.0 * gamma * rm ** (2 * n - 2)
            + c * (vp * vp * rp + vm * vm * rm ** (4 * n - 3))
        )
        + 2.0 * (phi * phi - 1.0) / k0 * (vp * vp * rp - vm * vm * rm ** (4 * n - 3))
    )
    tr2 = s_n / (k0 * k0 * kap_n * kap_n)
    return float(tr1), float(tr2)
