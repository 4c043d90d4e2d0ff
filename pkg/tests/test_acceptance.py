"""Acceptance suite: one test per exit criterion, at the stated tolerances.

Run `pytest tests/test_acceptance.py -v -s` to get one pass/fail line per
criterion with the measured runtime.  Fixed seeds make every criterion
deterministic.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

import oracles
from pncem import em, gibbs, model, tridiag, vb, workparam
from pncem.model import ModelParams, Parametrization, TimeSeries

SEED = 20260808
SE2 = 0.1
STUDY = [(phi, g) for phi in (-0.95, 0.1, 0.95) for g in (0.1, 1.0, 10.0)]
CF_GRID = [(n, phi, g) for n in (2, 5, 20, 50)
           for phi in (-0.99, -0.5, -0.1, 0.1, 0.5, 0.99)
           for g in (0.1, 1.0, 10.0)]


def _params(phi, gamma, mu=1.0):
    return ModelParams(mu, gamma * SE2, SE2, phi)


def _report(num, name, t0, budget, details=""):
    elapsed = time.perf_counter() - t0
    print(f"\ncriterion {num} PASS in {elapsed:.1f}s (budget {budget}s): "
          f"{name} {details}")
    assert elapsed < budget, f"criterion {num} exceeded its runtime budget"


def test_criterion_1_closed_forms_vs_dense():
    t0 = time.perf_counter()
    worst = 0.0
    for n, phi, gamma in CF_GRID:
        params = _params(phi, gamma)
        qcf = tridiag.q_closed_form(params, n)
        dense_q = oracles.dense_invert(
            (gamma * np.eye(n) + oracles.dense_lambda(phi, n)) / abs(phi))
        err = max(abs(qcf.inverse_entry(t, j) - dense_q[t - 1, j - 1])
                  for t in range(1, n + 1) for j in range(t, n + 1))
        row_err = max(abs(tridiag.q_row_sum(qcf, t) - dense_q[t - 1].sum())
                      for t in range(1, n + 1))
        tr1, tr2 = tridiag.q_traces(qcf)
        tr_err = max(abs(tr1 - np.trace(dense_q)),
                     abs(tr2 - np.trace(dense_q @ dense_q)))

        dense_omega = oracles.dense_omega(params, n)
        w_dense = 1.0 - oracles.dense_solve(dense_omega, np.ones(n)) / SE2
        w_err = max(
            np.abs(workparam.w_opt_location(params, n) - w_dense).max(),
            np.abs(workparam.w_opt_location_closed(params, n) - w_dense).max(),
        )

        sel = tridiag.selected_inverse(
            tridiag.factorize(tridiag.build_omega(params, n)))
        dense_inv = oracles.dense_invert(dense_omega)
        sel_err = max(np.abs(sel.inv_diag - np.diag(dense_inv)).max(),
                      np.abs(sel.inv_offdiag - np.diag(dense_inv, 1)).max())

        worst = max(worst, err, row_err, tr_err, w_err, sel_err)
        assert max(err, row_err, tr_err, w_err, sel_err) < 1e-8, (n, phi, gamma)
    _report(1, "closed-form identities vs dense oracle", t0, 30,
            f"(max abs err {worst:.2e} over {len(CF_GRID)} grid points)")


def test_criterion_2_instant_convergence():
    t0 = time.perf_counter()
    # bridge check: the O(n) GLS identity against the dense oracle
    for phi, gamma in ((-0.95, 0.1), (0.1, 1.0), (0.95, 10.0)):
        params = _params(phi, gamma)
        ts = model.simulate(params, 50, seed=SEED)
        assert abs(model.gls_location(params, ts) - oracles.gls_mu(ts, params)) < 1e-10

    worst = 0.0
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        ts = model.simulate(params, 2000, seed=SEED)
        fit = em.algorithm1(ts, 0.0, params, scheme="partial")
        mu_star = model.gls_location(params, ts)
        gap = abs(fit.trajectory[1].params.mu - mu_star)
        worst = max(worst, gap / (1.0 + abs(mu_star)))
        assert gap <= 1e-8 * (1.0 + abs(mu_star)), (phi, gamma)
        assert fit.iterations <= 2
    _report(2, "one-iteration convergence to GLS at the optimal weights",
            t0, 10, f"(max rel gap {worst:.2e})")


def test_criterion_3_triple_rate_equivalence():
    t0 = time.perf_counter()
    worst_fd = worst_vb = 0.0
    rng = np.random.default_rng(SEED)
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        n = 10
        ts = TimeSeries(rng.normal(size=n) + 1.0)
        weightings = [np.zeros(n), np.ones(n), workparam.w_opt_location(params, n)]
        weightings += [rng.normal(size=n) for _ in range(3)]
        for w in weightings:
            par = Parametrization(0.0, w)
            formula = em.rate_location(params, w)
            fd = oracles.em_map_derivative(ts, params, w, at_mu=0.8)
            worst_fd = max(worst_fd, abs(formula - fd))
            assert abs(formula - fd) < 1e-6

            # measured contraction of the composed variational m_mu update
            def m_map(m0):
                state = vb.VbState(np.zeros(n), m0, 1.0, False)
                return vb.vb_iterate(ts, params, par, state).m_mu

            measured = abs(m_map(1.3) - m_map(0.3))
            worst_vb = max(worst_vb, abs(formula - measured))
            assert abs(formula - measured) < 1e-8

    worst_gibbs = 0.0
    chain_seed = SEED
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        n = 2000
        ts = model.simulate(params, n, seed=SEED)
        for w in (np.zeros(n), np.ones(n), workparam.w_opt_location(params, n)):
            par = Parametrization(0.0, w)
            chain = gibbs.run_chain(ts, params, par, 20000, burnin=1000,
                                    seed=chain_seed)
            chain_seed += 1
            gap = abs(gibbs.lag1_autocorr(chain) - em.rate_location(params, w))
            worst_gibbs = max(worst_gibbs, gap)
            assert gap <= 0.05, (phi, gamma, w[:2])
    _report(3, "EM = VB = Gibbs convergence rates", t0, 120,
            f"(max |formula-FD| {worst_fd:.1e}, |formula-VB| {worst_vb:.1e}, "
            f"|formula-Gibbs| {worst_gibbs:.3f})")


def test_criterion_4_asymptotic_scale_exponent():
    t0 = time.perf_counter()
    phis = np.linspace(-0.99, 0.99, 21)
    reps = 200
    n = 5000
    worst_gap = worst_sym = 0.0
    mean_curves = {}
    for sn2 in (0.01, 0.1, 1.0):
        means = {}
        for phi in phis:
            params = ModelParams(1.0, sn2, SE2, float(phi))
            vals = np.empty(reps)
            for rep in range(reps):
                ts = model.simulate(params, n, seed=SEED + rep)
                vals[rep] = workparam.a_opt_scale(ts, params)
            assert np.all(vals > 0.0), (sn2, phi)  # no nonpositive draws at this n
            a_hat = workparam.a_hat_asymptotic(params.gamma, params.phi)
            gap = abs(vals.mean() - a_hat)
            worst_gap = max(worst_gap, gap)
            assert gap < 0.02, (sn2, phi)
            means[round(float(phi), 9)] = vals.mean()
        for phi in phis:
            sym = abs(means[round(float(phi), 9)] - means[round(float(-phi), 9)])
            worst_sym = max(worst_sym, sym)
            assert sym < 0.01
        mean_curves[sn2] = means
    for phi in phis:  # mean a_opt decreases with the signal-to-noise ratio
        key = round(float(phi), 9)
        assert mean_curves[0.01][key] > mean_curves[0.1][key] > mean_curves[1.0][key]
    _report(4, "mean a_opt matches its large-n closed form", t0, 300,
            f"(max |mean-a_hat| {worst_gap:.4f}, max asymmetry {worst_sym:.4f})")


def test_criterion_5_weight_bounds_and_monotonicity():
    t0 = time.perf_counter()
    n = 10
    for phi in (-0.99, -0.9, -0.5, -0.1, 0.0, 0.1, 0.5, 0.9, 0.99):
        for gamma in (0.1, 1.0, 10.0):
            params = _params(phi, gamma)
            w = workparam.w_opt_location(params, n)
            low, high = workparam.w_opt_bounds(params)
            assert np.all(w >= low - 1e-12) and np.all(w <= high + 1e-12)

    phis = np.arange(0.1, 0.95, 0.1)
    gammas = np.array([0.1, 0.5, 1.0, 5.0, 10.0])
    for phi in phis:
        ws = [workparam.w_opt_location(_params(phi, g), n) for g in gammas]
        for w_lo, w_hi in zip(ws[:-1], ws[1:]):
            assert np.all(w_lo - w_hi > 1e-12)
    for gamma in gammas:
        ws = [workparam.w_opt_location(_params(p, gamma), n) for p in phis]
        for w_lo, w_hi in zip(ws[:-1], ws[1:]):
            assert np.all(w_lo - w_hi > 1e-12)

    spiky = workparam.w_opt_location(_params(-0.9, 0.1), n)
    assert spiky.max() > 1.0
    _report(5, "weight bounds, strict monotonicity, above-one entries", t0, 5)


# ---------------------------------------------------------------------------
# criterion 6: simulation-study tables
# ---------------------------------------------------------------------------

AGREE_REPS = 3  # replicates fitted at tol=1e-12 for the agreement check


def _stop_iteration(lls, tol=1e-8, max_iter=10000):
    """Iteration at which the standard rule would have stopped.

    The trajectory is tolerance-independent, so the 1e-8 stopping point can
    be read off a fit run at 1e-12 (a larger threshold triggers no later).
    """
    for i in range(1, len(lls)):
        if lls[i] - lls[i - 1] < tol * (1.0 + abs(lls[i - 1])):
            return i
    return max_iter


def _agree_among_converged(results, label):
    """results: list of (converged, final_ll) per scheme on one dataset.

    Verifies the schemes-share-one-optimum claim.  Runs that stopped at the
    iteration cap are excluded: they did not converge (this covers both the
    poorly-mixing noncentered cells and the weakly identified phi=0.1
    settings, where no scheme reaches the 1e-12 rule within the cap).  The
    tight tolerance is what makes 1e-6 agreement meaningful; under the
    standard 1e-8 rule a slow scheme stops with an O(1e-2) deficit.
    """
    conv = [ll for ok, ll in results if ok]
    if len(conv) < 2:
        return 0.0, 0
    spread = max(conv) - min(conv)
    assert spread < 1e-6, (label, spread)
    return spread, 1


def test_criterion_6_simulation_tables():
    t0 = time.perf_counter()
    reps = 20
    n = 2000
    worst_spread = 0.0
    compared = 0

    # --- table 1: location-only fits -------------------------------------
    t1_iters = {}
    t1_mu = {}
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        counts = {s: [] for s in ("centered", "noncentered", "partial")}
        mu_hat = {s: [] for s in counts}
        for rep in range(reps):
            ts = model.simulate(params, n, seed=SEED + rep)
            per_scheme = []
            for scheme in counts:
                tol = 1e-12 if rep < AGREE_REPS else 1e-8
                fit = em.algorithm1(ts, 0.0, params, scheme=scheme, tol=tol)
                mu_hat[scheme].append(fit.final.mu)
                if rep < AGREE_REPS:
                    lls = [pt.loglik for pt in fit.trajectory]
                    counts[scheme].append(_stop_iteration(lls))
                    per_scheme.append((fit.terminated_by == "tolerance",
                                       lls[-1]))
                else:
                    counts[scheme].append(fit.iterations)
            spread, used = _agree_among_converged(per_scheme,
                                                  ("t1", phi, gamma, rep))
            worst_spread = max(worst_spread, spread)
            compared += used
        t1_iters[(phi, gamma)] = {s: float(np.mean(v)) for s, v in counts.items()}
        t1_mu[(phi, gamma)] = {s: float(np.mean(v)) for s, v in mu_hat.items()}

    for (phi, gamma), it in t1_iters.items():
        assert it["partial"] <= min(it["centered"], it["noncentered"]), (phi, gamma)
    hot = t1_iters[(0.95, 10.0)]
    assert hot["noncentered"] >= 10.0 * hot["centered"]
    # the under-converged noncentered mean estimate is visibly poorer there
    mu_cell = t1_mu[(0.95, 10.0)]
    assert (abs(mu_cell["noncentered"] - mu_cell["partial"])
            > abs(mu_cell["centered"] - mu_cell["partial"]))

    # --- table 2: scale-only fits -----------------------------------------
    t2_iters = {}
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        counts = {s: [] for s in ("centered", "noncentered", "partial", "approx")}
        for rep in range(reps):
            ts = model.simulate(params, n, seed=SEED + rep)
            init = float(np.var(ts.y)) / 2.0
            per_scheme = []
            for scheme in counts:
                tol = 1e-12 if rep < AGREE_REPS else 1e-8
                fit = em.algorithm2(ts, init, params, scheme=scheme, tol=tol)
                if rep < AGREE_REPS:
                    lls = [pt.loglik for pt in fit.trajectory]
                    counts[scheme].append(_stop_iteration(lls))
                    per_scheme.append((fit.terminated_by == "tolerance",
                                       lls[-1]))
                else:
                    counts[scheme].append(fit.iterations)
            spread, used = _agree_among_converged(per_scheme,
                                                  ("t2", phi, gamma, rep))
            worst_spread = max(worst_spread, spread)
            compared += used
        t2_iters[(phi, gamma)] = {s: float(np.mean(v)) for s, v in counts.items()}

    partial_wins = sum(
        1 for it in t2_iters.values()
        if it["partial"] <= it["centered"] and it["partial"] <= it["noncentered"])
    assert partial_wins >= 8, t2_iters

    # --- table 3: all parameters unknown ----------------------------------
    combos = {"noncentered": ("noncentered", "noncentered"),
              "centered": ("centered", "centered"),
              "partial": ("noncentered", "partial"),
              "approx": ("noncentered", "approx")}
    worst_cycle = 0.0
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        for rep in range(reps):
            ts = model.simulate(params, n, seed=SEED + rep)
            per_scheme = []
            for cycle2, scale in combos.values():
                tol = 1e-12 if rep < AGREE_REPS else 1e-8
                fit = em.algorithm3(ts, cycle2_scheme=cycle2, scale_scheme=scale,
                                    tol=tol)
                deltas = np.diff(fit.cycle_logliks)
                worst_cycle = min(worst_cycle, float(deltas.min()))
                assert deltas.min() >= -1e-10, (phi, gamma, rep, cycle2, scale)
                if rep < AGREE_REPS:
                    per_scheme.append((fit.terminated_by == "tolerance",
                                       fit.trajectory[-1].loglik))
            spread, used = _agree_among_converged(per_scheme,
                                                  ("t3", phi, gamma, rep))
            worst_spread = max(worst_spread, spread)
            compared += used

    # --- estimate reproduction at full scale ------------------------------
    params = _params(0.95, 1.0)
    est = np.empty((reps, 4))
    for rep in range(reps):
        ts = model.simulate(params, 10000, seed=SEED + rep)
        fit = em.algorithm3(ts)
        est[rep] = [fit.final.mu, fit.final.sigma_eta_sq,
                    fit.final.sigma_eps_sq, fit.final.phi]
    reference = np.array([0.992, 0.100, 0.101, 0.951])
    means = est.mean(axis=0)
    mc3se = 3.0 * est.std(axis=0, ddof=1) / np.sqrt(reps)
    assert np.all(np.abs(means - reference) <= mc3se), (means, mc3se)

    _report(6, "simulation-study table patterns", t0, 600,
            f"(loglik agreement over {compared} dataset/scheme comparisons, "
            f"max spread {worst_spread:.2e}; worst cycle step {worst_cycle:.1e}; "
            f"estimate means {np.round(means, 4).tolist()})")


def test_criterion_7_variational_posterior_exactness():
    t0 = time.perf_counter()
    from test_gibbs import _joint_posterior

    rng = np.random.default_rng(SEED)
    worst_mean = worst_var = worst_cov = 0.0
    for phi, gamma in ((-0.95, 0.1), (0.1, 1.0), (0.95, 10.0), (0.6, 1.0)):
        params = _params(phi, gamma)
        n = 50
        ts = TimeSeries(rng.normal(size=n) + 1.0)
        par = Parametrization(0.0, workparam.w_opt_location(params, n))
        state = vb.vb_fit(ts, params, par, tol=1e-13)

        s = oracles.dense_invert(oracles.dense_s_inv(params, n))
        ones = np.ones(n)
        one_s_one = ones @ s @ ones
        exact_mean = ones @ s @ ts.y / one_s_one
        worst_mean = max(worst_mean, abs(state.m_mu - exact_mean))
        worst_var = max(worst_var, abs(state.var_mu - 1.0 / one_s_one))
        assert abs(state.m_mu - exact_mean) < 1e-8
        assert abs(state.var_mu - 1.0 / one_s_one) < 1e-8

        # the identity conflict: tau(w_opt) equals 1'S1, not (1'S^{-1}1)^{-1}
        alt = 1.0 / (ones @ oracles.dense_s_inv(params, n) @ ones)
        assert abs(1.0 / state.var_mu - one_s_one) < 1e-8 * one_s_one
        assert abs(1.0 / state.var_mu - alt) > 0.5 * one_s_one

        _, cov = _joint_posterior(ts, params, par)
        worst_cov = max(worst_cov, float(np.abs(cov[0, 1:]).max()))
        assert np.abs(cov[0, 1:]).max() < 1e-10
    _report(7, "variational factor equals the exact mu-marginal at w_opt",
            t0, 10, f"(mean gap {worst_mean:.1e}, var gap {worst_var:.1e}, "
            f"max cross-cov {worst_cov:.1e}; precision identity: 1'S1)")


def test_criterion_8_estep_mstep_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_mom = 0.0
    for phi, gamma in STUDY:
        params = _params(phi, gamma)
        n = 50
        ts = TimeSeries(rng.normal(size=n) + 1.0)
        for a, w in ((0.0, np.zeros(n)), (1.0, np.ones(n)),
                     (0.5, rng.uniform(0, 1, n))):
            par = Parametrization(a, w)
            got = em.e_step(ts, params, par)
            m, cov = oracles.dense_e_step(ts, params, par)
            err = max(np.abs(got.m - m).max(),
                      np.abs(got.v_diag - np.diag(cov)).max(),
                      np.abs(got.v_offdiag - np.diag(cov, 1)).max(),
                      abs(got.tr_v - np.trace(cov)),
                      abs(got.tr_lambda_v
                          - np.trace(oracles.dense_lambda(phi, n) @ cov)))
            worst_mom = max(worst_mom, err)
            assert err < 1e-10, (phi, gamma, a)

    worst_phi = worst_eta = 0.0
    for seed in (1, 2, 3, 4):
        params = _params(0.6, 1.0)
        ts = model.simulate(params, 10, seed=seed)
        par = Parametrization(0.5, rng.uniform(0, 1, 10))
        mom = em.e_step(ts, params, par)

        root = em.update_phi(mom, params, par)
        best = oracles.golden_max_q(
            lambda ph: oracles.q_function(replace(params, phi=ph), ts, params, par),
            -0.999, 0.999, tol=1e-12)
        worst_phi = max(worst_phi, abs(root - best))
        assert abs(root - best) < 1e-6

        s_root = em.update_sigma_eta(ts, mom, params, par)
        s_best = oracles.golden_max_q(
            lambda s: oracles.q_function(replace(params, sigma_eta_sq=s), ts,
                                         params, par),
            s_root * 0.05, s_root * 20.0, tol=1e-12)
        worst_eta = max(worst_eta, abs(s_root - s_best) / max(1.0, s_root))
        assert abs(s_root - s_best) < 1e-6 * max(1.0, s_root)
    _report(8, "smoothed moments and conditional updates vs oracles", t0, 60,
            f"(moments {worst_mom:.1e}, phi {worst_phi:.1e}, "
            f"sigma_eta {worst_eta:.1e})")
