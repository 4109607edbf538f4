"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
written straight to the terminal.
"""

import math
import time

import numpy as np
from scipy.optimize import brentq

from infogeo_em import EmConfig, boltzmann
from infogeo_em.boltzmann import (BoltzmannParams, FitConfig, bm_distribution, fit_bm_em,
                                  fit_weights_to_joint, visible_marginal)
from infogeo_em.bregman import ETA, UFunction, bregman_divergence, u_forward, u_inverse
from infogeo_em.channel import capacity, verify_capacity
from infogeo_em.epca import (DualPoint, ExpFamilySpec, Subspace, e_center, epca_gradients,
                             fit_epca, fit_mpca, m_center, pca_loss)
from infogeo_em.geometry import (e_interpolate, kl_divergence, m_interpolate,
                                 pythagorean_residual)
from infogeo_em.mixture import fit_em, init_params
from infogeo_em.modal import (MlrConfig, fit_mlr, log_mlr_objective, mlr_surrogate, ols,
                              silverman_bandwidth)
from infogeo_em.ranking import (bt_log_likelihood, e_project_pair, fit_bt_em)

# 1 - H2(0.1), 40-digit mpmath
BSC_CAPACITY_BITS = 0.53100440641071877875


def report(capsys, number, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}")
    assert ok, detail


# 1 ------------------------------------------------------------------------

def test_criterion_1_channel_capacity(capsys):
    cases = [
        ("BSC(0.1)", np.array([[0.9, 0.1], [0.1, 0.9]]), BSC_CAPACITY_BITS, 1e-8),
        ("BEC(0.3)", np.array([[0.7, 0.3, 0.0], [0.0, 0.3, 0.7]]), 0.7, 1e-8),
        ("identity4", np.eye(4), 2.0, 1e-10),
    ]
    ok, parts = True, []
    for name, W, ref, tol in cases:
        t0 = time.perf_counter()
        res = capacity(W)
        dt = time.perf_counter() - t0
        err = abs(res.capacity_bits - ref)
        mi = res.trace.objectives
        monotone = all(b >= a for a, b in zip(mi, mi[1:]))
        verified = res.converged and verify_capacity(W, res.input_dist, res.capacity, 1e-6)
        good = err < tol and dt < 1.0 and monotone and verified
        ok &= good
        parts.append(f"{name} err={err:.1e} t={dt:.3f}s mono={monotone} verify={verified}")
    report(capsys, 1, "channel capacity", ok, "; ".join(parts))


# 2 ------------------------------------------------------------------------

def test_criterion_2_gmm_monotone(capsys):
    rng = np.random.default_rng(2024)
    z = rng.random(400) < 0.5
    X = np.where(z, rng.normal(0, 1, 400), rng.normal(5, 1, 400))
    half_ok = ll_ok = 0
    for seed in range(20):
        _, trace = fit_em(X, init_params(X, 2, seed=seed), EmConfig(tol=1e-10, max_iters=1000))
        half_ok += trace.is_monotone(1e-10, half_steps=True)
        ll = trace.extra("loglik")
        ll_ok += all(b >= a for a, b in zip(ll, ll[1:]))
    ok = half_ok == 20 and ll_ok == 20
    report(capsys, 2, "GMM em monotone", ok,
           f"half-step monotone {half_ok}/20, log-likelihood non-decreasing {ll_ok}/20")


# 3 ------------------------------------------------------------------------

def slice_projection(theta, i, j, nij, nji):
    # minimize D(P, Q) over the ratio slice by total pair mass s; the other
    # items keep Q's proportions, and s solves the monotone stationarity equation
    r = nij / (nij + nji)
    rest = 1 - theta[i] - theta[j]

    def dD(s):
        return (r * math.log(r * s / theta[i]) + (1 - r) * math.log((1 - r) * s / theta[j])
                - math.log((1 - s) / rest))

    s = brentq(dD, 1e-15, 1 - 1e-15, xtol=1e-16, rtol=1e-15, maxiter=500)
    P = theta * (1 - s) / rest
    P[i], P[j] = r * s, (1 - r) * s
    return P


def hunter_mle(n, iters=100_000):
    tot = n + n.T
    w = n.sum(axis=1)
    theta = np.full(n.shape[0], 1.0 / n.shape[0])
    for _ in range(iters):
        new = w / (tot / (theta[:, None] + theta[None, :])).sum(axis=1)
        new /= new.sum()
        if np.abs(new - theta).max() < 1e-15:
            return new
        theta = new
    return theta


def bt_gap(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 20, size=(6, 6)).astype(float)
    np.fill_diagonal(n, 0)
    theta, _ = fit_bt_em(n, config=EmConfig(tol=1e-14, param_tol=1e-13))
    return bt_log_likelihood(n, hunter_mle(n)) - bt_log_likelihood(n, theta)


def test_criterion_3_bradley_terry(capsys):
    rng = np.random.default_rng(3)
    rec_err, f_mono = [], True
    for N in (3, 5, 8):
        a = rng.integers(1, 30, size=N).astype(float)
        n = np.tile(a[:, None], (1, N))
        np.fill_diagonal(n, 0)
        theta, trace = fit_bt_em(n, config=EmConfig(tol=1e-14, param_tol=1e-13))
        rec_err.append(np.abs(theta - a / a.sum()).max())
        f_mono &= trace.is_monotone(1e-10)
    for seed in range(20):
        r2 = np.random.default_rng(100 + seed)
        N = int(r2.integers(3, 8))
        n = r2.integers(1, 12, size=(N, N)).astype(float)
        np.fill_diagonal(n, 0)
        _, trace = fit_bt_em(n, init=r2.dirichlet(np.ones(N)), config=EmConfig(tol=1e-13))
        f_mono &= trace.is_monotone(1e-10)
    proj_err = 0.0
    for _ in range(100):
        N = int(rng.integers(3, 8))
        Q = rng.dirichlet(np.ones(N))
        i, j = rng.choice(N, 2, replace=False)
        n = np.zeros((N, N))
        n[i, j], n[j, i] = rng.integers(1, 40, size=2)
        P = e_project_pair(Q, i, j, n)
        proj_err = max(proj_err, np.abs(P - slice_projection(Q, i, j, n[i, j], n[j, i])).max())
    g1, g2 = bt_gap(77), bt_gap(77)
    reproducible = g1.hex() == g2.hex()
    ok = max(rec_err) < 1e-8 and f_mono and proj_err < 1e-8 and reproducible
    report(capsys, 3, "Bradley-Terry", ok,
           f"recovery err {max(rec_err):.1e} (N=3,5,8); F monotone={f_mono}; "
           f"closed form vs numeric {proj_err:.1e} over 100; "
           f"likelihood gap to MLE {g1:.6g} nats (reproducible={reproducible})")


# 4 ------------------------------------------------------------------------

def mlr_problem(seed, n=80, skewed=True):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.uniform(-2, 2, n)])
    beta = np.array([1.0, -0.5])
    if skewed:
        far = rng.random(n) < 0.3
        eps = np.where(far, rng.normal(4, 2, n), 0.7 * rng.normal(0, 1, n))
    else:
        eps = rng.normal(0, 0.5, n)
    return X, X @ beta + eps, beta


def test_criterion_4_modal_regression(capsys):
    mono = 0
    for seed in range(50):
        X, y, _ = mlr_problem(seed, skewed=seed % 2 == 0)
        _, trace = fit_mlr(X, y, MlrConfig(h=silverman_bandwidth(X, y), tol=1e-12))
        mono += trace.is_monotone(1e-12)
    tangency, minor_ok = 0.0, True
    rng = np.random.default_rng(4)
    for seed in range(50):
        X, y, beta = mlr_problem(seed, 40)
        h = float(rng.uniform(0.1, 2))
        bk = beta + rng.normal(0, 0.3, 2)
        tangency = max(tangency, abs(mlr_surrogate(bk, bk, X, y, h) - log_mlr_objective(bk, X, y, h)))
        for _ in range(10):
            b = bk + rng.normal(0, 1, 2)
            minor_ok &= mlr_surrogate(b, bk, X, y, h) <= log_mlr_objective(b, X, y, h)
    X, y, beta = mlr_problem(2024, 600)
    b, _ = fit_mlr(X, y, MlrConfig(h=0.5))
    e_mlr, e_ols = abs(b[0] - beta[0]), abs(ols(X, y)[0] - beta[0])
    ok = mono == 50 and tangency < 1e-10 and minor_ok and e_mlr < e_ols
    report(capsys, 4, "modal regression", ok,
           f"monotone {mono}/50; tangency {tangency:.1e}; minorization={minor_ok}; "
           f"intercept error MLR {e_mlr:.3f} vs OLS {e_ols:.3f}")


# 5 ------------------------------------------------------------------------

def points_for(spec, n, rng):
    if spec.kind == "gaussian":
        return [DualPoint.from_eta(spec, [m]) for m in rng.normal(0, 2, n)]
    return [DualPoint.from_eta(spec, p[:-1]) for p in rng.dirichlet(np.full(spec.d, 2.0), n)]


def fd_rel_error(spec, coords, rng, K=2, N=4, h=1e-6):
    pts = points_for(spec, N, rng)
    if coords == "theta":
        basis = rng.normal(0, 1, (K, spec.dim))
        W = rng.normal(0, 1, (N, K))
        W[:, -1] = 1 - W[:, :-1].sum(axis=1)
    else:
        basis = np.vstack([p.eta for p in points_for(spec, K, rng)])
        W = rng.dirichlet(np.ones(K), N)
    dW, dU = epca_gradients(spec, Subspace(basis, W, coords), pts)

    def L(B, Wv):
        return pca_loss(spec, Subspace(B, Wv, coords), pts)

    fd_u = np.zeros_like(basis)
    for idx in np.ndindex(basis.shape):
        E = np.zeros_like(basis)
        E[idx] = h
        fd_u[idx] = (L(basis + E, W) - L(basis - E, W)) / (2 * h)
    fd_w = np.zeros_like(W)
    for i in range(N):
        for k in range(K):
            d = -np.full(K, 1.0 / K)
            d[k] += 1
            E = np.zeros_like(W)
            E[i] = h * d
            fd_w[i, k] = (L(basis, W + E) - L(basis, W - E)) / (2 * h)
    # fd_w[i, k] is the derivative along e_k - mean, which for a tangent
    # gradient equals its k-th entry
    an = np.concatenate([dU.ravel(), dW.ravel()])
    fd = np.concatenate([fd_u.ravel(), fd_w.ravel()])
    return np.linalg.norm(fd - an) / np.linalg.norm(an)


def test_criterion_5_exponential_family_pca(capsys):
    rng = np.random.default_rng(5)
    worst = {}
    for spec in (ExpFamilySpec.categorical(4), ExpFamilySpec.gaussian(0.7)):
        for coords in ("theta", "eta"):
            worst[(spec.kind, coords)] = max(fd_rel_error(spec, coords, rng) for _ in range(50))
    cat = ExpFamilySpec.categorical(3)
    pts = points_for(cat, 6, rng)
    sub_e, _ = fit_epca(cat, pts, 1)
    sub_m, _ = fit_mpca(cat, pts, 1)
    c_err = max(np.abs(sub_e.basis[0] - e_center(cat, pts).theta).max(),
                np.abs(sub_m.basis[0] - m_center(cat, pts).eta).max())
    spec4 = ExpFamilySpec.categorical(4)
    B = rng.normal(0, 1, (2, 3))
    Wt = rng.uniform(-0.5, 1.5, (8, 1))
    e_pts = [DualPoint.from_theta(spec4, t) for t in np.hstack([Wt, 1 - Wt]) @ B]
    Be = rng.dirichlet(np.ones(4), 2)[:, :-1]
    We = rng.uniform(0.05, 0.95, (8, 1))
    m_pts = [DualPoint.from_eta(spec4, e) for e in np.hstack([We, 1 - We]) @ Be]
    loss_e = fit_epca(spec4, e_pts, 2)[1].objectives[-1]
    loss_m = fit_mpca(spec4, m_pts, 2)[1].objectives[-1]
    fd_max = max(worst.values())
    ok = fd_max < 1e-6 and c_err < 1e-8 and loss_e < 1e-10 and loss_m < 1e-10
    report(capsys, 5, "e-PCA / m-PCA", ok,
           f"max FD rel error {fd_max:.1e} (50 per family and mode); K=1 center err {c_err:.1e}; "
           f"exact-subspace loss e {loss_e:.1e} m {loss_m:.1e}")


# 6 ------------------------------------------------------------------------

def m_projection_on_e_line(q, a, b):
    T = np.log(b) - np.log(a)

    def fam(s):
        w = np.log(a) + s * T
        w = np.exp(w - w.max())
        return w / w.sum()

    grid = np.linspace(-8, 9, 1701)
    k = int(np.argmin([kl_divergence(q, fam(s)) for s in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    s = brentq(lambda s: fam(s) @ T - q @ T, lo, hi, xtol=1e-15, rtol=1e-15)
    return fam(s), fam


def test_criterion_6_geometry(capsys):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(3, 6))
        a, b, q = rng.dirichlet(np.ones(d), 3)
        mid, fam = m_projection_on_e_line(q, a, b)
        s = float(rng.uniform(-2, 3))
        worst = max(worst, abs(pythagorean_residual(q, mid, fam(s))))
    failures = 0
    for _ in range(10_000):
        d = int(rng.integers(2, 8))
        p, q = rng.dirichlet(np.ones(d) * rng.uniform(0.2, 3), 2)
        p, q = np.maximum(p, 1e-300), np.maximum(q, 1e-300)
        p, q = p / p.sum(), q / q.sum()
        t = float(rng.random())
        good = (kl_divergence(p, q) >= 0 and kl_divergence(p, p) == 0
                and np.array_equal(m_interpolate(p, q, 0), p) and np.array_equal(m_interpolate(p, q, 1), q)
                and np.array_equal(e_interpolate(p, q, 0), p) and np.array_equal(e_interpolate(p, q, 1), q)
                and abs(m_interpolate(p, q, t).sum() - 1) < 1e-12
                and abs(e_interpolate(p, q, t).sum() - 1) < 1e-12)
        failures += not good
    ok = worst < 1e-8 and failures == 0
    report(capsys, 6, "geometry core", ok,
           f"max Pythagorean residual {worst:.1e} over 100; property failures {failures}/10000")


# 7 ------------------------------------------------------------------------

def test_criterion_7_bregman(capsys):
    rng = np.random.default_rng(7)
    U = UFunction.exponential()
    kl_err = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 8))
        p, q = rng.dirichlet(np.ones(d), 2)
        kl_err = max(kl_err, abs(bregman_divergence(U, p, q) - kl_divergence(p, q)))
    rt = 0.0
    zeta = np.linspace(0.05, 5, 200)
    for G in (U, UFunction.eta_type(0.02), UFunction.beta_type(0.5), UFunction.beta_type(2.0)):
        # theta grid inside the domain of u, obtained from positive values
        z = u_inverse(G, zeta + (G.param if G.kind == ETA else 0.0))
        rt = max(rt, np.abs(u_inverse(G, u_forward(G, z)) - z).max())
        zz = zeta + (G.param if G.kind == ETA else 0.0)
        rt = max(rt, np.abs(u_forward(G, u_inverse(G, zz)) - zz).max())
    p, q = np.array([0.2, 0.3, 0.5]), np.array([0.45, 0.35, 0.2])
    kl = kl_divergence(p, q)
    gaps = [abs(bregman_divergence(UFunction.beta_type(b), p, q) - kl) for b in (1e-2, 1e-3, 1e-4)]
    ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    linear = all(abs(r - 10) < 1 for r in ratios)
    ok = kl_err < 1e-12 and rt < 1e-10 and linear
    report(capsys, 7, "Bregman", ok,
           f"max |D_exp - KL| {kl_err:.1e} over 1000; round-trip {rt:.1e}; "
           f"beta gaps {', '.join(f'{g:.2e}' for g in gaps)} (ratios {ratios[0]:.2f}, {ratios[1]:.2f})")


# 8 ------------------------------------------------------------------------

def test_criterion_8_boltzmann(capsys, monkeypatch):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    rec = []
    for n in (2, 3, 4):
        truth = BoltzmannParams(n, 0, np.triu(rng.normal(0, 1, (n, n)), 1))
        fit = fit_weights_to_joint(bm_distribution(truth), BoltzmannParams(n, 0))
        rec.append(np.abs(fit.w - truth.w).max())

    marg_err = [0.0]
    original = boltzmann.project_to_data

    def spy(P_hat, params):
        P = original(P_hat, params)
        P_hat = np.asarray(P_hat, dtype=float)
        marg_err[0] = max(marg_err[0], np.abs(visible_marginal(P, params.n_visible, params.n_hidden)
                                              - P_hat / P_hat.sum()).max())
        return P

    monkeypatch.setattr(boltzmann, "project_to_data", spy)
    mono = []
    for v in (2, 3):
        truth = BoltzmannParams(v, 1, np.triu(rng.normal(0, 1.5, (v + 1, v + 1)), 1))
        P_hat = visible_marginal(bm_distribution(truth), v, 1)
        _, trace = fit_bm_em(P_hat, v, 1, FitConfig())
        mono.append(trace.is_monotone(1e-10, half_steps=True))
    dt = time.perf_counter() - t0
    ok = max(rec) < 1e-6 and all(mono) and marg_err[0] < 1e-12 and dt < 10
    report(capsys, 8, "Boltzmann", ok,
           f"recovery err {max(rec):.1e} (n=2,3,4); half-steps monotone {mono}; "
           f"marginal err {marg_err[0]:.1e}; time {dt:.2f}s")
