"""Acceptance suite: headline behaviors, one printed verdict line per check.

Run with `pytest tests/test_acceptance.py -s` to see the verdict lines.
Each check pins the tolerance and, where relevant, a wall-clock budget.
"""

import time
import warnings

import numpy as np
from scipy.special import expit

from penpath import (
    GaussianGraphicalLoss,
    GlmLoss,
    LogConcaveLoss,
    QuadraticLoss,
    run_path,
)
from penpath.constraints import equalities, fused_lasso, isotone, lasso, shape
from penpath.losses import j_kernel
from penpath.oracles import glasso_coordinate, pava, quadrature_j, solve_fixed_rho
from penpath.path import MODES, degrees_of_freedom, stationarity_residual
from penpath.sweeplin import inverse_sweep, sweep


def verdict(number, name, ok, detail):
    line = f"[{number:2d}/11] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    assert ok, line


def quiet_path(model, cs, **overrides):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_path(model, cs, **overrides)


def test_soft_threshold_path_is_exact():
    start = time.perf_counter()
    b = np.array([2.0, -1.0])
    solution = quiet_path(QuadraticLoss.from_target(b), lasso(2))
    elapsed = time.perf_counter() - start

    kink_rhos = sorted(k.rho for k in solution.kinks)
    kink_err = max(abs(kink_rhos[0] - 1.0), abs(kink_rhos[1] - 2.0))

    beta_err = 0.0
    for rho in np.linspace(0.0, 2.2, 100):
        analytic = np.sign(b) * np.maximum(np.abs(b) - rho, 0.0)
        beta_err = max(beta_err, np.max(np.abs(solution.beta_at(rho) - analytic)))

    ok = len(kink_rhos) == 2 and kink_err < 1e-8 and beta_err < 1e-8 and elapsed < 1.0
    verdict(1, "soft-threshold exactness", ok,
            f"kink err {kink_err:.1e}, beta err {beta_err:.1e}, {elapsed:.2f} s")


def test_random_lasso_matches_fixed_rho_oracle():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(20, 5))
        y = x @ rng.normal(size=5) + 0.5 * rng.normal(size=20)
        model = QuadraticLoss.from_least_squares(x, y)
        cs = lasso(5)
        solution = quiet_path(model, cs)
        for rho in rng.uniform(0.05, 0.95, size=10) * solution.rho_end:
            reference = solve_fixed_rho(model, cs, rho)
            worst = max(worst, np.max(np.abs(solution.beta_at(rho) - reference.beta)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10.0
    verdict(2, "random lasso vs fixed-rho oracle", ok,
            f"worst {worst:.1e}, {elapsed:.2f} s")


def test_isotone_terminal_equals_pava():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        y = 2.0 * rng.normal(size=10)
        solution = quiet_path(QuadraticLoss.from_target(y), isotone(10))
        worst = max(worst, np.max(np.abs(solution.terminal_beta - pava(y))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 5.0
    verdict(3, "isotone terminal vs pava", ok, f"worst {worst:.1e}, {elapsed:.2f} s")


def test_stationarity_and_coefficient_ranges_along_logistic_paths():
    worst_residual = 0.0
    all_in_range = True
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(50, 5))
        y = (rng.random(50) < expit(x @ (0.8 * rng.normal(size=5)))).astype(float)
        model = GlmLoss(x, y, family="logistic")
        cs = lasso(5)
        solution = quiet_path(model, cs)
        for rho in solution.rho_grid(20):
            residual = stationarity_residual(
                model, cs, solution.config_at(rho), solution.beta_at(rho), rho
            )
            worst_residual = max(worst_residual, residual)
            all_in_range &= solution.coefficients_at(rho).in_range(1e-7)
    ok = worst_residual < 1e-6 and all_in_range
    verdict(4, "stationarity sweep on logistic lasso", ok,
            f"worst residual {worst_residual:.1e}, ranges ok {all_in_range}")


def test_precision_matrix_path_matches_glasso_and_stays_pd():
    worst_fit, worst_terminal, min_eig = 0.0, 0.0, np.inf
    for seed in range(10):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(40, 4))
        sigma = a.T @ a / 40
        model = GaussianGraphicalLoss(sigma)
        cs = equalities(np.eye(model.dim)[model.offdiagonal_coordinates()])
        solution = quiet_path(model, cs)
        for rho in rng.uniform(0.05, 0.95, size=5) * solution.rho_end:
            reference = glasso_coordinate(sigma, rho)
            fitted = model.to_matrix(solution.beta_at(rho))
            worst_fit = max(worst_fit, np.max(np.abs(fitted - reference)))
        for rho in solution.rho_grid(20):
            eigs = np.linalg.eigvalsh(model.to_matrix(solution.beta_at(rho)))
            min_eig = min(min_eig, eigs.min())
        limit = np.diag(1.0 / np.diag(sigma))
        worst_terminal = max(worst_terminal, np.max(np.abs(
            model.to_matrix(solution.terminal_beta) - limit)))
    ok = worst_fit < 1e-4 and worst_terminal < 1e-4 and min_eig > 0.0
    verdict(5, "precision-matrix path vs glasso", ok,
            f"fit {worst_fit:.1e}, diag limit {worst_terminal:.1e}, "
            f"min eig {min_eig:.2e}")


def test_log_concave_density_fit():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    draws = rng.gumbel(0.0, 1.0, size=25)
    model = LogConcaveLoss.from_samples(draws)
    support = model.support
    cs = shape(model.dim, kind="concave", grid=support)
    solution = quiet_path(model, cs)
    phi = solution.terminal_beta
    elapsed = time.perf_counter() - start

    feasibility = float(np.max(cs.ineq_residuals(phi)))
    kkt = stationarity_residual(
        model, cs, solution.segments[-1].config, phi, solution.rho_end
    )
    # the fitted density is exp of the piecewise-linear phi; integrate it
    # on a fine grid so quadrature error stays far below the gate
    grid = np.linspace(support[0], support[-1], 20001)
    integral = np.trapezoid(np.exp(np.interp(grid, support, phi)), grid)

    ok = (solution.status == "terminated" and feasibility <= 1e-8
          and kkt < 1e-6 and abs(integral - 1.0) < 1e-6 and elapsed < 30.0)
    verdict(6, "log-concave density fit", ok,
            f"feasibility {feasibility:.1e}, kkt {kkt:.1e}, "
            f"integral err {abs(integral - 1.0):.1e}, {elapsed:.2f} s")


def test_j_kernel_agrees_with_quadrature():
    rng = np.random.default_rng(123)
    pairs = [(a, b) for a in range(4) for b in range(4) if a + b <= 3]
    worst = 0.0
    for i in range(1000):
        a, b = pairs[rng.integers(len(pairs))]
        r = rng.uniform(-3.0, 3.0)
        if i % 10 == 0:
            # near-equal arguments exercise the series branch
            s = r + rng.uniform(0.0, 1e-6) * rng.choice([-1.0, 1.0])
        else:
            s = rng.uniform(-3.0, 3.0)
        difference = abs(j_kernel(a, b, r, s) - quadrature_j(a, b, r, s))
        worst = max(worst, difference / (1.0 + abs(quadrature_j(a, b, r, s))))
    ok = worst < 1e-9
    verdict(7, "j-kernel vs quadrature", ok, f"worst rel {worst:.1e}")


def fd_gradient(model, x):
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    out = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        out[i] = (model.value(x + step) - model.value(x - step)) / (2.0 * h)
    return out


def fd_hessian(model, x):
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    cols = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        cols.append((model.gradient(x + step) - model.gradient(x - step)) / (2.0 * h))
    return np.column_stack(cols)


def fd_dhessian(model, x, v):
    h = 1e-5
    return (model.hessian(x + h * v) - model.hessian(x - h * v)) / (2.0 * h)


def test_derivative_stack_all_families():
    rng = np.random.default_rng(8)

    a = rng.normal(size=(5, 5))
    quadratic = QuadraticLoss(a @ a.T + np.eye(5), rng.normal(size=5))

    x_glm = rng.normal(size=(10, 3))
    y_glm = (rng.random(10) < 0.5).astype(float)
    logistic = GlmLoss(x_glm, y_glm, family="logistic")

    c = rng.normal(size=(20, 3))
    ggm = GaussianGraphicalLoss(c.T @ c / 20)

    logconcave = LogConcaveLoss.from_samples(rng.normal(size=8))

    points = {
        "quadratic": (quadratic, rng.normal(size=5)),
        "logistic": (logistic, 0.5 * rng.normal(size=3)),
        "ggm": (ggm, ggm.from_matrix(np.eye(3) * 2.0)),
        "logconcave": (logconcave, -np.ones(logconcave.dim)),
    }
    worst = {"grad": 0.0, "hess": 0.0, "dh": 0.0}
    ok = True
    for model, x in points.values():
        g = model.gradient(x)
        g_err = np.max(np.abs(g - fd_gradient(model, x))) / (1.0 + np.abs(g).max())
        h = model.hessian(x)
        h_err = np.max(np.abs(h - fd_hessian(model, x))) / (1.0 + np.abs(h).max())
        v = rng.standard_normal(x.size)
        v /= np.linalg.norm(v)
        dh = model.dhessian(x, v)
        dh_err = np.max(np.abs(dh - fd_dhessian(model, x, v))) / (1.0 + np.abs(dh).max())
        worst["grad"] = max(worst["grad"], g_err)
        worst["hess"] = max(worst["hess"], h_err)
        worst["dh"] = max(worst["dh"], dh_err)
        ok &= g_err < 1e-5 and h_err < 1e-5 and dh_err < 1e-4
    verdict(8, "derivative stack, four loss families", ok,
            f"grad {worst['grad']:.1e}, hess {worst['hess']:.1e}, "
            f"dh {worst['dh']:.1e}")


def test_three_modes_agree_on_logistic_fused_lasso():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(60, 8))
    beta_true = np.repeat([0.8, -0.5], 4)
    y = (rng.random(60) < expit(x @ beta_true)).astype(float)
    model = GlmLoss(x, y, family="logistic")
    cs = fused_lasso(8)

    solutions = {mode: quiet_path(model, cs, mode=mode) for mode in MODES}
    grid = solutions["direct"].rho_grid(20)
    worst = 0.0
    for first in MODES:
        for second in MODES:
            if first < second:
                worst = max(worst, max(
                    np.max(np.abs(solutions[first].beta_at(r)
                                  - solutions[second].beta_at(r)))
                    for r in grid
                ))
    ok = worst < 1e-5 and all(s.status == "terminated" for s in solutions.values())
    verdict(9, "direct/nullspace/tableau agreement", ok, f"worst {worst:.1e}")


def test_sweep_algebra_properties():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(2, 9))
        b = rng.normal(size=(p, p))
        a = b @ b.T + 0.5 * np.eye(p)

        k, j = rng.choice(p, size=2, replace=False)
        roundtrip = inverse_sweep(sweep(a, k), k)
        worst = max(worst, np.max(np.abs(roundtrip - a)))

        order_one = sweep(sweep(a, k), j)
        order_two = sweep(sweep(a, j), k)
        worst = max(worst, np.max(np.abs(order_one - order_two)))

        full = a
        for idx in range(p):
            full = sweep(full, idx)
        worst = max(worst, np.max(np.abs(full + np.linalg.inv(a))))
    ok = worst < 1e-10
    verdict(10, "sweep algebra", ok, f"worst {worst:.1e}")


def test_df_bookkeeping_along_path():
    rng = np.random.default_rng(9)
    p = 7
    model = QuadraticLoss.from_target(2.0 * rng.normal(size=p))
    cs = fused_lasso(p)
    solution = quiet_path(model, cs)

    formula_ok = all(
        degrees_of_freedom(seg.config, p) == p - seg.config.n_active
        and solution.df_at(0.5 * (seg.rho_start + seg.rho_end)) == p - seg.config.n_active
        for seg in solution.segments
        if seg.rho_end > seg.rho_start
    )

    kink_rhos = np.array([k.rho for k in solution.kinks])
    gaps = np.diff(kink_rhos)
    isolated = len(kink_rhos) >= 1 and (gaps.size == 0 or gaps.min() > 1e-9)

    df_seq = [p] + [k.df_after for k in solution.kinks]
    steps_ok = all(abs(after - before) == 1
                   for before, after in zip(df_seq, df_seq[1:]))

    ok = formula_ok and isolated and steps_ok
    verdict(11, "df bookkeeping", ok,
            f"formula {formula_ok}, unit steps {steps_ok}, kinks {len(kink_rhos)}")
