"""Path solver modes, directions, and oracle equivalence."""

import numpy as np
import pytest

from penpath.constraints import (
    ConstraintSystem,
    fused_lasso,
    isotone,
    lasso,
    trend_filter,
)
from penpath.errors import (
    NoConvergence,
    ReducedHessianSingular,
    SimultaneousEventWarning,
)
from penpath.losses import (
    GaussianGraphicalLoss,
    GlmLoss,
    LossModel,
    QuadraticLoss,
)
from penpath.oracles import glasso_coordinate, pava, solve_fixed_rho
from penpath.path import run_path


def logistic_model(seed, n=40, p=5):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    coef = rng.standard_normal(p) * (rng.random(p) < 0.7)
    eta = x @ coef
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return GlmLoss(x, y, family="logistic")


# -- mode agreement -----------------------------------------------------------

def test_three_modes_agree_on_quadratic_fused_lasso():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 6))
    y = x @ np.array([2.0, 2.0, 0.0, 0.0, -1.0, -1.0]) + 0.2 * rng.standard_normal(30)
    model = QuadraticLoss.from_least_squares(x, y)
    cs = fused_lasso(6)
    sols = {m: run_path(model, cs, mode=m) for m in ("direct", "nullspace", "tableau")}
    ends = {m: s.rho_end for m, s in sols.items()}
    assert max(ends.values()) - min(ends.values()) < 1e-5
    grid = np.linspace(0.01, min(ends.values()) * 0.99, 11)
    for rho in grid:
        ref = sols["direct"].beta_at(rho)
        for m in ("nullspace", "tableau"):
            assert np.abs(sols[m].beta_at(rho) - ref).max() < 1e-5


def test_three_modes_agree_on_logistic_fused_lasso():
    model = logistic_model(7)
    cs = fused_lasso(5)
    sols = {m: run_path(model, cs, mode=m) for m in ("direct", "nullspace", "tableau")}
    kink_counts = {m: len(s.kinks) for m, s in sols.items()}
    assert len(set(kink_counts.values())) == 1
    grid = np.linspace(0.02, min(s.rho_end for s in sols.values()) * 0.98, 9)
    for rho in grid:
        ref = sols["direct"].beta_at(rho)
        for m in ("nullspace", "tableau"):
            assert np.abs(sols[m].beta_at(rho) - ref).max() < 1e-5


def test_modes_agree_with_inequality_rows():
    rng = np.random.default_rng(19)
    model = QuadraticLoss.from_target(rng.standard_normal(6) * 1.5)
    cs = isotone(6)
    sols = {m: run_path(model, cs, mode=m) for m in ("direct", "nullspace", "tableau")}
    for rho in np.linspace(0.02, min(s.rho_end for s in sols.values()) * 0.98, 8):
        ref = sols["direct"].beta_at(rho)
        for m in ("nullspace", "tableau"):
            assert np.abs(sols[m].beta_at(rho) - ref).max() < 1e-5


def test_tableau_mode_on_trend_filter():
    rng = np.random.default_rng(3)
    t = np.arange(9.0)
    y = 0.4 * t + rng.standard_normal(9)
    model = QuadraticLoss.from_target(y)
    cs = trend_filter(9, order=1)
    direct = run_path(model, cs)
    tab = run_path(model, cs, mode="tableau")
    for rho in np.linspace(0.05, direct.rho_end * 0.95, 7):
        assert np.abs(direct.beta_at(rho) - tab.beta_at(rho)).max() < 1e-5


# -- forward / backward -------------------------------------------------------

def test_backward_matches_forward_on_lasso():
    model = QuadraticLoss.from_target([2.0, -1.0])
    cs = lasso(2)
    fwd = run_path(model, cs)
    bwd = run_path(model, cs, direction="backward", rho_min=1e-4)
    assert bwd.status == "rho_min"
    assert bwd.segments[0].rho_start == pytest.approx(2.2)
    assert np.abs(bwd.segments[0].beta_start).max() < 1e-9
    assert sorted(round(k.rho, 7) for k in bwd.kinks) == [1.0, 2.0]
    for rho in (0.05, 0.4, 1.3, 1.9):
        assert np.abs(fwd.beta_at(rho) - bwd.beta_at(rho)).max() < 1e-7


def test_backward_auto_start_solves_constrained_problem():
    # Wide V: the minimum-norm solution of V beta = d is not argmin f, so
    # the start must come from the reduced Newton solve.
    target = np.array([3.0, 1.0, -2.0, 0.5])
    model = QuadraticLoss.from_target(target)
    bwd = run_path(model, fused_lasso(4), direction="backward", rho_min=1e-3)
    assert np.abs(bwd.segments[0].beta_start - target.mean()).max() < 1e-9
    fwd = run_path(model, fused_lasso(4))
    for rho in (0.01, 0.25, 0.7):
        assert np.abs(fwd.beta_at(rho) - bwd.beta_at(rho)).max() < 1e-7


def test_backward_with_explicit_start():
    model = QuadraticLoss.from_target([2.0, -1.0])
    cs = lasso(2)
    fwd = run_path(model, cs)
    bwd = run_path(
        model,
        cs,
        direction="backward",
        start_beta=fwd.beta_at(1.5),
        rho_start=1.5,
        rho_min=0.01,
    )
    for rho in (0.05, 0.5, 1.2):
        assert np.abs(fwd.beta_at(rho) - bwd.beta_at(rho)).max() < 1e-6


def test_backward_start_validation():
    model = QuadraticLoss.from_target([2.0, 1.0])
    with pytest.raises(ValueError, match="equality-only"):
        run_path(model, isotone(2), direction="backward")
    with pytest.raises(ValueError, match="rho_start"):
        run_path(model, lasso(2), direction="backward", start_beta=[0.0, 0.0])
    with pytest.raises(ValueError, match="largest multiplier"):
        run_path(model, lasso(2), direction="backward", rho_start=0.5)


# -- oracle equivalence -------------------------------------------------------

def test_quadratic_lasso_matches_admm_oracle():
    rng = np.random.default_rng(13)
    for _ in range(8):
        p = int(rng.integers(3, 8))
        x = rng.standard_normal((25, p))
        y = x @ (rng.standard_normal(p) * (rng.random(p) < 0.6))
        y = y + 0.3 * rng.standard_normal(25)
        model = QuadraticLoss.from_least_squares(x, y)
        cs = lasso(p)
        sol = run_path(model, cs)
        for rho in rng.uniform(0.05, sol.rho_end * 1.1, 3):
            orc = solve_fixed_rho(model, cs, float(rho), tol=1e-10)
            assert np.abs(sol.beta_at(rho) - orc.beta).max() < 1e-6


def test_logistic_lasso_matches_admm_oracle():
    model = logistic_model(29)
    cs = lasso(5)
    sol = run_path(model, cs)
    assert sol.status == "terminated"
    for rho in (0.3, 1.1, 2.7):
        if rho < sol.rho_end:
            orc = solve_fixed_rho(model, cs, rho, tol=1e-10)
            assert np.abs(sol.beta_at(rho) - orc.beta).max() < 1e-6


def test_isotone_terminal_matches_pava():
    rng = np.random.default_rng(41)
    for _ in range(10):
        m = int(rng.integers(4, 11))
        y = rng.standard_normal(m) * 2.0
        sol = run_path(QuadraticLoss.from_target(y), isotone(m))
        assert sol.status == "terminated"
        assert np.abs(sol.terminal_beta - pava(y)).max() < 1e-7


def test_terminal_point_solves_constrained_problem():
    rng = np.random.default_rng(53)
    x = rng.standard_normal((30, 5))
    y = x @ np.array([1.0, 1.0, 1.0, -0.5, -0.5]) + 0.2 * rng.standard_normal(30)
    model = QuadraticLoss.from_least_squares(x, y)
    cs = fused_lasso(5)
    sol = run_path(model, cs)
    term = sol.terminal_beta
    assert np.abs(cs.eq_residuals(term)).max() < 1e-7
    # Compare objective against the equality-constrained solve.
    from penpath.path import _constrained_minimum

    ref = _constrained_minimum(model, cs.v_mat, cs.d)
    assert model.value(term) <= model.value(ref) * (1.0 + 1e-6) + 1e-9


# -- graphical model ----------------------------------------------------------

def offdiag_rows(model):
    idx = model.offdiagonal_coordinates()
    v = np.eye(model.dim)[idx]
    return ConstraintSystem(v, np.zeros(len(idx)), np.zeros((0, model.dim)), np.zeros(0))


def test_ggm_path_matches_glasso_and_stays_pd():
    rng = np.random.default_rng(61)
    p, n = 4, 80
    a = rng.standard_normal((p, p)) * 0.4 + np.eye(p)
    cov = np.linalg.inv(a @ a.T + 0.5 * np.eye(p))
    xs = rng.multivariate_normal(np.zeros(p), cov, size=n)
    sigma = xs.T @ xs / n
    model = GaussianGraphicalLoss(sigma)
    sol = run_path(model, offdiag_rows(model))
    assert sol.status == "terminated"
    for rho in sol.rho_grid(per_segment=6):
        omega = model.to_matrix(sol.beta_at(rho))
        assert np.linalg.eigvalsh(omega).min() > 0.0
    for rho in np.linspace(0.04, sol.rho_end * 0.9, 4):
        ref = glasso_coordinate(sigma, float(rho), tol=1e-9)
        assert np.abs(model.to_matrix(sol.beta_at(rho)) - ref).max() < 1e-5
    term = model.to_matrix(sol.terminal_beta)
    assert np.abs(term - np.diag(1.0 / np.diag(sigma))).max() < 1e-6


# -- degenerate geometry ------------------------------------------------------

class RankOneLoss(LossModel):
    """f = (beta_1 - beta_2 - a)^2 / 2: convex with a flat direction."""

    def __init__(self, a):
        self.a = float(a)
        self.v = np.array([1.0, -1.0])

    @property
    def dim(self):
        return 2

    def value(self, x):
        x = self._as_param(x)
        return float(0.5 * (self.v @ x - self.a) ** 2)

    def gradient(self, x):
        x = self._as_param(x)
        return (self.v @ x - self.a) * self.v

    def hessian(self, x):
        self._as_param(x)
        return np.outer(self.v, self.v)

    def dhessian(self, x, v):
        self._as_param(x)
        return np.zeros((2, 2))


def test_direct_mode_switches_to_nullspace_on_singular_hessian():
    # Penalize the first coordinate only; the active row's null space is
    # spanned by e_2, where the Hessian restriction is positive.
    model = RankOneLoss(1.0)
    cs = ConstraintSystem(
        np.array([[1.0, 0.0]]), np.zeros(1), np.zeros((0, 2)), np.zeros(0)
    )
    with pytest.warns(UserWarning, match="nullspace"):
        sol = run_path(
            model,
            cs,
            direction="backward",
            start_beta=[0.0, -1.0],
            rho_start=1.0,
            rho_min=0.05,
        )
    assert sol.mode == "nullspace"
    assert any("nullspace" in w for w in sol.warnings)
    assert np.abs(sol.beta_at(0.1) - [0.0, -1.0]).max() < 1e-8


def test_nullspace_mode_reports_singular_reduction():
    # Here the active row is the curved direction itself, so the reduced
    # Hessian is identically zero and the segment cannot be integrated.
    model = RankOneLoss(1.0)
    cs = ConstraintSystem(
        np.array([[1.0, -1.0]]), np.zeros(1), np.zeros((0, 2)), np.zeros(0)
    )
    with pytest.raises(ReducedHessianSingular):
        run_path(
            model,
            cs,
            mode="nullspace",
            direction="backward",
            start_beta=[0.0, 0.0],
            rho_start=2.0,
            rho_min=0.1,
        )


# -- bookkeeping --------------------------------------------------------------

def test_max_kinks_cap():
    model = QuadraticLoss.from_target([2.0, -1.0, 3.0, -2.0, 1.0])
    with pytest.raises(NoConvergence, match="max_kinks"):
        run_path(model, lasso(5), max_kinks=2)


def test_simultaneous_events_are_recorded():
    # Symmetric target: two fused differences hit zero at the same rho.
    model = QuadraticLoss.from_target([3.0, 1.0, -1.0, 2.0, 0.0])
    with pytest.warns(SimultaneousEventWarning):
        sol = run_path(model, fused_lasso(5))
    assert any("one at a time" in w for w in sol.warnings)
    assert sol.status == "terminated"


def test_solution_records_options_and_mode():
    model = QuadraticLoss.from_target([1.0, -1.0])
    sol = run_path(model, lasso(2), mode="tableau", rho_max=10.0)
    assert sol.mode == "tableau"
    assert sol.direction == "forward"
    assert sol.options.rho_max == 10.0
