"""Property suites run by ``blocksg check``.

Each suite compares library code against an independent oracle (straight-line
formula evaluation, grid search, finite differences or a recursion run) and
returns a :class:`CheckResult`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis as an
from .core import BlockPartition, ConstraintSet, Regularizer
from .problems import (
    bilinear_synthetic,
    ls_finite_sum,
    logistic_synthetic,
    random_quadratic,
    tensor_generate,
)
from .prox import project, projected_subgradient_step, prox, prox_step
from .schedules import StepsizeSchedule
from .solvers import bsg_iteration

GRID_STEP = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    failures: int
    detail: str

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.cases - self.failures}/{self.cases} cases ok; {self.detail}"


# dual evaluation -------------------------------------------------------------------


def _d_straight(A, sigma, L, rho, L_r, g0, xs, theta, sigma_k):
    s = len(L_r)
    M2 = 4 * L * L * rho * rho + 2 * g0 * g0
    tot = 0.0
    for lr in L_r:
        tot = tot + 4 * M2 + 4 * sigma_k * sigma_k + 2 * lr * lr
    lmax = 0.0
    for lr in L_r:
        if lr > lmax:
            lmax = lr
    return s * (sigma * sigma + 4 * lmax * lmax) / (1 - L * theta) + s ** 0.5 * (xs + rho) * (A + L * tot ** 0.5)


def _random_constants(rng):
    s = int(rng.integers(1, 6))
    L = float(rng.uniform(0.1, 10.0))
    return an.AnalysisConstants(
        A=float(rng.uniform(0, 3)), sigma=float(rng.uniform(0, 2)), L=L, rho=float(rng.uniform(0, 5)),
        L_r=tuple(rng.uniform(0, 2, s)), grad0_max=float(rng.uniform(0, 4)),
        x_star_norm=float(rng.uniform(0, 5)), theta=float(rng.uniform(0.01, 0.99)) / L,
        mu=float(rng.uniform(0.05, 2.0)),
    )


def check_dual_evaluation(n_sets: int = 100, seed: int = 0, rtol: float = 1e-12) -> CheckResult:
    """Bound formulas against straight-line re-evaluations on random constant sets."""
    rng = np.random.default_rng(seed)
    fails, worst = 0, 0.0
    for _ in range(n_sets):
        c = _random_constants(rng)
        sk = float(rng.uniform(0, 2))
        K = int(rng.integers(1, 10 ** 6))
        dist = float(rng.uniform(0, 5))
        D = _d_straight(c.A, c.sigma, c.L, c.rho, c.L_r, c.grad0_max, c.x_star_norm, c.theta, sk)
        t = c.theta
        want = [
            D,
            D * t / K ** 0.5 + dist * dist / (2 * t * K ** 0.5),
            max(2 * D * t * (1 + c.mu * t) / c.mu, dist * dist) / K,
        ]
        got = [
            an.bound_constant_D(c, sk),
            an.rate_bound_general_convex(c, K, dist, sk),
            an.rate_bound_strongly_convex(c, K, dist, sk),
        ]
        alpha = float(rng.uniform(0.01, 1.99)) / c.L
        g = 3 * c.L / (c.mu * c.mu) * (1 / (alpha * alpha) + c.s * c.L * c.L) / (1 / (2 * alpha) - c.L / 4)
        want += [g, g * alpha / (2 - c.L * alpha) + 3 * c.L / (c.mu * c.mu)]
        got += list(an.gamma_nu(c, alpha))
        errs = [abs(a - b) / max(abs(b), 1e-300) for a, b in zip(got, want)]
        worst = max(worst, max(errs))
        fails += any(e > rtol for e in errs)
    return CheckResult("bound dual evaluation", n_sets, fails, f"worst rel err {worst:.2e}")


# recursion ------------------------------------------------------------------------


def check_recursion(n_draws: int = 100, seed: int = 0, k_max: int = 100_000) -> CheckResult:
    """``A_k <= c/k`` for random ``a in (0, 5]``, ``b in (0, 10]``, ``A1 in [0, 10]``."""
    rng = np.random.default_rng(seed)
    fails, small_a_fails, worst = 0, 0, 0.0
    for _ in range(n_draws):
        a = 5.0 * (1.0 - rng.random())
        b = 10.0 * (1.0 - rng.random())
        A1 = 10.0 * rng.random()
        res = an.check_recursion_bound(a, b, A1, k_max)
        worst = max(worst, res.worst_ratio)
        if not res.holds:
            fails += 1
            small_a_fails += a <= 1.0
    return CheckResult("recursion c/k bound", n_draws, fails,
                       f"worst k*A_k/c {worst:.3g}; violations with a <= 1: {small_a_fails}")


# contraction ----------------------------------------------------------------------


def check_contraction(n_iter: int = 1000, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """Full-batch BSG with constant ``1/L`` on a quadratic contracts by ``gamma/(1+gamma)``."""
    part = BlockPartition([3, 3, 4])
    prob = random_quadratic(10, part, cond=10.0, seed=seed)
    L = prob.uniform_lipschitz()
    mu = prob.strong_convexity()
    alpha = 1.0 / L
    gamma, _ = an.gamma_nu_values(L, mu, part.n_blocks, alpha)
    q = gamma / (1.0 + gamma)
    fstar = prob.objective(prob.optimum())
    sched = StepsizeSchedule("constant", theta=alpha, cap=False)
    x = np.random.default_rng(seed).standard_normal(10)
    order = np.arange(part.n_blocks)
    batch = prob.full_batch()
    gap = prob.objective(x) - fstar
    fails = 0
    for k in range(1, n_iter + 1):
        bsg_iteration(prob, x, k, sched, batch, order)
        new = prob.objective(x) - fstar
        fails += new > q * gap + tol
        gap = new
    return CheckResult("zero-variance contraction", n_iter, fails, f"factor {q:.6f}, final gap {gap:.2e}")


# prox and projection ---------------------------------------------------------------


def _grid(lo, hi):
    return np.arange(lo, hi + GRID_STEP, GRID_STEP)


def check_prox(n_cases: int = 1000, seed: int = 0) -> CheckResult:
    """Grid-search oracles in 1-D plus nonexpansiveness and idempotence in several dimensions."""
    rng = np.random.default_rng(seed)
    fails = 0
    worst = 0.0
    n_grid = 200
    for _ in range(n_grid):
        xi, g = rng.uniform(-2, 2, 2)
        alpha = rng.uniform(0.05, 1.0)
        lam = rng.uniform(0, 1)
        c = xi - alpha * g
        z = _grid(c - alpha * lam - 0.01, c + alpha * lam + 0.01)
        obj = g * (z - xi) + (z - xi) ** 2 / (2 * alpha) + lam * np.abs(z)
        got = prox_step([xi], [g], alpha, Regularizer.l1(lam))[0]
        err = abs(got - z[np.argmin(obj)])
        worst = max(worst, err)
        fails += err > GRID_STEP

        lo = rng.uniform(-1, 0.5)
        hi = lo + rng.uniform(0.1, 1.5)
        r_sub = lam * np.sign(xi)
        z = _grid(lo, hi)
        obj = (g + r_sub) * (z - xi) + (z - xi) ** 2 / (2 * alpha)
        got = projected_subgradient_step([xi], [g], [r_sub], alpha, ConstraintSet.box([lo], [hi]))[0]
        err = abs(got - z[np.argmin(obj)])
        worst = max(worst, err)
        fails += err > GRID_STEP

    for _ in range(n_cases):
        d = int(rng.integers(1, 8))
        u, v = rng.normal(0, 3, (2, d))
        duv = np.linalg.norm(u - v) * (1 + 1e-12) + 1e-15
        lo = rng.uniform(-2, 0, d)
        sets = [ConstraintSet.box(lo, lo + rng.uniform(0, 2, d)),
                ConstraintSet.ball(rng.normal(0, 1, d), rng.uniform(0.1, 2))]
        for X in sets:
            pu, pv = project(X, u), project(X, v)
            fails += np.linalg.norm(pu - pv) > duv
            fails += not np.allclose(project(X, pu), pu, rtol=0, atol=1e-14)
        r = Regularizer.l1(rng.uniform(0, 1))
        a = rng.uniform(0.01, 2)
        fails += np.linalg.norm(prox(r, u, a) - prox(r, v, a)) > duv
    cases = 2 * n_grid + 5 * n_cases
    return CheckResult("prox/projection oracles", cases, int(fails), f"worst grid err {worst:.2e}")


# finite differences ----------------------------------------------------------------


def _oracle_problems(seed: int):
    return {
        "least_squares": ls_finite_sum(12, 30, seed=seed, partition=BlockPartition([4, 4, 4])),
        "logistic": logistic_synthetic(8, 20, seed=seed),
        "tensor": tensor_generate((5, 4, 6), slab_width=2, rank=2, n_samples=6, seed=seed),
        "bilinear": bilinear_synthetic(5, 4, 12, rank=2, seed=seed),
    }


def fd_partial_gradient(problem, i: int, x: np.ndarray, batch, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``sample_objective`` over block ``i``."""
    sl = problem.partition.slice(i)
    out = np.empty(sl.stop - sl.start)
    for j, c in enumerate(range(sl.start, sl.stop)):
        step = h * max(1.0, abs(x[c]))
        xp, xm = x.copy(), x.copy()
        xp[c] += step
        xm[c] -= step
        out[j] = (problem.sample_objective(xp, batch) - problem.sample_objective(xm, batch)) / (2 * step)
    return out


def check_gradients(n_states: int = 20, seed: int = 0, rtol: float = 1e-6) -> CheckResult:
    """Sampled partial gradients of all four problem families against central differences."""
    rng = np.random.default_rng(seed)
    fails, cases, worst = 0, 0, 0.0
    for name, prob in _oracle_problems(seed).items():
        for _ in range(n_states):
            x = rng.standard_normal(prob.partition.total)
            batch = prob.draw_batch(rng, 5)
            for i in range(prob.partition.n_blocks):
                g = prob.partial_gradient(i, x, batch)
                fd = fd_partial_gradient(prob, i, x, batch)
                err = np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-8)
                worst = max(worst, err)
                fails += err > rtol
                cases += 1
    return CheckResult("finite-difference gradients", cases, int(fails), f"worst rel err {worst:.2e}")


SUITES = {
    "dual": check_dual_evaluation,
    "recursion": check_recursion,
    "contraction": check_contraction,
    "prox": check_prox,
    "gradients": check_gradients,
}


def run_all(seed: int = 0, names=None) -> list[CheckResult]:
    names = list(SUITES) if names is None else names
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    return [SUITES[n](seed=seed) for n in names]


__all__ = ["CheckResult", "GRID_STEP", "SUITES", "check_contraction", "check_dual_evaluation", "check_gradients",
           "check_prox", "check_recursion", "fd_partial_gradient", "run_all"]
