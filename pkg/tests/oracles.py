"""Independent reference computations used by the tests."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from decoyqkd.asymptotic import E0

K_TRUNC = 8


def poisson_row(x, kmax):
    return np.array([math.exp(-x) * x ** k / math.factorial(k) for k in range(kmax + 1)])


def bisect_root(func, lo, hi, iters=400):
    """Plain bisection; ``func(lo)`` and ``func(hi)`` must differ in sign."""
    flo = func(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = func(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def _h(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def pa_objective(y1, w1):
    # Y1 [1 - h(w1/Y1)], continuous at Y1 = 0
    if y1 <= 0:
        return 0.0
    e = min(max(w1 / y1, 0.0), 1.0)
    return y1 * (1.0 - _h(e))


def slsqp_eve_minimum(rates, source, Y0, restarts=1000, seed=0, kmax=K_TRUNC):
    """Best feasible SLSQP minimum over random starting points.

    Variables are yields ``Y_1..Y_k`` and error products ``w_i = e_i Y_i``;
    the background is fixed at ``Y0`` with error rate 1/2. Constraints are
    scaled to order one.
    """
    pm, pn = poisson_row(source.mu, kmax), poisson_row(source.nu, kmax)
    target = np.array([rates.Q_mu, rates.Q_nu, rates.E_mu * rates.Q_mu, rates.E_nu * rates.Q_nu])
    n = kmax

    def split(z):
        return z[:n], z[n:]

    def eq(z):
        y, w = split(z)
        res = np.array([
            pm[0] * Y0 + pm[1:] @ y,
            pn[0] * Y0 + pn[1:] @ y,
            pm[0] * E0 * Y0 + pm[1:] @ w,
            pn[0] * E0 * Y0 + pn[1:] @ w,
        ])
        return res / target - 1.0

    def obj(z):
        y, w = split(z)
        return pa_objective(y[0], w[0]) / target[0]

    cons = [{"type": "eq", "fun": eq}, {"type": "ineq", "fun": lambda z: split(z)[0] - split(z)[1]}]
    bounds = [(0.0, 1.0)] * (2 * n)
    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(restarts):
        y = rng.uniform(0, 1, n) * np.array([1.0] * n)
        w = y * rng.uniform(0, 1, n)
        res = minimize(obj, np.concatenate([y, w]), method="SLSQP", bounds=bounds,
                       constraints=cons, options={"ftol": 1e-15, "maxiter": 500})
        z = np.clip(res.x, 0, 1)
        if np.max(np.abs(eq(z))) < 1e-7 and np.all(z[:n] - z[n:] > -1e-9):
            best = min(best, pa_objective(z[0], z[n]))
    return best


def cvxpy_eve_minimum(rates, source, Y0, kmax=K_TRUNC):
    """Global minimum of the convex relative-entropy form, or None if unavailable."""
    try:
        import cvxpy as cp
    except ImportError:
        return None
    pm, pn = poisson_row(source.mu, kmax), poisson_row(source.nu, kmax)
    Y = cp.Variable(kmax + 1)
    w = cp.Variable(kmax + 1)
    t = [rates.Q_mu, rates.Q_nu, rates.E_mu * rates.Q_mu, rates.E_nu * rates.Q_nu]
    cons = [Y >= 0, Y <= 1, w >= 0, w <= Y, Y[0] == Y0, w[0] == E0 * Y0,
            pm @ Y / t[0] == 1, pn @ Y / t[1] == 1, pm @ w / t[2] == 1, pn @ w / t[3] == 1]
    # Y h(w/Y) = -[rel_entr(w, Y) + rel_entr(Y - w, Y)] / ln 2
    obj = Y[1] + (cp.rel_entr(w[1], Y[1]) + cp.rel_entr(Y[1] - w[1], Y[1])) / math.log(2)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def chernoff_upper_root(phi, eps):
    """Upper-tail root by plain bisection on the unrelaxed bound."""
    f = lambda d: phi * (d / (1 + d) - math.log1p(d)) - math.log(eps)
    hi = 1.0
    while f(hi) > 0:
        hi *= 2
    return bisect_root(f, 0.0, hi)


def chernoff_lower_root(phi, eps):
    f = lambda d: phi * (-d - (1 - d) * math.log1p(-d)) / (1 + d) - math.log(eps)
    hi = 1 - 1e-12
    if f(hi) > 0:
        return None
    return bisect_root(f, 0.0, hi)


def entropy_line_dominance(line, grid=200001):
    """Largest ``a - b e - (1 - h(e))`` over a dense grid (should be <= 0)."""
    e = np.linspace(1e-9, 1 - 1e-9, grid)
    h = -e * np.log2(e) - (1 - e) * np.log2(1 - e)
    return float(np.max(line.a - line.b * e - (1 - h)))


