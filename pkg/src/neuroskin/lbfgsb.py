"""Bound-constrained limited-memory quasi-Newton minimizer.

Implements the L-BFGS-B family: limited-memory BFGS curvature pairs kept
in compact form, a generalized Cauchy point along the projected steepest
descent path to fix the active set, direct primal subspace minimization
over the free variables, and a strong-Wolfe line search. Option names and
stopping semantics (factr against machine epsilon, pgtol on the projected
gradient infinity norm, maxfun/maxiter budgets) follow the conventional
definitions so configs translate one-to-one.
"""

from dataclasses import dataclass, field

import numpy as np

EPS = float(np.finfo(np.float64).eps)

STATUS_CONVERGED = "converged"
STATUS_MAXITER = "maxiter"
STATUS_MAXFUN = "maxfun"
STATUS_DEGRADED = "degraded-convergence"
STATUS_ABORTED = "aborted"


@dataclass
class Bounds:
    """Componentwise box l < u."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(self.lower >= self.upper):
            raise ValueError("require lower < upper componentwise")

    @classmethod
    def from_pairs(cls, pairs) -> "Bounds":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


@dataclass
class LbfgsbOptions:
    history_size: int = 10
    factr: float = 1.0e12
    pgtol: float = 1.0e-5
    maxfun: int = 100
    maxiter: int = 5
    ls_max: int = 30     # objective evaluations allowed per line search

    def __post_init__(self):
        if min(self.history_size, self.maxfun, self.ls_max) < 1 or self.maxiter < 1:
            raise ValueError("all option counts must be >= 1")
        if self.factr <= 0 or self.pgtol <= 0:
            raise ValueError("factr and pgtol must be > 0")


@dataclass
class IterateRecord:
    iteration: int
    x: np.ndarray
    f: float
    pg_norm: float
    n_evaluations: int


@dataclass
class MinimizeResult:
    xopt: np.ndarray
    fopt: float
    status: str
    n_evaluations: int
    trace: list
    message: str = ""


def project(x, bounds: Bounds) -> np.ndarray:
    """Componentwise clamp into the box."""
    return np.clip(np.asarray(x, dtype=float), bounds.lower, bounds.upper)


def projected_gradient_norm(x, g, bounds: Bounds) -> float:
    """Infinity norm of the gradient with outward components clipped."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    pg = g.copy()
    neg = g < 0
    pg[neg] = np.maximum(x[neg] - bounds.upper[neg], g[neg])
    pg[~neg] = np.minimum(x[~neg] - bounds.lower[~neg], g[~neg])
    return float(np.max(np.abs(pg))) if pg.size else 0.0


class _NonFinite(Exception):
    pass


class _CompactHessian:
    """Compact representation B = theta*I - W M W^T of the L-BFGS matrix."""

    def __init__(self, S: list, Y: list, theta: float, n: int):
        self.theta = theta
        if S:
            smat = np.column_stack(S)
            ymat = np.column_stack(Y)
            self.W = np.hstack([ymat, theta * smat])
            sty = smat.T @ ymat
            d = np.diag(np.diag(sty))
            lmat = np.tril(sty, -1)
            middle = np.block([[-d, lmat.T],
                               [lmat, theta * (smat.T @ smat)]])
            self._minv = np.linalg.inv(middle)
        else:
            self.W = np.zeros((n, 0))
            self._minv = np.zeros((0, 0))

    def m_apply(self, v: np.ndarray) -> np.ndarray:
        if self._minv.size == 0:
            return np.zeros_like(v)
        return self._minv @ v


def _cauchy_point(x, g, bounds: Bounds, hess: _CompactHessian):
    """Generalized Cauchy point along the projected -g path.

    Returns (x_cp, c, free_mask) with c = W^T (x_cp - x). Breakpoint ties
    are processed by stable sort (value, then index) for determinism.
    """
    l, u = bounds.lower, bounds.upper
    n = x.size
    theta = hess.theta
    W = hess.W

    t_br = np.full(n, np.inf)
    neg = g < 0
    pos = g > 0
    t_br[neg] = (x[neg] - u[neg]) / g[neg]
    t_br[pos] = (x[pos] - l[pos]) / g[pos]

    d = np.where(t_br > 0, -g, 0.0)
    xcp = x.astype(float).copy()
    # variables with a zero breakpoint start (and stay) at their bound
    at_bp = t_br <= 0
    xcp[at_bp & neg] = u[at_bp & neg]
    xcp[at_bp & pos] = l[at_bp & pos]

    p = W.T @ d
    c = np.zeros(W.shape[1])
    fp = -float(d @ d)
    fpp = -theta * fp - float(p @ hess.m_apply(p))
    if fp >= 0.0:
        free = (xcp > l) & (xcp < u)
        return xcp, c, free
    fpp = max(fpp, EPS * abs(fp))
    dt_min = -fp / fpp
    t_old = 0.0

    order = np.argsort(t_br, kind="stable")
    for b in order:
        tb = t_br[b]
        if not np.isfinite(tb):
            break
        if tb <= 0.0:
            continue
        dt = tb - t_old
        if dt_min < dt:
            break
        # path reaches breakpoint b: fix variable b at its bound
        xb = u[b] if d[b] > 0 else l[b]
        zb = xb - x[b]
        xcp[b] = xb
        c = c + dt * p
        gb = g[b]
        wb = W[b, :]
        mc = hess.m_apply(c)
        mp = hess.m_apply(p)
        mw = hess.m_apply(wb)
        fp = fp + dt * fpp + gb * gb + theta * gb * zb - gb * float(wb @ mc)
        fpp = fpp - theta * gb * gb - 2.0 * gb * float(wb @ mp) \
            - gb * gb * float(wb @ mw)
        p = p + gb * wb
        d[b] = 0.0
        t_old = tb
        if fp >= 0.0:
            dt_min = 0.0
            break
        fpp = max(fpp, EPS * abs(fp))
        dt_min = -fp / fpp

    dt_min = max(dt_min, 0.0)
    t_cp = t_old + dt_min
    moving = d != 0.0
    xcp[moving] = x[moving] + t_cp * d[moving]
    xcp = np.clip(xcp, l, u)
    c = c + dt_min * p
    free = (xcp > l) & (xcp < u)
    return xcp, c, free


def _subspace_min(x, g, bounds: Bounds, xcp, c, free, hess: _CompactHessian):
    """Minimize the quadratic model over the free variables.

    The solution of B_hat du = -r_c uses the Sherman-Morrison-Woodbury
    form of the compact representation; the step is then truncated to
    stay inside the box (backtracking toward the Cauchy point).
    """
    if not np.any(free):
        return xcp
    l, u = bounds.lower, bounds.upper
    theta = hess.theta
    r = g + theta * (xcp - x) - hess.W @ hess.m_apply(c)
    rf = r[free]
    if hess.W.shape[1] == 0:
        du = -rf / theta
    else:
        wz = hess.W[free, :]
        k = wz.shape[1]
        v = hess.m_apply(wz.T @ rf)
        nmat = np.eye(k) - hess.m_apply(wz.T @ wz) / theta
        try:
            v = np.linalg.solve(nmat, v)
        except np.linalg.LinAlgError:
            du = -rf / theta
        else:
            du = -(rf + wz @ v / theta) / theta

    xf = xcp[free]
    alpha = 1.0
    up = du > 0
    dn = du < 0
    if np.any(up):
        alpha = min(alpha, float(np.min((u[free][up] - xf[up]) / du[up])))
    if np.any(dn):
        alpha = min(alpha, float(np.min((l[free][dn] - xf[dn]) / du[dn])))
    alpha = max(alpha, 0.0)
    xbar = xcp.copy()
    xbar[free] = xf + alpha * du
    return np.clip(xbar, l, u)


def _max_feasible_step(x, d, bounds: Bounds) -> float:
    l, u = bounds.lower, bounds.upper
    cap = np.inf
    up = d > 0
    dn = d < 0
    if np.any(up):
        cap = min(cap, float(np.min((u[up] - x[up]) / d[up])))
    if np.any(dn):
        cap = min(cap, float(np.min((l[dn] - x[dn]) / d[dn])))
    if not np.isfinite(cap):
        cap = 1.0e10
    return max(cap, 1.0)  # x + d is feasible by construction


@dataclass
class _LineSearchResult:
    stp: float
    f: float
    g: np.ndarray
    n_evals: int
    wolfe_ok: bool
    decreased: bool
    capped: bool = False  # step hit the feasibility cap (bound reached)


def _parabolic_min(au, fu, ab, fb, av, fv):
    """Abscissa of the parabola through three points, or None if degenerate."""
    d1 = (ab - au) * (fb - fv)
    d2 = (ab - av) * (fb - fu)
    denom = 2.0 * (d1 - d2)
    if denom == 0.0:
        return None
    cand = ab - ((ab - au) * d1 - (ab - av) * d2) / denom
    return cand if np.isfinite(cand) else None


WOLFE_C1 = 1.0e-4
WOLFE_C2 = 0.1  # fairly exact line search: finite termination on quadratics


def _wolfe_search(phi, f0, dg0, stp0, stpmax, max_evals,
                  c1=WOLFE_C1, c2=WOLFE_C2) -> _LineSearchResult:
    """Strong-Wolfe line search with 4x extrapolation and zoom.

    ``phi(a)`` evaluates f and g at x + a*d and returns (f, g, dg).
    Extrapolation quadruples the step up to ``stpmax`` so that badly
    scaled directions (tiny model steps on flat objectives) still make
    progress within the evaluation budget.
    """
    best = None  # (stp, f, g) with lowest f seen so far

    def note(stp, f, g):
        nonlocal best
        if best is None or f < best[1]:
            best = (stp, f, g)

    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = min(stp0, stpmax)
    n_evals = 0

    def result_from_best(wolfe_ok=False):
        if best is not None and best[1] < f0:
            return _LineSearchResult(best[0], best[1], best[2], n_evals,
                                     wolfe_ok, True)
        return _LineSearchResult(0.0, f0, None, n_evals, False, False)

    def zoom(alo, flo, dglo, ahi, fhi):
        # Sectioning driven by f values only: gradients here come from
        # forward differences, whose bias near a kink (e.g. the apex of a
        # zero-residual fit) misplaces derivative-based interpolants by
        # O(fd step). Parabolic fits on f with a golden-section safeguard
        # still converge to the true one-dimensional minimizer.
        nonlocal n_evals
        u, fu = (alo, flo) if alo < ahi else (ahi, fhi)
        v, fv = (ahi, fhi) if alo < ahi else (alo, flo)
        b = fb = None
        while n_evals < max_evals:
            width = v - u
            if width <= EPS * max(1.0, abs(u)):
                break
            if b is None:
                aj = u + 0.5 * width
            else:
                aj = _parabolic_min(u, fu, b, fb, v, fv)
                gold_lo = u + 0.381966 * width
                gold_hi = v - 0.381966 * width
                if (aj is None or not (u + 0.05 * width <= aj <= v - 0.05 * width)
                        or abs(aj - b) < 0.02 * width):
                    # fall back to a golden split of the larger side
                    aj = gold_hi if (b - u) <= (v - b) else gold_lo
            fj, gj, dgj = phi(aj)
            n_evals += 1
            note(aj, fj, gj)
            if fj <= f0 + c1 * aj * dg0 and abs(dgj) <= -c2 * dg0:
                return _LineSearchResult(aj, fj, gj, n_evals, True, fj < f0)
            if b is None:
                b, fb = aj, fj
                continue
            if fj <= fb:
                if aj < b:
                    v, fv = b, fb
                else:
                    u, fu = b, fb
                b, fb = aj, fj
            else:
                if aj < b:
                    u, fu = aj, fj
                else:
                    v, fv = aj, fj
        return result_from_best()

    while n_evals < max_evals:
        fa, ga, dga = phi(a)
        n_evals += 1
        note(a, fa, ga)
        if fa > f0 + c1 * a * dg0 or (n_evals > 1 and fa >= f_prev):
            return zoom(a_prev, f_prev, dg_prev, a, fa)
        if abs(dga) <= -c2 * dg0:
            return _LineSearchResult(a, fa, ga, n_evals, True, fa < f0)
        if dga >= 0.0:
            return zoom(a, fa, dga, a_prev, f_prev)
        if a >= stpmax * (1.0 - 1.0e-12):
            # capped at the boundary; accept if it decreased f
            return _LineSearchResult(a, fa, ga, n_evals, False, fa < f0,
                                     capped=True)
        a_prev, f_prev, dg_prev = a, fa, dga
        a = min(4.0 * a, stpmax)
    return result_from_best()


def minimize(valgrad, x0, bounds: Bounds, opts: LbfgsbOptions | None = None,
             on_iterate=None) -> MinimizeResult:
    """Minimize ``valgrad`` over the box.

    ``valgrad(x)`` returns (f, gradient). ``on_iterate`` (if given) is
    invoked once per accepted iterate with the new x. The returned trace
    starts with the initial point and then records every accepted
    iterate; f along the trace is non-increasing.
    """
    opts = opts or LbfgsbOptions()
    x = project(x0, bounds)
    n = x.size
    n_evals = 0

    def call(xx):
        nonlocal n_evals
        f, g = valgrad(np.asarray(xx, dtype=float))
        n_evals += 1
        f = float(f)
        g = np.asarray(g, dtype=float).ravel()
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise _NonFinite(f"non-finite objective or gradient at x={xx}")
        return f, g

    try:
        f, g = call(x)
    except _NonFinite as exc:
        return MinimizeResult(x.copy(), np.nan, STATUS_ABORTED, n_evals, [],
                              str(exc))

    trace = [IterateRecord(0, x.copy(), f,
                           projected_gradient_norm(x, g, bounds), n_evals)]
    S: list = []
    Y: list = []
    theta = 1.0
    status = None
    message = ""

    for k in range(1, opts.maxiter + 1):
        if projected_gradient_norm(x, g, bounds) <= opts.pgtol:
            status = STATUS_CONVERGED
            message = "projected gradient below pgtol"
            break
        if n_evals >= opts.maxfun:
            status = STATUS_MAXFUN
            break

        hess = _CompactHessian(S, Y, theta, n)
        try:
            xcp, c, free = _cauchy_point(x, g, bounds, hess)
            xbar = _subspace_min(x, g, bounds, xcp, c, free, hess)
        except np.linalg.LinAlgError:
            # degenerate curvature data: restart from steepest descent
            S.clear()
            Y.clear()
            theta = 1.0
            hess = _CompactHessian(S, Y, theta, n)
            xcp, c, free = _cauchy_point(x, g, bounds, hess)
            xbar = _subspace_min(x, g, bounds, xcp, c, free, hess)

        d = xbar - x
        if np.max(np.abs(d)) <= EPS * (1.0 + np.max(np.abs(x))):
            status = STATUS_DEGRADED
            message = "search direction vanished"
            break

        dg0 = float(g @ d)
        if dg0 >= 0.0:
            # model direction is not descent; fall back to projected -g
            S.clear()
            Y.clear()
            theta = 1.0
            hess = _CompactHessian(S, Y, theta, n)
            xcp, c, free = _cauchy_point(x, g, bounds, hess)
            xbar = _subspace_min(x, g, bounds, xcp, c, free, hess)
            d = xbar - x
            dg0 = float(g @ d)
            if dg0 >= 0.0 or np.max(np.abs(d)) == 0.0:
                status = STATUS_DEGRADED
                message = "no descent direction"
                break

        stpmax = _max_feasible_step(x, d, bounds)
        stp0 = min(1.0, stpmax)
        if k == 1:
            nrm = float(np.linalg.norm(d))
            stp0 = min(min(1.0, 1.0 / nrm) if nrm > 0 else 1.0, stpmax)

        budget = max(1, min(opts.ls_max, opts.maxfun - n_evals + 1))

        def phi(a, _x=x, _d=d):
            fa, ga = call(_x + a * _d)
            return fa, ga, float(ga @ _d)

        try:
            ls = _wolfe_search(phi, f, dg0, stp0, stpmax, budget)
        except _NonFinite as exc:
            return MinimizeResult(x.copy(), f, STATUS_ABORTED, n_evals,
                                  trace, str(exc))

        if not ls.decreased and S:
            # quasi-Newton direction failed; retry once from steepest descent
            S.clear()
            Y.clear()
            theta = 1.0
            hess = _CompactHessian(S, Y, theta, n)
            xcp, c, free = _cauchy_point(x, g, bounds, hess)
            xbar = _subspace_min(x, g, bounds, xcp, c, free, hess)
            d = xbar - x
            dg0 = float(g @ d)
            if dg0 < 0.0 and np.max(np.abs(d)) > 0.0:
                stpmax = _max_feasible_step(x, d, bounds)
                budget = max(1, min(opts.ls_max, opts.maxfun - n_evals + 1))

                def phi(a, _x=x, _d=d):
                    fa, ga = call(_x + a * _d)
                    return fa, ga, float(ga @ _d)

                try:
                    ls = _wolfe_search(phi, f, dg0, min(1.0, stpmax), stpmax,
                                       budget)
                except _NonFinite as exc:
                    return MinimizeResult(x.copy(), f, STATUS_ABORTED,
                                          n_evals, trace, str(exc))

        if not ls.decreased:
            status = STATUS_DEGRADED
            message = "line search found no decrease; best iterate returned"
            break

        xn = np.clip(x + ls.stp * d, bounds.lower, bounds.upper)
        fn, gn = ls.f, ls.g

        s = xn - x
        y = gn - g
        sy = float(s @ y)
        if sy > EPS * float(y @ y):
            S.append(s)
            Y.append(y)
            if len(S) > opts.history_size:
                S.pop(0)
                Y.pop(0)
            theta = float(y @ y) / sy

        f_old = f
        x, f, g = xn, fn, gn
        trace.append(IterateRecord(k, x.copy(), f,
                                   projected_gradient_norm(x, g, bounds),
                                   n_evals))
        if on_iterate is not None:
            on_iterate(x.copy())

        if (f_old - f) <= opts.factr * EPS * max(abs(f_old), abs(f), 1.0):
            status = STATUS_CONVERGED
            message = "relative reduction below factr * eps"
            break
        if n_evals >= opts.maxfun:
            status = STATUS_MAXFUN
            break
    else:
        status = STATUS_MAXITER

    return MinimizeResult(x.copy(), f, status, n_evals, trace, message)
