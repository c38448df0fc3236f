"""Compiled inner loops for the l1 solvers.

Everything here works on raw float64 arrays and returns status codes; the
public wrappers in :mod:`hsics.solvers` do validation and error mapping.
"""
import numpy as np
from numba import njit

# status codes shared with solvers.py
CONVERGED = 0
MAX_ITER = 1
LINE_SEARCH_FAILED = 2
INFEASIBLE = 3

_STEP_MIN = 1e-16
_STEP_MAX = 1e5
_GAMMA = 1e-4


@njit(cache=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def _gram_objective(yy, c, q, s, lam):
    # 1/2|y - As|^2 + lam |s|_1 expressed through G = A'A, c = A'y, q = Gs
    quad = 0.0
    l1 = 0.0
    for j in range(s.shape[0]):
        quad += s[j] * (0.5 * q[j] - c[j])
        l1 += abs(s[j])
    return 0.5 * yy + quad + lam * l1


@njit(cache=True)
def _gram_kkt(G, c, s, q, lam):
    n = s.shape[0]
    for j in range(n):
        acc = 0.0
        for k in range(n):
            acc += G[j, k] * s[k]
        q[j] = acc
    worst = 0.0
    for j in range(n):
        g = c[j] - q[j]
        if s[j] > 0.0:
            v = abs(g - lam)
        elif s[j] < 0.0:
            v = abs(g + lam)
        else:
            v = abs(g) - lam
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def lasso_cd_gram(G, c, yy, s, lam, max_sweeps, tol, trace):
    """Cyclic coordinate descent on the Gram form, in place on `s`.

    ``trace`` receives the objective before the first sweep and after each
    sweep (it must hold ``max_sweeps + 1`` entries or be empty).
    Returns ``(sweeps, kkt_residual, status)``.
    """
    n = s.shape[0]
    q = np.empty(n)
    kkt = _gram_kkt(G, c, s, q, lam)
    record = trace.shape[0] > 0
    if record:
        trace[0] = _gram_objective(yy, c, q, s, lam)
    if kkt <= tol:
        return 0, kkt, CONVERGED
    for sweep in range(max_sweeps):
        for j in range(n):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = s[j]
            new = _soft(c[j] - q[j] + gjj * old, lam) / gjj
            if new != old:
                delta = new - old
                s[j] = new
                for k in range(n):
                    q[k] += G[k, j] * delta
        kkt = _gram_kkt(G, c, s, q, lam)
        if record:
            trace[sweep + 1] = _gram_objective(yy, c, q, s, lam)
        if kkt <= tol:
            return sweep + 1, kkt, CONVERGED
    return max_sweeps, kkt, MAX_ITER


@njit(cache=True)
def lasso_cd_batch(G, C, yy, S, lam, max_sweeps, tol, sweeps, kkts, status):
    """Column-wise :func:`lasso_cd_gram` over C = A'Y, updating S in place."""
    empty = np.empty(0)
    for i in range(C.shape[1]):
        s = S[:, i].copy()
        sw, kkt, st = lasso_cd_gram(G, C[:, i].copy(), yy[i], s, lam, max_sweeps, tol, empty)
        S[:, i] = s
        sweeps[i] = sw
        kkts[i] = kkt
        status[i] = st


@njit(cache=True)
def _project_into(v, tau, out, buf):
    """Write the projection of v onto {w : |w|_1 <= tau} into `out`.

    Sort-based threshold selection; `buf` is scratch of the same length.
    """
    n = v.shape[0]
    l1 = 0.0
    for j in range(n):
        a = abs(v[j])
        buf[j] = a
        l1 += a
    if l1 <= tau:
        for j in range(n):
            out[j] = v[j]
        return
    if tau <= 0.0:
        for j in range(n):
            out[j] = 0.0
        return
    buf.sort()
    # the largest entry is always active; u - tau may round back to u
    csum = buf[n - 1]
    theta = csum - tau
    for i in range(1, n):
        u = buf[n - 1 - i]
        csum += u
        t = (csum - tau) / (i + 1)
        if u > t:
            theta = t
        else:
            break
    for j in range(n):
        a = abs(v[j]) - theta
        if a > 0.0:
            out[j] = a if v[j] > 0.0 else -a
        else:
            out[j] = 0.0


@njit(cache=True)
def project_l1(v, tau):
    """Euclidean projection onto {w : |w|_1 <= tau} by sorting."""
    out = np.empty_like(v)
    _project_into(v, tau, out, np.empty_like(v))
    return out


@njit(cache=True)
def _residual(A_t, y, x, r):
    # r = y - A x using the rows of A' so zero entries of x cost nothing
    m = y.shape[0]
    for i in range(m):
        r[i] = y[i]
    for j in range(x.shape[0]):
        xj = x[j]
        if xj != 0.0:
            for i in range(m):
                r[i] -= A_t[j, i] * xj


@njit(cache=True)
def _neg_grad(A_t, r, g):
    # g = -A' r
    n, m = A_t.shape
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += A_t[j, i] * r[i]
        g[j] = -acc


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def _l1(a):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += abs(a[i])
    return acc


@njit(cache=True)
def _inf(a):
    acc = 0.0
    for i in range(a.shape[0]):
        if abs(a[i]) > acc:
            acc = abs(a[i])
    return acc


@njit(cache=True)
def _solve_or_lstsq(M, b, try_lu):
    # LU is ~10x cheaper than the SVD-based lstsq; keep it only when the
    # solve is accurate (singular or near-singular M falls through)
    if try_lu:
        ok = True
        try:
            z = np.linalg.solve(M, b)
        except Exception:
            ok = False
        if ok:
            res = M @ z - b
            scale = 0.0
            for i in range(b.shape[0]):
                scale = max(scale, abs(b[i]))
            bad = False
            for i in range(z.shape[0]):
                if not np.isfinite(z[i]):
                    bad = True
            if not bad and _inf(res) <= 1e-10 * max(scale, 1e-300):
                return z
    return np.linalg.lstsq(M, b)[0]


@njit(cache=True)
def _face_step(G, c, x, tau, m):
    """Active-set move towards the least-squares minimiser of the current face.

    On the boundary of the l1 ball the face is the affine set
    {z_S : sign(x_S)'z_S = tau}; inside the ball it is span(A_S). The step
    runs from `x` towards the face minimiser and stops at the first sign
    change (that variable is set to exactly zero) or, in the interior case,
    where the l1 constraint becomes active. Since the objective is a convex
    quadratic minimised at the end of the segment, it never increases.

    `G` is A'A, `c` is A'y and `m` the row count of A.

    Returns the new point and whether it differs from `x`.
    """
    n = x.shape[0]
    k = 0
    for j in range(n):
        if x[j] != 0.0:
            k += 1
    out = x.copy()
    if k == 0 or k > m + 1:
        # with more than m + 1 active variables the face system is singular;
        # SPG has to shrink the support first
        return out, False
    idx = np.empty(k, dtype=np.int64)
    sgn = np.empty(k)
    p = 0
    for j in range(n):
        if x[j] != 0.0:
            idx[p] = j
            sgn[p] = 1.0 if x[j] > 0.0 else -1.0
            p += 1
    Gs = np.empty((k, k))
    cs = np.empty(k)
    for p in range(k):
        cs[p] = c[idx[p]]
        for q in range(k):
            Gs[p, q] = G[idx[p], idx[q]]
    l1x = _l1(x)
    on_boundary = l1x >= tau * (1.0 - 1e-12)
    if on_boundary:
        M = np.zeros((k + 1, k + 1))
        rhs = np.zeros(k + 1)
        M[:k, :k] = Gs
        for p in range(k):
            M[p, k] = sgn[p]
            M[k, p] = sgn[p]
        rhs[:k] = cs
        rhs[k] = tau
        z = _solve_or_lstsq(M, rhs, k <= m)[:k]
    else:
        z = _solve_or_lstsq(Gs, cs, k <= m)
    for p in range(k):
        if not np.isfinite(z[p]):
            return out, False
    alpha = 1.0
    block = -1
    sd = 0.0
    for p in range(k):
        xp = x[idx[p]]
        dp = z[p] - xp
        sd += sgn[p] * dp
        if xp * dp < 0.0:
            t = -xp / dp
            if t < alpha:
                alpha = t
                block = p
    if not on_boundary and sd > 0.0:
        t = (tau - l1x) / sd
        if t < alpha:
            alpha = t
            block = -1
    if alpha <= 0.0:
        return out, False
    for p in range(k):
        j = idx[p]
        out[j] = x[j] + alpha * (z[p] - x[j])
        if out[j] * sgn[p] < 0.0:
            out[j] = 0.0
    if block >= 0:
        out[idx[block]] = 0.0
    if _l1(out) > tau:
        out = project_l1(out, tau)
    return out, True


@njit(cache=True)
def spg_lasso(At, G, y, tau, x, max_iter, pg_tol, eps, rel, memory, face, step0=-1.0):
    """Spectral projected gradient for min |y - Ax|_2 s.t. |x|_1 <= tau.

    The operator is passed as ``At = A'`` (rows are the columns of A) and
    its Gram matrix ``G = A'A``, which the face steps use.

    Barzilai-Borwein steps with a nonmonotone (max of last `memory` values)
    projected-arc backtracking search. `x` is overwritten with the iterate.

    When ``eps >= 0`` the loop also stops once the subproblem is accurate
    enough for the outer Pareto root finder (duality gap small relative to
    the distance of |r| from eps) or once |r| already lies within the root
    tolerance band.

    A positive `step0` replaces the initial step-length guess (the root
    finder passes the last BB step of the previous solve).

    Returns ``(iterations, status, last_step)``.
    """
    n = x.shape[0]
    m = y.shape[0]
    buf = np.empty(n)
    tmp = np.empty(n)
    xn = np.empty(n)
    g = np.empty(n)
    gn = np.empty(n)
    r = np.empty(m)
    rnew = np.empty(m)
    c = np.empty(n)
    _neg_grad(At, y, c)
    for j in range(n):
        c[j] = -c[j]
    _project_into(x.copy(), tau, x, buf)
    _residual(At, y, x, r)
    _neg_grad(At, r, g)
    f = 0.5 * _dot(r, r)
    last_f = np.full(memory, -np.inf)
    last_f[0] = f
    for j in range(n):
        tmp[j] = x[j] - g[j]
    _project_into(tmp, tau, xn, buf)
    dn = 0.0
    for j in range(n):
        dn = max(dn, abs(xn[j] - x[j]))
    if step0 > 0.0:
        step = min(_STEP_MAX, max(_STEP_MIN, step0))
    elif dn < 1.0 / _STEP_MAX:
        step = _STEP_MAX
    else:
        step = min(_STEP_MAX, max(_STEP_MIN, 1.0 / dn))
    prev_support_sig = -1.0
    # signature of the face last solved exactly; re-solving it is wasted work
    done_sig = np.nan
    line_failures = 0
    step_max = _STEP_MAX
    for it in range(max_iter):
        rn = np.sqrt(2.0 * f)
        if eps >= 0.0 and rn > 0.0:
            gnorm = _inf(g)
            gap = _dot(r, r) - _dot(y, r) + tau * gnorm
            if gap < 0.0:
                gap = 0.0
            # |r| exceeds the optimal residual for this tau by at most 2 gap / |r|
            slack = 2.0 * gap / rn
            if abs(rn - eps) <= rel * eps and slack <= 0.5 * rel * eps:
                return it, CONVERGED, step
            if slack <= 0.05 * max(abs(rn - eps), 0.1 * rel * eps):
                return it, CONVERGED, step
        # projected-gradient test; in root-finding mode the gap tests above
        # are the working exits, so this extra projection is done sparingly
        if eps < 0.0 or it % 10 == 0:
            for j in range(n):
                tmp[j] = x[j] - g[j]
            _project_into(tmp, tau, xn, buf)
            pgn = 0.0
            for j in range(n):
                dj = xn[j] - x[j]
                pgn += dj * dj
            if np.sqrt(pgn) <= pg_tol:
                return it, CONVERGED, step

        fmax = last_f.max()
        # projected-arc backtracking
        alpha = 1.0
        ok = False
        fn = f
        for _ in range(10):
            sa = alpha * step
            for j in range(n):
                tmp[j] = x[j] - sa * g[j]
            _project_into(tmp, tau, xn, buf)
            gtd = 0.0
            dmax = 0.0
            for j in range(n):
                dj = xn[j] - x[j]
                gtd += g[j] * dj
                dmax = max(dmax, abs(dj))
            _residual(At, y, xn, rnew)
            fn = 0.5 * _dot(rnew, rnew)
            if fn < fmax + _GAMMA * gtd or dmax == 0.0:
                ok = True
                break
            alpha *= 0.5
        if not ok:
            # feasible-direction backtracking along the projected step
            for j in range(n):
                tmp[j] = x[j] - step * g[j]
            dfe = np.empty(n)
            _project_into(tmp, tau, dfe, buf)
            gtd = 0.0
            for j in range(n):
                dfe[j] -= x[j]
                gtd += g[j] * dfe[j]
            beta = 1.0
            for _ in range(10):
                for j in range(n):
                    xn[j] = x[j] + beta * dfe[j]
                _residual(At, y, xn, rnew)
                fn = 0.5 * _dot(rnew, rnew)
                if fn < fmax + _GAMMA * beta * gtd:
                    ok = True
                    break
                beta *= 0.5
        if not ok:
            line_failures += 1
            if line_failures > 10:
                return it, LINE_SEARCH_FAILED, step
            step_max = step_max / 10.0
            step = min(step, step_max)
            continue

        _neg_grad(At, rnew, gn)
        sts = 0.0
        sty = 0.0
        for j in range(n):
            sv = xn[j] - x[j]
            sts += sv * sv
            sty += sv * (gn[j] - g[j])
        if sty <= 0.0:
            step = step_max
        else:
            step = min(step_max, max(_STEP_MIN, sts / sty))
        for j in range(n):
            x[j] = xn[j]
            g[j] = gn[j]
        for i in range(m):
            r[i] = rnew[i]
        f = fn

        if face:
            # a cheap signature of support and signs
            sig = 0.0
            for j in range(n):
                if x[j] > 0.0:
                    sig += (j + 1) * 1.6180339887
                elif x[j] < 0.0:
                    sig -= (j + 1) * 2.7182818284
            if sig == prev_support_sig and sig != done_sig:
                done_sig = sig
                cand, good = _face_step(G, c, x, tau, m)
                if good:
                    _residual(At, y, cand, rnew)
                    fc = 0.5 * _dot(rnew, rnew)
                    if fc < f:
                        for j in range(n):
                            x[j] = cand[j]
                        for i in range(m):
                            r[i] = rnew[i]
                        _neg_grad(At, r, g)
                        f = fc
            prev_support_sig = sig
        last_f[(it + 1) % memory] = f
    return max_iter, MAX_ITER, step


@njit(cache=True)
def spg_bpdn(At, G, y, eps, x, tau, max_iter, pg_tol, rel, max_root, memory, face, bp_tol):
    """Pareto-curve root finding for min |x|_1 s.t. |y - Ax|_2 <= eps.

    Newton iterations on phi(tau) = |r_tau|_2 - eps with
    phi'(tau) = -|A'r|_inf / |r|_2, safeguarded by a bracket; every phi
    evaluation is a warm-started :func:`spg_lasso` solve.

    Returns ``(tau, total_iterations, root_iterations, status)``.
    """
    ynorm = np.sqrt(_dot(y, y))
    n = x.shape[0]
    if ynorm <= eps:
        for j in range(n):
            x[j] = 0.0
        return 0.0, 0, 0, CONVERGED
    # eps below the residual floor: every tau past the basis-pursuit root is
    # feasible and nearly interpolating, so target the floor itself; points
    # past the root then fall below the acceptance band and bound it from above
    floor_only = eps * (1.0 + rel) < bp_tol * ynorm
    if floor_only:
        eps = bp_tol * ynorm
    # past the root the feasible set grows linearly with the overshoot, so
    # the bracket certificate below has to be much tighter there
    cert = np.sqrt(bp_tol) if floor_only else rel
    lo = 0.0
    hi = np.inf
    phi_lo = ynorm - eps
    phi_hi = 0.0
    total = 0
    accept_hi = eps * (1.0 + rel)
    accept_lo = eps * (1.0 - rel)
    step = -1.0
    r = np.empty(y.shape[0])
    gr = np.empty(n)
    x_hi = np.empty(n)
    for k in range(max_root):
        its, st, step = spg_lasso(At, G, y, tau, x, max_iter, pg_tol, eps, rel, memory, face, step)
        total += its
        _residual(At, y, x, r)
        rn = np.sqrt(_dot(r, r))
        if accept_lo <= rn <= accept_hi:
            return tau, total, k + 1, CONVERGED
        # feasible, and tau is within rel of a point certified to be below
        # the root (so |x|_1 <= tau is within cert of the minimal l1 norm)
        if rn <= accept_hi and lo > 0.0 and tau <= lo * (1.0 + cert):
            return tau, total, k + 1, CONVERGED
        _neg_grad(At, r, gr)
        gnorm = _inf(gr)
        phi = rn - eps
        if phi > 0.0:
            if tau >= lo:
                lo = tau
                phi_lo = phi
            interior = _l1(x) < tau * (1.0 - 1e-6)
            if gnorm <= 1e-12 * rn or (interior and st == CONVERGED):
                # least-squares optimum reached with residual above eps
                return tau, total, k + 1, INFEASIBLE
        else:
            if tau < hi:
                hi = tau
                phi_hi = phi
                for j in range(n):
                    x_hi[j] = x[j]
        tau_new = -1.0
        if phi > 0.0 and gnorm > 0.0:
            # Newton from below the root; the Pareto curve is convex so this
            # does not overshoot when the subproblem is solved accurately
            tau_new = tau + phi * rn / gnorm
        if floor_only and np.isfinite(hi) and (hi <= lo * (1.0 + cert) or tau_new >= hi * (1.0 - cert)):
            # the feasible upper end is certified to within cert of the root
            for j in range(n):
                x[j] = x_hi[j]
            return hi, total, k + 1, CONVERGED
        if np.isfinite(hi) and not (lo < tau_new < hi and abs(tau_new - tau) > 1e-3 * (hi - lo)):
            # above the root the curve can be flat (zero residual), so use the
            # secant through the bracket ends instead of the local slope
            tau_new = lo + phi_lo * (hi - lo) / (phi_lo - phi_hi)
            width = hi - lo
            if not (lo + 1e-3 * width < tau_new < hi - 1e-3 * width):
                tau_new = 0.5 * (lo + hi)
        elif not np.isfinite(hi) and tau_new <= tau:
            tau_new = max(2.0 * tau, tau + 1.0)
        if tau_new < tau:
            xp = project_l1(x, tau_new)
            for j in range(n):
                x[j] = xp[j]
        tau = tau_new
    return tau, total, max_root, MAX_ITER


@njit(cache=True)
def bpdn_batch(At, G, Y, eps, S, max_iter, pg_tol, rel, max_root, memory, face, bp_tol,
               taus, its, status):
    """:func:`spg_bpdn` over the columns of Y; S holds warm starts and receives solutions."""
    n = S.shape[0]
    for i in range(Y.shape[1]):
        x = np.empty(n)
        tau = 0.0
        for j in range(n):
            x[j] = S[j, i]
            tau += abs(x[j])
        y = Y[:, i].copy()
        t, it, _, st = spg_bpdn(At, G, y, eps, x, tau, max_iter, pg_tol, rel, max_root,
                                memory, face, bp_tol)
        S[:, i] = x
        taus[i] = t
        its[i] = it
        status[i] = st
