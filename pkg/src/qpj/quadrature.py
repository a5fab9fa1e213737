"""Batched adaptive Gauss-Kronrod (7/15) quadrature.

Many independent integrals are refined together: every panel carries the
index of the problem it belongs to, so one vectorized integrand call serves
all of them. Finite panels are mapped with x = a + (b - a)(3u^2 - 2u^3),
whose Jacobian vanishes at both ends and removes the inverse-square-root
singularities that sit on panel boundaries. Semi-infinite panels use
x = a / u.
"""
from __future__ import annotations

import numpy as np

from .errors import QuadratureNotConverged

# Kronrod 15-point nodes on [-1, 1] (positive half) and weights
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_W = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes
GAUSS_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

FINITE, RIGHT_TAIL, LEFT_TAIL = 0, 1, 2

#: multiple of machine epsilon times the panel's absolute integral below
#: which the Gauss-Kronrod difference is treated as round-off
ROUNDOFF = 50 * np.finfo(float).eps


def _map(kind, a, b, u):
    """Physical abscissae and Jacobians for unit-interval parameters ``u``."""
    x = np.empty_like(u)
    jac = np.empty_like(u)
    fin = kind == FINITE
    if fin.any():
        uf = u[fin]
        h = (b - a)[fin]
        x[fin] = a[fin] + h * uf * uf * (3.0 - 2.0 * uf)
        jac[fin] = h * 6.0 * uf * (1.0 - uf)
    tail = ~fin
    if tail.any():
        ut = u[tail]
        # tails store the finite end in ``a`` (positive for right, negative for left)
        x[tail] = a[tail] / ut
        jac[tail] = np.abs(a[tail]) / (ut * ut)
    return x, jac


def integrate_batched(func, breakpoints, *, n_out, rel_tol=1e-9, abs_tol=1e-12,
                      tails=True, max_rounds=80, min_width=1e-15,
                      max_panels=2_000_000, raise_on_failure=True, rule_out=None):
    """Integrate many related functions over the real line or finite ranges.

    Parameters
    ----------
    func : callable
        ``func(x, idx)`` receives abscissae ``x`` (1-D) and the problem index
        of each abscissa; it returns a complex array of shape ``(n_out, len(x))``.
    breakpoints : sequence of 1-D arrays
        Sorted panel boundaries for each problem. With ``tails=True`` the
        outermost points must be ``-X < 0 < X`` and the two semi-infinite
        pieces beyond them are added.
    n_out : int
        Number of integrand components.
    rule_out : list, optional
        If given, (abscissae, weights) of every accepted panel are appended,
        so the converged rule can be reused for related integrands.

    Returns
    -------
    values : ndarray, shape (n_problems, n_out)
    errors : ndarray, shape (n_problems,)
    """
    kinds, lo_a, lo_b, owner, weight = [], [], [], [], []
    n_prob = len(breakpoints)
    for i, bp in enumerate(breakpoints):
        bp = np.unique(np.asarray(bp, dtype=float))
        n_fin = len(bp) - 1
        n_tot = n_fin + (2 if tails else 0)
        kinds.extend([FINITE] * n_fin)
        lo_a.extend(bp[:-1])
        lo_b.extend(bp[1:])
        owner.extend([i] * n_fin)
        weight.extend([1.0 / n_tot] * n_fin)
        if tails:
            if not (bp[0] < 0 < bp[-1]):
                raise ValueError("tail panels need breakpoints spanning zero")
            kinds.extend([RIGHT_TAIL, LEFT_TAIL])
            lo_a.extend([bp[-1], bp[0]])
            lo_b.extend([0.0, 0.0])
            owner.extend([i, i])
            weight.extend([1.0 / n_tot] * 2)

    kind = np.array(kinds, dtype=np.int8)
    pa = np.array(lo_a)
    pb = np.array(lo_b)
    own = np.array(owner, dtype=np.intp)
    share = np.array(weight)
    # every panel is a sub-interval [u0, u1] of the unit parameter range
    u0 = np.zeros(len(kind))
    u1 = np.ones(len(kind))

    total = np.zeros((n_prob, n_out), dtype=complex)
    err_total = np.zeros(n_prob)
    pending_val = np.zeros((n_prob, n_out), dtype=complex)
    scale = np.zeros(n_prob)
    failed = np.zeros(n_prob, dtype=bool)
    floor_total = np.zeros(n_prob)

    for rnd in range(max_rounds):
        n = len(kind)
        if n == 0:
            break
        half = 0.5 * (u1 - u0)
        mid = 0.5 * (u1 + u0)
        u = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
        rep = np.repeat(np.arange(n), 15)
        x, jac = _map(kind[rep], pa[rep], pb[rep], u)
        fx = np.asarray(func(x, own[rep]), dtype=complex).reshape(n_out, n, 15)
        wts = jac.reshape(n, 15) * half[:, None]
        fx = fx * wts[None]
        k_est = fx @ KRONROD_W            # (n_out, n)
        g_est = fx @ GAUSS_W
        err = np.max(np.abs(k_est - g_est), axis=0)
        # error achievable in double precision given cancellation in the panel
        floor = ROUNDOFF * (np.abs(fx) @ KRONROD_W).max(axis=0)

        # running estimate per problem, used for the relative criterion
        pending_val[:] = 0.0
        np.add.at(pending_val, own, k_est.T)
        est = total + pending_val
        scale = np.maximum(scale, np.max(np.abs(est), axis=1))
        tol = np.maximum(abs_tol, rel_tol * scale)

        width = u1 - u0
        allowed = tol[own] * share * width
        # global budget: a problem is finished once accepted plus pending
        # errors fit its tolerance, which tolerates round-off limited panels
        pending_err = np.zeros(n_prob)
        np.add.at(pending_err, own, err)
        finished = err_total + pending_err <= tol
        done = finished[own] | (err <= np.maximum(allowed, floor)) | (width < min_width)
        if rnd == max_rounds - 1 or n > max_panels:
            failed[np.unique(own[~done])] = True
            done[:] = True
        if rule_out is not None and done.any():
            rule_out.append((x.reshape(n, 15)[done].ravel(),
                             (wts[done] * KRONROD_W[None, :]).ravel(), own[done]))
        np.add.at(total, own[done], k_est[:, done].T)
        np.add.at(err_total, own[done], err[done])
        np.add.at(floor_total, own[done], np.maximum(floor[done], 0.0))

        keep = ~done
        kind, pa, pb, own, share = kind[keep], pa[keep], pb[keep], own[keep], share[keep]
        lo, hi, m = u0[keep], u1[keep], mid[keep]
        u0 = np.concatenate([lo, m])
        u1 = np.concatenate([m, hi])
        kind = np.concatenate([kind, kind])
        pa = np.concatenate([pa, pa])
        pb = np.concatenate([pb, pb])
        own = np.concatenate([own, own])
        share = np.concatenate([share, share])

    # same scale as inside the loop: the running maximum of the estimate
    scale = np.maximum(scale, np.max(np.abs(total), axis=1))
    tol = np.maximum(abs_tol, rel_tol * scale)
    failed |= err_total > tol * (1 + 1e-12) + floor_total
    if raise_on_failure and failed.any():
        bad = np.flatnonzero(failed)
        raise QuadratureNotConverged(
            f"{len(bad)} integral(s) missed tolerance; worst error "
            f"{err_total[bad].max():.3e} vs tolerance {tol[bad].min():.3e}")
    return total, err_total


def adaptive_rule(func, breakpoints, *, n_out, **kwargs):
    """Converged Kronrod nodes and weights for a single finite-range problem.

    Returns (nodes, weights, errors) where ``errors`` are the per-component
    error estimates of the driving integrand.
    """
    rule = []
    kwargs.setdefault("tails", False)
    kwargs.setdefault("raise_on_failure", False)
    _, err = integrate_batched(func, [breakpoints], n_out=n_out, rule_out=rule, **kwargs)
    x = np.concatenate([r[0] for r in rule])
    w = np.concatenate([r[1] for r in rule])
    order = np.argsort(x, kind="stable")
    return x[order], w[order], float(err[0])


def integrate(func, breakpoints, **kwargs):
    """Single-problem convenience wrapper around :func:`integrate_batched`.

    ``func(x)`` returns an array of shape ``(n_out, len(x))`` or ``(len(x),)``.
    """
    probe = np.asarray(func(np.array([0.5 * (breakpoints[0] + breakpoints[1])])))
    scalar = probe.ndim == 1
    n_out = 1 if scalar else probe.shape[0]

    def wrapped(x, idx):
        val = np.asarray(func(x), dtype=complex)
        return val.reshape(n_out, len(x))

    values, errors = integrate_batched(wrapped, [breakpoints], n_out=n_out, **kwargs)
    return (values[0, 0] if scalar else values[0]), errors[0]
