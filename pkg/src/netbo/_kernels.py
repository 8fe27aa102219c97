"""Optional JIT-compiled inner loops for the GP posterior and marginal
likelihood. Pure-numpy equivalents in ``gp`` remain the reference
implementation; these kernels only exist because acquisition maximization calls
the posterior thousands of times per suggestion with small batch sizes, where
interpreter overhead dominates. Import failure of numba silently disables
the fast path.

Posterior variances are computed through triangular solves against the Cholesky
factor rather than an explicit inverse: the quadratic-form cancellation is the
accuracy bottleneck for small variances and the solve form keeps the error at
the eps * condition-number level."""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on minimal installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


SQRT5 = math.sqrt(5.0)
_JITTER_LEVELS = (0.0, 1e-8, 1e-6, 1e-4)


@njit(cache=True)
def _cholesky_flag(a):
    """In-place-free lower Cholesky; returns (L, ok) instead of raising."""
    n = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= lower[j, k] * lower[j, k]
        if s <= 0.0:
            return lower, False
        lower[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= lower[i, k] * lower[j, k]
            lower[i, j] = t / lower[j, j]
    return lower, True


@njit(cache=True)
def node_mean_var(q, tsc, alpha, lower, s2, m0):
    """Posterior mean/variance at pre-scaled query rows q (B,d) given pre-scaled
    training rows tsc (n,d), weight vector alpha, and the Cholesky factor."""
    b, d = q.shape
    n = tsc.shape[0]
    means = np.empty(b)
    variances = np.empty(b)
    kvec = np.empty(n)
    v = np.empty(n)
    for m in range(b):
        acc_mean = 0.0
        for i in range(n):
            r2 = 0.0
            for c in range(d):
                t = q[m, c] - tsc[i, c]
                r2 += t * t
            r = math.sqrt(r2)
            k = s2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * math.exp(-SQRT5 * r)
            kvec[i] = k
            acc_mean += k * alpha[i]
        means[m] = m0 + acc_mean
        quad = 0.0
        for i in range(n):
            s = kvec[i]
            for j in range(i):
                s -= lower[i, j] * v[j]
            vi = s / lower[i, i]
            v[i] = vi
            quad += vi * vi
        var = s2 - quad
        variances[m] = var if var > 0.0 else 0.0
    return means, variances


@njit(cache=True)
def node_mean_var_grad(q, tsc, alpha, lower, s2, m0, inv_ell):
    """As node_mean_var but also d(mean)/dz and d(var)/dz in raw coordinates."""
    b, d = q.shape
    n = tsc.shape[0]
    means = np.empty(b)
    variances = np.empty(b)
    dmean = np.zeros((b, d))
    dvar = np.zeros((b, d))
    kvec = np.empty(n)
    gvec = np.empty(n)
    w = np.empty(n)
    for m in range(b):
        acc_mean = 0.0
        for i in range(n):
            r2 = 0.0
            for c in range(d):
                t = q[m, c] - tsc[i, c]
                r2 += t * t
            r = math.sqrt(r2)
            e = math.exp(-SQRT5 * r)
            kvec[i] = s2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * e
            gvec[i] = -(5.0 / 6.0) * s2 * (1.0 + SQRT5 * r) * e
            acc_mean += kvec[i] * alpha[i]
        means[m] = m0 + acc_mean
        # forward then backward substitution: w = K^{-1} kvec, quad = |L^{-1} k|^2
        quad = 0.0
        for i in range(n):
            s = kvec[i]
            for j in range(i):
                s -= lower[i, j] * w[j]
            wi = s / lower[i, i]
            w[i] = wi
            quad += wi * wi
        for i in range(n - 1, -1, -1):
            s = w[i]
            for j in range(i + 1, n):
                s -= lower[j, i] * w[j]
            w[i] = s / lower[i, i]
        var = s2 - quad
        variances[m] = var if var > 0.0 else 0.0
        for i in range(n):
            ga = 2.0 * gvec[i] * alpha[i]
            gw = -4.0 * gvec[i] * w[i]
            for c in range(d):
                diff = q[m, c] - tsc[i, c]
                dmean[m, c] += ga * diff * inv_ell[c]
                dvar[m, c] += gw * diff * inv_ell[c]
    return means, variances, dmean, dvar


@njit(cache=True)
def node_path_value(q, tsc, alpha, lower, s2, m0, zk, sigma_snap):
    """Fused reparametrized node value mean + std * zk at pre-scaled rows q;
    standard deviations below sigma_snap collapse to zero."""
    b, d = q.shape
    n = tsc.shape[0]
    out = np.empty(b)
    kvec = np.empty(n)
    v = np.empty(n)
    for m in range(b):
        acc_mean = 0.0
        for i in range(n):
            r2 = 0.0
            for c in range(d):
                t = q[m, c] - tsc[i, c]
                r2 += t * t
            r = math.sqrt(r2)
            k = s2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * math.exp(-SQRT5 * r)
            kvec[i] = k
            acc_mean += k * alpha[i]
        quad = 0.0
        for i in range(n):
            s = kvec[i]
            for j in range(i):
                s -= lower[i, j] * v[j]
            vi = s / lower[i, i]
            v[i] = vi
            quad += vi * vi
        var = s2 - quad
        sigma = math.sqrt(var) if var > 0.0 else 0.0
        if sigma < sigma_snap:
            sigma = 0.0
        out[m] = m0 + acc_mean + sigma * zk[m]
    return out


@njit(cache=True)
def node_path_value_grad(q, tsc, alpha, lower, s2, m0, inv_ell, zk, sigma_snap):
    """Fused node value mean + std * zk and its raw-coordinate input gradient
    d(mean + std * zk)/dz; gradients vanish where the deviation snaps to zero."""
    b, d = q.shape
    n = tsc.shape[0]
    vals = np.empty(b)
    dval = np.zeros((b, d))
    kvec = np.empty(n)
    gvec = np.empty(n)
    w = np.empty(n)
    for m in range(b):
        acc_mean = 0.0
        for i in range(n):
            r2 = 0.0
            for c in range(d):
                t = q[m, c] - tsc[i, c]
                r2 += t * t
            r = math.sqrt(r2)
            e = math.exp(-SQRT5 * r)
            kvec[i] = s2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * e
            gvec[i] = -(5.0 / 6.0) * s2 * (1.0 + SQRT5 * r) * e
            acc_mean += kvec[i] * alpha[i]
        quad = 0.0
        for i in range(n):
            s = kvec[i]
            for j in range(i):
                s -= lower[i, j] * w[j]
            wi = s / lower[i, i]
            w[i] = wi
            quad += wi * wi
        for i in range(n - 1, -1, -1):
            s = w[i]
            for j in range(i + 1, n):
                s -= lower[j, i] * w[j]
            w[i] = s / lower[i, i]
        var = s2 - quad
        sigma = math.sqrt(var) if var > 0.0 else 0.0
        if sigma < sigma_snap:
            sigma = 0.0
        vals[m] = m0 + acc_mean + sigma * zk[m]
        half_over_sigma = zk[m] / (2.0 * sigma) if sigma > 0.0 else 0.0
        for i in range(n):
            coeff = 2.0 * gvec[i] * (alpha[i] - 2.0 * half_over_sigma * w[i])
            for c in range(d):
                dval[m, c] += coeff * (q[m, c] - tsc[i, c]) * inv_ell[c]
    return vals, dval


@njit(cache=True)
def nlml_value_grad(zn, ys, mean, scale, ell):
    """Negative log marginal likelihood and gradient w.r.t. (mean, log scale,
    log length scales) for standardized data; (1e25, zeros) when the kernel
    matrix cannot be factorized at any jitter level.

    Returns (value, grad) with grad laid out like the fit parameter vector.
    """
    n, d = zn.shape
    grad = np.zeros(2 + d)
    r2 = np.empty((n, n))
    for i in range(n):
        r2[i, i] = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(d):
                t = (zn[i, c] - zn[j, c]) / ell[c]
                acc += t * t
            r2[i, j] = acc
            r2[j, i] = acc
    kmat = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            r = math.sqrt(r2[i, j])
            kmat[i, j] = scale * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2[i, j]) * math.exp(-SQRT5 * r)

    lower = np.zeros((n, n))
    ok = False
    for level in _JITTER_LEVELS:
        shifted = kmat.copy()
        for i in range(n):
            shifted[i, i] += level * scale
        lower, ok = _cholesky_flag(shifted)
        if ok:
            break
    if not ok:
        return 1e25, grad

    # alpha = K^{-1} (ys - mean) via two triangular solves
    resid = ys - mean
    tmp = np.empty(n)
    for i in range(n):
        s = resid[i]
        for j in range(i):
            s -= lower[i, j] * tmp[j]
        tmp[i] = s / lower[i, i]
    alpha = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = tmp[i]
        for j in range(i + 1, n):
            s -= lower[j, i] * alpha[j]
        alpha[i] = s / lower[i, i]

    log_det = 0.0
    for i in range(n):
        log_det += math.log(lower[i, i])
    log_det *= 2.0
    quad = 0.0
    for i in range(n):
        quad += resid[i] * alpha[i]
    lml = -0.5 * quad - 0.5 * log_det - 0.5 * n * math.log(2.0 * math.pi)

    # K^{-1} = L^{-T} L^{-1}
    linv = np.zeros((n, n))
    for i in range(n):
        linv[i, i] = 1.0 / lower[i, i]
        for j in range(i):
            s = 0.0
            for k in range(j, i):
                s -= lower[i, k] * linv[k, j]
            linv[i, j] = s / lower[i, i]
    kinv = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for k in range(i, n):
                s += linv[k, i] * linv[k, j]
            kinv[i, j] = s
            kinv[j, i] = s

    # d lml / d mean
    gsum = 0.0
    for i in range(n):
        gsum += alpha[i]
    grad[0] = gsum

    # trace terms: 0.5 * sum((alpha alpha^T - K^{-1}) * dK)
    g_scale = 0.0
    for i in range(n):
        for j in range(n):
            omi = alpha[i] * alpha[j] - kinv[i, j]
            g_scale += omi * kmat[i, j]
    grad[1] = 0.5 * g_scale
    for c in range(d):
        g_ell = 0.0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                r = math.sqrt(r2[i, j])
                dz = (zn[i, c] - zn[j, c]) / ell[c]
                dk = (5.0 / 3.0) * scale * (1.0 + SQRT5 * r) * math.exp(-SQRT5 * r) * dz * dz
                g_ell += (alpha[i] * alpha[j] - kinv[i, j]) * dk
        grad[2 + c] = 0.5 * g_ell

    return -lml, -grad
