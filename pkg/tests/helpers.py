"""Shared test utilities."""

import numpy as np

from netbo.gp import posterior_batch
from netbo.network import KnownFunction


def mpmath_posterior_oracle(inputs, targets, hyper, query, jitter=0.0, dps=50):
    """Dense extended-precision GP posterior via explicit inverse."""
    import mpmath as mp

    mp.mp.dps = dps
    n, d = inputs.shape
    ell = [mp.mpf(v) for v in hyper.length_scales]
    s2 = mp.mpf(hyper.output_scale)
    m0 = mp.mpf(hyper.constant_mean)

    def kfun(a, b):
        r2 = mp.mpf(0)
        for c in range(d):
            t = (mp.mpf(a[c]) - mp.mpf(b[c])) / ell[c]
            r2 += t * t
        r = mp.sqrt(r2)
        return s2 * (1 + mp.sqrt(5) * r + mp.mpf(5) / 3 * r2) * mp.exp(-mp.sqrt(5) * r)

    kmat = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            kmat[i, j] = kfun(inputs[i], inputs[j])
        kmat[i, i] += mp.mpf(jitter)
    kinv = kmat**-1
    kvec = mp.matrix([kfun(query, inputs[i]) for i in range(n)])
    resid = mp.matrix([mp.mpf(t) - m0 for t in targets])
    mean = m0 + (kvec.T * (kinv * resid))[0]
    var = kfun(query, query) - (kvec.T * (kinv * kvec))[0]
    return float(mean), float(var)


def min_relative_path_sigma(model, x, z_mat):
    """Smallest node std (relative to its output scale) along the sample paths.

    Central differences are only trustworthy where every surrogate's posterior
    std is bounded away from zero: near interpolation points the std surface is
    cone-like and its curvature swamps any finite-difference step. Tests use
    this to sample 'smooth' probe points.
    """
    m = z_mat.shape[0]
    x = np.asarray(x, dtype=float)
    problem = model.problem
    h = np.empty((m, problem.node_count))
    worst = np.inf
    for k in range(problem.node_count):
        coords = list(problem.topology.input_coords[k])
        parents = list(problem.topology.parents[k])
        state = model.node_posteriors[k]
        z = np.hstack(
            [np.broadcast_to(x[coords], (m, len(coords))), h[:, parents]]
        )
        if isinstance(state, KnownFunction):
            h[:, k] = np.array([state.fn(row) for row in z])
            continue
        means, variances = posterior_batch(state, z)
        sigma = np.sqrt(np.maximum(variances, 0.0))
        worst = min(worst, float(np.min(sigma)) / np.sqrt(state.hyper.output_scale))
        h[:, k] = means + sigma * z_mat[:, k]
    return worst


def smooth_probe_points(model, z_mat, rng, count, min_sigma=1e-3, max_tries=400):
    """Feasible points whose sample paths keep every node std comfortably
    positive; raises if the landscape cannot supply enough."""
    from netbo.acquisition import feasible_uniform

    out = []
    for _ in range(max_tries):
        x = feasible_uniform(model.problem, rng, 1)[0]
        if min_relative_path_sigma(model, x, z_mat) >= min_sigma:
            out.append(x)
            if len(out) == count:
                return out
    raise AssertionError(f"could only find {len(out)} smooth probe points")
