"""Shared oracles for the test suite."""
import itertools

import numpy as np


def random_global_poly(degree, rng):
    """Random vector polynomial of total degree <= degree with analytic curl."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=3) if sum(e) <= degree]
    coef = rng.standard_normal((3, len(exps)))
    exps = np.array(exps)

    def mono(x, ex):
        x = np.asarray(x)
        return np.prod(x[..., None, :] ** ex, axis=-1)  # (..., nm)

    def dmono(x, ex, d):
        e2 = ex.copy()
        fac = e2[:, d].astype(float)
        e2[:, d] = np.maximum(e2[:, d] - 1, 0)
        return mono(x, e2) * fac

    def phi(x):
        return mono(x, exps) @ coef.T

    def grad(x):
        # (..., c, d) = d phi_c / d x_d
        return np.stack([dmono(x, exps, d) @ coef.T for d in range(3)], axis=-1)

    def curl(x):
        g = grad(x)
        return np.stack([g[..., 2, 1] - g[..., 1, 2], g[..., 0, 2] - g[..., 2, 0],
                         g[..., 1, 0] - g[..., 0, 1]], axis=-1)

    return phi, curl


def inner(quad, a, b):
    return float(np.einsum("nq,nqc,nqc->", quad.weights, a, b))


def norm(quad, a):
    return np.sqrt(inner(quad, a, a))
