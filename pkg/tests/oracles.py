"""Independent reference implementations used only by the tests.

They follow the textbook formulas directly (explicit loops, dense matrix
inverses, sampling) and share no code with the package.
"""

import math

import numpy as np


def se_kernel(a, b, signal_variance, length_scales):
    r = (np.asarray(a, float) - np.asarray(b, float)) / np.asarray(length_scales, float)
    return signal_variance * math.exp(-0.5 * float(np.dot(r, r)))


def gram(A, B, signal_variance, length_scales):
    return np.array([[se_kernel(a, b, signal_variance, length_scales) for b in B] for a in A])


def dense_posterior(X, y, mu0, signal_variance, length_scales, jitter, Xq):
    """Posterior mean and variance with an explicit matrix inverse."""
    K = gram(X, X, signal_variance, length_scales) + jitter * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    Ks = gram(Xq, X, signal_variance, length_scales)
    mean = mu0 + Ks @ Kinv @ (np.asarray(y) - mu0)
    var = np.array([signal_variance - Ks[i] @ Kinv @ Ks[i] for i in range(len(Xq))])
    return mean, var


def dense_log_marginal(X, y, mu0, signal_variance, length_scales, jitter):
    K = gram(X, X, signal_variance, length_scales) + jitter * np.eye(len(X))
    r = np.asarray(y) - mu0
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return -0.5 * r @ np.linalg.inv(K) @ r - 0.5 * logdet - 0.5 * len(y) * math.log(2 * math.pi)


def mc_expected_improvement(mu, sigma, f_plus, n, seed):
    """Plain sample mean of (X - f_plus)^+ with X ~ N(mu, sigma^2)."""
    rng = np.random.default_rng(seed)
    gains = np.maximum(mu + sigma * rng.standard_normal(n) - f_plus, 0.0)
    return gains.mean(), gains.std(ddof=1) / math.sqrt(n)


def ei_scalar(mu, sigma, f_plus):
    """Closed form written from scratch with math.erf."""
    if sigma == 0:
        return max(mu - f_plus, 0.0)
    z = (mu - f_plus) / sigma
    cdf = 0.5 * (1 + math.erf(z / math.sqrt(2)))
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return (mu - f_plus) * cdf + sigma * pdf


def hand_trace(arch):
    """Shapes, params and FLOPs from a separate loop over the layer list."""
    shape = arch.input_shape
    outs, params, flops = [], [], []
    for i, L in enumerate(arch.layers):
        h = L.hp
        if L.kind == "conv":
            H, W, C = shape
            Ho, Wo = -(-H // h.get("stride", 1)), -(-W // h.get("stride", 1))
            k, n = h["filter_size"], h["n_filters"]
            params.append(k * k * C * n + n)
            flops.append(2 * k * k * C * n * Ho * Wo)
            shape = (Ho, Wo, n)
        elif L.kind in ("maxpool", "avgpool"):
            H, W, C = shape
            Ho, Wo = -(-H // h.get("stride", 1)), -(-W // h.get("stride", 1))
            params.append(0)
            flops.append(h["window"] ** 2 * Ho * Wo * C)
            shape = (Ho, Wo, C)
        elif L.kind in ("dense", "output"):
            params.append(shape[0] * h["n_neurons"] + h["n_neurons"])
            flops.append(2 * shape[0] * h["n_neurons"])
            shape = (h["n_neurons"],)
        elif L.kind == "global_avgpool":
            params.append(0)
            flops.append(shape[0] * shape[1] * shape[2])
            shape = (shape[2],)
        elif L.kind == "flatten":
            params.append(0)
            flops.append(0)
            shape = (shape[0] * shape[1] * shape[2],)
        elif L.kind == "upsample":
            params.append(0)
            flops.append(0)
            shape = (shape[0] * h["factor"], shape[1] * h["factor"], shape[2])
        else:
            params.append(0)
            flops.append(0)
        for e in arch.skip_edges:
            if e.dst == i and e.merge == "concat":
                shape = (*shape[:2], shape[2] + outs[e.src][2])
        outs.append(shape)
    return outs, params, flops
