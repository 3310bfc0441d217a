"""Independent brute-force references used by the optimizer tests."""
import numpy as np

from wirebench.classical import sum_rate
from wirebench.tasks.power import make_instance, noise_for_snr


def grid_projection(v, p_total, coarse=0.02, fine=5e-4, radius=0.03):
    """Nearest feasible point to a 3-vector by exhaustive grid search.

    A coarse sweep of the whole capped simplex is followed by a fine sweep
    around the coarse winner; the objective is strongly convex, so the fine
    box always contains the true minimizer.
    """
    v = np.asarray(v, dtype=float)

    def best(axes):
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        g = g[(g >= 0).all(axis=1) & (g.sum(axis=1) <= p_total + 1e-12)]
        return g[np.argmin(((g - v) ** 2).sum(axis=1))]

    c = best([np.arange(0.0, p_total + coarse / 2, coarse)] * 3)
    axes = [np.clip(np.arange(x - radius, x + radius + fine / 2, fine), 0.0, p_total) for x in c]
    return best(axes)


def k2_grid_max(inst, points=2001):
    """Best sum rate over the full-budget face for two users.

    Scaling any allocation up raises every SINR, so the optimum lies on
    ``p1 + p2 = P``.
    """
    p1 = np.linspace(0.0, inst.p_total, points)
    return max(sum_rate(inst.gains, np.array([a, inst.p_total - a]), inst.noise_power) for a in p1)


def random_instance(rng, K=2, M=8, snr_db=None, p_total=1.0):
    h = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2)
    h *= rng.uniform(0.3, 3.0, size=(K, 1))
    snr = rng.uniform(-5.0, 20.0) if snr_db is None else snr_db
    ref = float(np.mean(np.sum(np.abs(h) ** 2, axis=1)))
    return make_instance(h, noise_for_snr(snr, ref, p_total), p_total)


def fd_gradient(f, p, h=1e-6):
    g = np.zeros_like(p)
    for k in range(len(p)):
        e = np.zeros_like(p)
        e[k] = h
        g[k] = (f(p + e) - f(p - e)) / (2 * h)
    return g
