"""Classical power-allocation baselines and the sum-rate oracle.

Gain matrices follow the convention ``gains[i, j] = |h_i^H w_j|^2``: row ``i``
is the receiving user, column ``j`` the precoder whose power leaks into it.
Functions here take any object exposing ``gains``, ``noise_power`` and
``p_total`` (see :class:`wirebench.tasks.power.PowerInstance`).
"""
from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


def sinr_vector(gains, p, noise_power):
    """SINR of every user, batched over any leading axes.

    Works on numpy arrays and on autodiff tensors for ``p`` alike, which is
    how the ``neg_se`` training loss shares this formula.
    """
    diag = np.diagonal(gains, axis1=-2, axis2=-1)
    k = p.shape[-1]
    signal = p * diag
    received = (gains * p.reshape(tuple(p.shape[:-1]) + (1, k))).sum(axis=-1)
    interference = received - signal
    return signal / (interference + noise_power)


def sinr(inst, p, k):
    """SINR of user ``k`` under allocation ``p``."""
    return float(sinr_vector(inst.gains, np.asarray(p, dtype=float), inst.noise_power)[k])


def sum_rate(gains, p, noise_power):
    """Sum of ``log2(1 + SINR_k)`` (no feasibility check)."""
    return float(np.log2(1.0 + sinr_vector(gains, np.asarray(p, dtype=float), noise_power)).sum())


def se_gradient(gains, p, noise_power):
    """Analytic gradient of the sum rate with respect to the power vector."""
    p = np.asarray(p, dtype=float)
    diag = np.diag(gains)
    interf = gains @ p - diag * p
    base = interf + noise_power
    total = base + diag * p
    own = diag / total
    # cross[i] = g_ii p_i / (base_i * total_i); d/dp_k picks up -sum_{i != k} g_ik cross[i]
    cross = diag * p / (base * total)
    leak = gains.T @ cross - diag * cross
    return (own - leak) / LN2


def epa(K, p_total):
    """Equal power allocation."""
    if K < 1:
        raise ValueError("need at least one user")
    return np.full(K, p_total / K)


def project_capped_simplex(v, p_total):
    """Euclidean projection onto ``{p >= 0, sum(p) <= p_total}``."""
    v = np.asarray(v, dtype=float)
    clamped = np.maximum(v, 0.0)
    if clamped.sum() <= p_total:
        return clamped
    # projection onto the face sum(p) = p_total via the sorted threshold
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - p_total
    idx = np.arange(1, len(u) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


@dataclass(frozen=True)
class PgdConfig:
    """Solver settings; ``step`` is scaled by ``p_total / K`` when left as ``None``."""

    iterations: int = 200
    restarts: int = 5
    step: float | None = None
    decay: float = 0.995
    tol: float = 1e-10
    reject_factor: float = 0.5

    def __post_init__(self):
        if self.iterations < 1 or self.restarts < 1:
            raise ValueError("iterations and restarts must be >= 1")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")


def random_feasible(K, p_total, rng):
    """Uniform sample from the capped simplex (slack coordinate dropped)."""
    e = rng.exponential(size=K + 1)
    return p_total * e[:K] / e.sum()


def _ascent(gains, noise, p_total, p0, cfg, eta0):
    p = project_capped_simplex(p0, p_total)
    se = sum_rate(gains, p, noise)
    eta = eta0
    for _ in range(cfg.iterations):
        cand = project_capped_simplex(p + eta * se_gradient(gains, p, noise), p_total)
        cand_se = sum_rate(gains, cand, noise)
        if cand_se < se:
            eta *= cfg.reject_factor
            continue
        gain = cand_se - se
        p, se = cand, cand_se
        eta *= cfg.decay
        if gain < cfg.tol:
            break
    return p, se


def pgd_sum_rate(inst, cfg=None, rng=None):
    """Multi-restart projected gradient ascent on the sum rate.

    Restart 0 starts from equal power allocation, so the returned rate is
    never below the EPA rate.  A step that lowers the rate is rejected and the
    step size shrunk by ``cfg.reject_factor``.

    Returns
    -------
    (p, se) : ndarray, float
    """
    cfg = cfg or PgdConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    gains = np.asarray(inst.gains, dtype=float)
    K = gains.shape[0]
    p_total = float(inst.p_total)
    noise = float(inst.noise_power)
    eta0 = cfg.step if cfg.step is not None else 0.5 * p_total / K
    best_p, best_se = None, -np.inf
    for r in range(cfg.restarts):
        p0 = epa(K, p_total) if r == 0 else random_feasible(K, p_total, rng)
        p, se = _ascent(gains, noise, p_total, p0, cfg, eta0)
        if se > best_se:
            best_p, best_se = p, se
    return best_p, best_se


# ----------------------------------------------------------------- label cache
def instance_key(inst, cfg=None):
    """SHA-256 over the instance data (and solver settings, if given)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(inst.gains, dtype="<f8").tobytes())
    h.update(struct.pack("<dd", float(inst.noise_power), float(inst.p_total)))
    if cfg is not None:
        h.update(repr(cfg).encode("utf-8"))
    return h.digest()


class LabelCache:
    """Persistent map from instance hash to ``(p*, se*)``.

    File layout (little-endian): ``b"WBLC"``, u16 version, u32 count, then per
    entry a 32-byte key, u32 K, K f64 powers and one f64 sum rate.
    """

    MAGIC = b"WBLC"
    VERSION = 1

    def __init__(self, path=None):
        self.path = path
        self.entries = {}
        if path is not None:
            try:
                self._load(path)
            except FileNotFoundError:
                pass

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def get(self, key):
        return self.entries.get(key)

    def put(self, key, p, se):
        self.entries[key] = (np.asarray(p, dtype=float).copy(), float(se))

    def solve(self, inst, cfg=None, rng=None):
        """Cached :func:`pgd_sum_rate`."""
        cfg = cfg or PgdConfig()
        key = instance_key(inst, cfg)
        hit = self.entries.get(key)
        if hit is None:
            hit = pgd_sum_rate(inst, cfg, rng)
            self.put(key, *hit)
        return hit

    def _load(self, path):
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != self.MAGIC:
            raise ValueError(f"{path}: not a label cache file")
        version, count = struct.unpack_from("<HI", data, 4)
        if version != self.VERSION:
            raise ValueError(f"{path}: unsupported label cache version {version}")
        off = 10
        for _ in range(count):
            key = data[off:off + 32]
            (K,) = struct.unpack_from("<I", data, off + 32)
            off += 36
            p = np.frombuffer(data, dtype="<f8", count=K, offset=off).copy()
            off += 8 * K
            (se,) = struct.unpack_from("<d", data, off)
            off += 8
            self.entries[key] = (p, se)

    def save(self, path=None):
        path = path or self.path
        if path is None:
            raise ValueError("no path given for the label cache")
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<HI", self.VERSION, len(self.entries)))
            for key in sorted(self.entries):
                p, se = self.entries[key]
                fh.write(key)
                fh.write(struct.pack("<I", len(p)))
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
                fh.write(struct.pack("<d", se))
