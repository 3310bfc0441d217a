"""MU-MIMO power allocation instances, greedy user grouping and sum-rate scoring."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import classical
from ..channel import gain_ratio, spatial_correlation, subcarrier_average

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerInstance:
    """K users served with MRT precoders under a total power budget."""

    channels: np.ndarray     # (K, M) subcarrier-averaged user channels
    precoders: np.ndarray    # (K, M) unit-norm MRT directions
    gains: np.ndarray        # (K, K), gains[i, j] = |h_i^H w_j|^2
    noise_power: float
    p_total: float
    users: tuple = ()        # dataset indices of the members

    @property
    def K(self):
        return self.gains.shape[0]

    def with_noise(self, noise_power):
        return PowerInstance(self.channels, self.precoders, self.gains, float(noise_power),
                             self.p_total, self.users)


def make_instance(channels, noise_power, p_total=1.0, users=()):
    h = np.asarray(channels, dtype=complex)
    if noise_power <= 0 or p_total <= 0:
        raise ValueError("noise_power and p_total must be positive")
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("MRT needs nonzero user channels")
    w = h / norms
    gains = np.abs(h.conj() @ w.T) ** 2
    return PowerInstance(h, w, gains, float(noise_power), float(p_total), tuple(int(u) for u in users))


def noise_for_snr(snr_db, ref_gain, p_total=1.0):
    """Noise power giving ``snr_db`` for a user of gain ``ref_gain`` at full budget."""
    return p_total * ref_gain * 10.0 ** (-snr_db / 10.0)


class GroupingError(RuntimeError):
    pass


def _compatible(cand, members, h, rho_min, rho_max, gamma_max):
    for m in members:
        rho = spatial_correlation(h[cand], h[m])
        if not rho_min <= rho <= rho_max:
            return False, "correlation"
        if not gain_ratio(h[cand], h[m]) < gamma_max:
            return False, "gain"
    return True, ""


def group_users(spatial, K, rho_min, rho_max, gamma_max, rng, num_groups=1,
                noise_power=1.0, p_total=1.0, pool=None, max_scans=20, max_attempts=200):
    """Greedy sampler of K-user groups satisfying pairwise constraints.

    Starting from a random seed user, a shuffled candidate pool is scanned and
    the first user compatible with every current member (correlation in
    ``[rho_min, rho_max]`` and gain ratio below ``gamma_max``) joins.  After
    ``max_scans`` passes that add nobody the group is abandoned and reseeded.

    ``spatial`` is (U, M) subcarrier-averaged channels or (U, M, N) full ones;
    ``pool`` restricts the sampler to a subset of indices.
    """
    h = np.asarray(spatial)
    if h.ndim == 3:
        h = subcarrier_average(h)
    if not 0.0 <= rho_min < rho_max <= 1.0:
        raise ValueError("need 0 <= rho_min < rho_max <= 1")
    if gamma_max < 1.0:
        raise ValueError("gamma_max must be >= 1")
    pool = np.arange(len(h)) if pool is None else np.asarray(pool)
    if len(pool) < K:
        raise GroupingError(f"pool of {len(pool)} users cannot form groups of {K}")

    groups = []
    stats = {"attempts": 0, "rejected_correlation": 0, "rejected_gain": 0, "accepted": 0}
    while len(groups) < num_groups:
        if stats["attempts"] >= max_attempts * num_groups:
            raise GroupingError(
                f"formed {len(groups)}/{num_groups} groups in {stats['attempts']} attempts; "
                f"accepted {stats['accepted']} candidates, rejected "
                f"{stats['rejected_correlation']} on correlation and "
                f"{stats['rejected_gain']} on gain ratio")
        stats["attempts"] += 1
        members = [int(rng.choice(pool))]
        idle = 0
        while len(members) < K and idle < max_scans:
            added = False
            for cand in rng.permutation(pool):
                if cand in members:
                    continue
                ok, why = _compatible(cand, members, h, rho_min, rho_max, gamma_max)
                if ok:
                    members.append(int(cand))
                    stats["accepted"] += 1
                    added = True
                    break
                stats["rejected_" + why] += 1
            if not added:
                idle += 1
        if len(members) == K:
            groups.append(make_instance(h[members], noise_power, p_total, members))
    return groups


def evaluate_se(p, inst, tol=1e-9):
    """Sum spectral efficiency (bits/s/Hz) of a feasible allocation."""
    p = np.asarray(p, dtype=float)
    if p.shape != (inst.K,):
        raise ValueError(f"allocation of shape {p.shape} for {inst.K} users")
    if np.any(p < -tol * inst.p_total) or p.sum() > inst.p_total * (1.0 + tol):
        raise ValueError(f"allocation {p} violates p >= 0, sum(p) <= {inst.p_total}")
    return classical.sum_rate(inst.gains, np.clip(p, 0.0, None), inst.noise_power)
