"""Patch layout and masked-channel-modeling corruption.

A channel H (M x N complex) becomes P real patches of length L = 2MN/P: the
real part is flattened row-major (antenna-major) and cut into P/2 patches,
then the imaginary part likewise.  Patch ``i`` and patch ``i + P/2`` cover the
same entries and are always masked together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO, RANDOM, KEEP = 0, 1, 2
ACTION_NAMES = ("zero", "random", "keep")
DEFAULT_PROPORTIONS = (0.8, 0.1, 0.1)


@dataclass
class PatchSequence:
    patches: np.ndarray  # (P, L) real
    M: int
    N: int

    @property
    def P(self):
        return self.patches.shape[0]

    @property
    def L(self):
        return self.patches.shape[1]

    def copy(self):
        return PatchSequence(self.patches.copy(), self.M, self.N)


@dataclass
class MaskPlan:
    real_indices: np.ndarray   # selected real-part patch indices
    actions: np.ndarray        # ZERO / RANDOM / KEEP per selected index
    p_percent: float
    num_patches: int

    @property
    def imag_indices(self):
        return self.real_indices + self.num_patches // 2

    @property
    def indices(self):
        return np.concatenate([self.real_indices, self.imag_indices])

    def __len__(self):
        return len(self.real_indices)


def num_patches_for(M, N, patch_length):
    total = 2 * M * N
    if total % patch_length:
        raise ValueError(f"patch length {patch_length} does not divide 2*M*N = {total}")
    return total // patch_length


def to_patches(H, P):
    H = np.asarray(H)
    M, N = H.shape
    if P <= 0 or P % 2:
        raise ValueError(f"P must be a positive even number, got {P}")
    if (2 * M * N) % P:
        raise ValueError(f"P = {P} does not divide 2*M*N = {2 * M * N}")
    L = 2 * M * N // P
    flat = np.concatenate([H.real.reshape(-1), H.imag.reshape(-1)])
    return PatchSequence(flat.reshape(P, L).astype(np.float64), M, N)


def from_patches(seq):
    flat = seq.patches.reshape(-1)
    half = seq.M * seq.N
    return (flat[:half] + 1j * flat[half:]).reshape(seq.M, seq.N)


def to_patches_batch(H, P):
    """(B, M, N) complex -> (B, P, L) real, same layout as :func:`to_patches`."""
    H = np.asarray(H)
    B, M, N = H.shape
    if P <= 0 or P % 2 or (2 * M * N) % P:
        raise ValueError(f"P = {P} must be even and divide 2*M*N = {2 * M * N}")
    flat = np.concatenate([H.real.reshape(B, -1), H.imag.reshape(B, -1)], axis=1)
    return flat.reshape(B, P, 2 * M * N // P)


def apportion(count, proportions):
    """Largest-remainder split of ``count`` items; ties go to the earlier bucket."""
    quotas = [count * p / sum(proportions) for p in proportions]
    sizes = [math.floor(q + 1e-9) for q in quotas]
    rest = count - sum(sizes)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:rest]:
        sizes[i] += 1
    return sizes


def mask_count(p_percent, num_real):
    # round guards against e.g. 15 * 32 / 100 landing a hair above 4.8
    return math.ceil(round(p_percent * num_real / 100.0, 9))


def apply_mask(seq, p_percent, rng, proportions=DEFAULT_PROPORTIONS):
    """Mask ``ceil(p% of P/2)`` real patches and their imaginary counterparts.

    The selected set is split zero / random / keep by ``proportions`` using
    largest-remainder rounding; random patches are i.i.d. standard normal.
    """
    if not 0.0 <= p_percent <= 100.0:
        raise ValueError(f"p_percent must lie in [0, 100], got {p_percent}")
    half = seq.P // 2
    count = mask_count(p_percent, half)
    chosen = rng.choice(half, size=count, replace=False) if count else np.zeros(0, dtype=int)
    sizes = apportion(count, proportions)
    actions = np.repeat(np.array([ZERO, RANDOM, KEEP]), sizes)
    order = np.argsort(chosen, kind="stable")
    chosen, actions = chosen[order], actions[order]

    out = seq.patches.copy()
    for idx, act in zip(chosen, actions):
        for j in (idx, idx + half):
            if act == ZERO:
                out[j] = 0.0
            elif act == RANDOM:
                out[j] = rng.standard_normal(seq.L)
    plan = MaskPlan(chosen.astype(int), actions, float(p_percent), seq.P)
    return PatchSequence(out, seq.M, seq.N), plan
