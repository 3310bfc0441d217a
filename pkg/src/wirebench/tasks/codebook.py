"""DFT-style steering codebook for a uniform linear array and the beam oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import subcarrier_average


@dataclass(frozen=True)
class Codebook:
    angles: np.ndarray   # (K,) radians
    matrix: np.ndarray   # (K, M) complex, row k = w(phi_k)^H
    fov_deg: float

    @property
    def K(self):
        return len(self.angles)

    @property
    def M(self):
        return self.matrix.shape[1]


def steering_vector(M, angle, spacing, wavelength):
    m = np.arange(M)
    return np.exp(-2j * np.pi * spacing / wavelength * m * np.sin(angle)) / np.sqrt(M)


def build_codebook(M, K, fov_deg=120.0, spacing=0.5, wavelength=1.0):
    """K steering vectors on an even angle grid spanning ``fov_deg``.

    ``spacing`` and ``wavelength`` only matter through their ratio.
    """
    if K < 2:
        raise ValueError("a codebook needs K >= 2 beams (the angle step is fov/(K-1))")
    if not 0.0 < fov_deg <= 180.0:
        raise ValueError(f"fov must lie in (0, 180] degrees, got {fov_deg}")
    fov = np.deg2rad(fov_deg)
    angles = -fov / 2.0 + np.arange(K) * fov / (K - 1)
    W = np.stack([steering_vector(M, a, spacing, wavelength) for a in angles])
    return Codebook(angles=angles, matrix=W.conj(), fov_deg=float(fov_deg))


def beam_gains(cb, h):
    """|w(phi_k)^H h|^2 for every beam; ``h`` may be (M,) or (B, M)."""
    return np.abs(np.asarray(h) @ cb.matrix.T) ** 2


def beam_oracle(cb, h):
    """Index of the strongest beam; ties resolve to the smallest index."""
    return int(np.argmax(beam_gains(cb, h)))


def beam_labels(cb, H):
    """Beam labels for a batch of channels (B, M, N), from subcarrier averages."""
    return np.argmax(beam_gains(cb, subcarrier_average(H)), axis=-1)
