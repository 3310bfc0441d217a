"""Geometric blockage channel simulator for a ULA base station.

Users are dropped uniformly in a rectangular area containing the BS.  A user
is LoS when the open segment from the BS to the user crosses no blocker (an
axis-aligned rectangle).  Its OFDM channel is a sum of ``paths_per_user``
plane waves

    H[m, n] = sum_l a_l exp(-j 2 pi n df tau_l) exp(-j 2 pi (d / lambda) m sin(theta_l))

where LoS users get a direct path towards their true angle carrying
``rician_k_db`` more power than all scattered paths together.  Angles are
measured from array broadside (the +y axis); the array lies along x.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ScenarioConfig:
    num_antennas: int = 32
    num_subcarriers: int = 32
    wavelength: float = SPEED_OF_LIGHT / 28e9
    antenna_spacing: float | None = None  # defaults to wavelength / 2
    subcarrier_spacing: float = 120e3
    area: tuple = (120.0, 80.0)
    bs_position: tuple = (60.0, 1.0)
    num_blockers: int = 10
    blocker_size_range: tuple = (4.0, 14.0)
    paths_per_user: int = 8
    rician_k_db: float = 10.0
    angular_spread_deg: float = 10.0
    delay_spread_s: float = 100e-9
    min_user_distance: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.num_antennas < 1 or self.num_subcarriers < 1:
            raise ValueError("num_antennas and num_subcarriers must be >= 1")
        if self.paths_per_user < 1:
            raise ValueError("paths_per_user must be >= 1")
        if self.subcarrier_spacing <= 0 or self.wavelength <= 0:
            raise ValueError("subcarrier_spacing and wavelength must be positive")
        if self.spacing <= 0:
            raise ValueError("antenna_spacing must be positive")
        if self.num_blockers < 0:
            raise ValueError("num_blockers must be >= 0")
        w, h = self.area
        x, y = self.bs_position
        if not (0.0 < x < w and 0.0 < y < h):
            raise ValueError(f"bs_position {self.bs_position} is not strictly inside area {self.area}")
        lo, hi = self.blocker_size_range
        if not 0 < lo <= hi:
            raise ValueError("blocker_size_range must satisfy 0 < min <= max")

    @property
    def spacing(self):
        return self.wavelength / 2.0 if self.antenna_spacing is None else self.antenna_spacing


@dataclass(frozen=True)
class Blocker:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, pt):
        return self.xmin <= pt[0] <= self.xmax and self.ymin <= pt[1] <= self.ymax


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    blockers: tuple = field(default_factory=tuple)


@dataclass
class UserRecord:
    position: np.ndarray
    channel: np.ndarray
    los: int


def build_scenario(cfg, blockers=None, max_tries=10_000):
    """Sample ``cfg.num_blockers`` rectangles in the area, none covering the BS.

    Pass ``blockers`` to use a fixed layout instead (the BS check still applies).
    """
    if blockers is not None:
        blockers = tuple(b if isinstance(b, Blocker) else Blocker(*b) for b in blockers)
        for b in blockers:
            if b.contains(cfg.bs_position):
                raise ValueError(f"blocker {b} contains the BS position")
        return Scenario(cfg, blockers)

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB10C]))
    w, h = cfg.area
    lo, hi = cfg.blocker_size_range
    if hi > w or hi > h:
        if lo > min(w, h):
            raise ValueError(f"area {cfg.area} too small for blockers of size {cfg.blocker_size_range}")
        hi = min(hi, w, h)
    placed = []
    tries = 0
    while len(placed) < cfg.num_blockers:
        tries += 1
        if tries > max_tries:
            raise ValueError(f"area {cfg.area} too small to place {cfg.num_blockers} blockers "
                             f"clear of the BS after {max_tries} attempts")
        bw, bh = rng.uniform(lo, hi, size=2)
        x0 = rng.uniform(0.0, w - bw)
        y0 = rng.uniform(0.0, h - bh)
        b = Blocker(x0, y0, x0 + bw, y0 + bh)
        if b.contains(cfg.bs_position):
            continue
        placed.append(b)
    return Scenario(cfg, tuple(placed))


def segment_hits_rect(p0, p1, rect):
    """Liang-Barsky test: does the segment p0 -> p1 touch the closed rectangle?"""
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - rect.xmin), (dx, rect.xmax - x0),
                 (-dy, y0 - rect.ymin), (dy, rect.ymax - y0)):
        if p == 0.0:
            if q < 0.0:
                return False
            continue
        t = q / p
        if p < 0.0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return False
    return True


def is_los(scenario, position):
    bs = scenario.config.bs_position
    return int(not any(segment_hits_rect(bs, position, b) for b in scenario.blockers))


def sample_position(scenario, rng, max_tries=100_000):
    """Uniform position in the area, outside every blocker and the BS keep-out disc."""
    cfg = scenario.config
    w, h = cfg.area
    bs = np.asarray(cfg.bs_position)
    for _ in range(max_tries):
        pt = rng.uniform((0.0, 0.0), (w, h))
        if np.hypot(*(pt - bs)) < cfg.min_user_distance:
            continue
        if any(b.contains(pt) for b in scenario.blockers):
            continue
        return pt
    raise RuntimeError("could not place a user: blockers cover (almost) the whole area")


def user_angle(scenario, position):
    bs = scenario.config.bs_position
    return float(np.arctan2(position[0] - bs[0], position[1] - bs[1]))


def multipath_channel(cfg, gains, delays, angles):
    """Evaluate the plane-wave sum on the antenna x subcarrier grid."""
    m = np.arange(cfg.num_antennas)[:, None]
    n = np.arange(cfg.num_subcarriers)[:, None]
    spatial = np.exp(-2j * np.pi * (cfg.spacing / cfg.wavelength) * m * np.sin(angles)[None, :])
    freq = np.exp(-2j * np.pi * n * cfg.subcarrier_spacing * np.asarray(delays)[None, :])
    return (spatial * gains[None, :]) @ freq.T


def generate_user(scenario, rng, position=None):
    """Draw one user (position, LoS label, channel)."""
    cfg = scenario.config
    pos = sample_position(scenario, rng) if position is None else np.asarray(position, dtype=float)
    bs = np.asarray(cfg.bs_position)
    dist = float(np.hypot(*(pos - bs)))
    los = is_los(scenario, pos)
    theta = user_angle(scenario, pos)
    amp = cfg.wavelength / (4.0 * np.pi * max(dist, 1e-3))
    tau0 = dist / SPEED_OF_LIGHT

    L = cfg.paths_per_user
    n_scat = L - 1 if los else L
    w = rng.exponential(size=n_scat)
    scat_power = w / w.sum() if n_scat else w
    scat_gain = amp * np.sqrt(scat_power) * np.exp(2j * np.pi * rng.random(n_scat))
    spread = np.deg2rad(cfg.angular_spread_deg)
    scat_angle = np.clip(theta + spread * rng.standard_normal(n_scat), -np.pi / 2, np.pi / 2)
    scat_delay = tau0 + rng.exponential(cfg.delay_spread_s, size=n_scat)

    if los:
        k_lin = 10.0 ** (cfg.rician_k_db / 10.0)
        direct_amp = amp * np.sqrt(k_lin) if n_scat else amp
        direct = direct_amp * np.exp(-2j * np.pi * dist / cfg.wavelength)
        gains = np.concatenate([[direct], scat_gain])
        angles = np.concatenate([[theta], scat_angle])
        delays = np.concatenate([[tau0], scat_delay])
    else:
        gains, angles, delays = scat_gain, scat_angle, scat_delay
    H = multipath_channel(cfg, gains, delays, angles)
    return UserRecord(position=pos, channel=H, los=int(los))


def user_rng(seed, index):
    """Independent generator for user ``index``; safe to use from parallel workers."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def generate_users(scenario, count, seed=None):
    seed = scenario.config.seed if seed is None else seed
    return [generate_user(scenario, user_rng(seed, i)) for i in range(count)]


def add_awgn(H, snr_db, rng, ref_power=None, return_noise=False):
    """Add circular complex Gaussian noise at ``snr_db`` relative to ``ref_power``.

    ``ref_power`` defaults to the mean squared magnitude of ``H`` (over the
    whole array, so a batch shares one noise level).  ``snr_db = inf`` returns
    ``H`` unchanged.
    """
    H = np.asarray(H)
    if np.isposinf(snr_db):
        noise = np.zeros_like(H)
        return (H.copy(), noise) if return_noise else H.copy()
    if ref_power is None:
        ref_power = float(np.mean(np.abs(H) ** 2))
    var = ref_power * 10.0 ** (-snr_db / 10.0)
    shape = H.shape
    noise = np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    noise = noise.astype(np.result_type(H.dtype, np.complex64), copy=False)
    out = H + noise
    return (out, noise) if return_noise else out


def subcarrier_average(H):
    """Average over the trailing subcarrier axis: (..., M, N) -> (..., M)."""
    return np.asarray(H).mean(axis=-1)


def _check_nonzero(v, name):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError(f"{name} is the zero vector")
    return n


def spatial_correlation(a, b):
    """|a^H b| / (||a|| ||b||)."""
    na = _check_nonzero(a, "first vector")
    nb = _check_nonzero(b, "second vector")
    return float(min(1.0, abs(np.vdot(a, b)) / (na * nb)))


def gain_ratio(a, b):
    """Ratio of the larger to the smaller squared norm (>= 1)."""
    ga = _check_nonzero(a, "first vector") ** 2
    gb = _check_nonzero(b, "second vector") ** 2
    return float(max(ga, gb) / min(ga, gb))
