"""Normalized user datasets and the WBDS file format.

WBDS layout (little-endian)::

    b"WBDS"  u16 version  u32 M  u32 N  u32 count  f64 alpha
    per record:  2 x f64 position, u8 los, M*N interleaved (re, im) f32, antenna-major
    3 x (u32 length, u32 * length)  train / val / test indices

Stored channels are the normalized ones (raw channel = stored / alpha).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .channel import UserRecord, build_scenario, generate_users

MAGIC = b"WBDS"
VERSION = 1
SPLIT_FRACTIONS = (0.6, 0.2, 0.2)


@dataclass
class Dataset:
    channels: np.ndarray          # (U, M, N) complex, normalized
    positions: np.ndarray         # (U, 2)
    los: np.ndarray               # (U,) uint8
    alpha: float
    split: dict = field(default_factory=dict)  # "train" / "val" / "test" -> index arrays

    def __len__(self):
        return len(self.channels)

    @property
    def shape(self):
        return self.channels.shape[1:]

    def records(self):
        return [UserRecord(self.positions[i], self.channels[i], int(self.los[i]))
                for i in range(len(self))]

    def subset(self, name):
        idx = self.split[name]
        return self.channels[idx], self.los[idx]


def split_indices(n, seed, fractions=SPLIT_FRACTIONS):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5917]))
    perm = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return {"train": np.sort(perm[:n_train]),
            "val": np.sort(perm[n_train:n_train + n_val]),
            "test": np.sort(perm[n_train + n_val:])}


def normalize_dataset(records, seed=0):
    """Scale channels to unit mean-square entry and assign a 60/20/20 split."""
    if not records:
        raise ValueError("cannot normalize an empty record list")
    H = np.stack([np.asarray(r.channel) for r in records]).astype(np.complex128)
    power = float(np.mean(np.abs(H) ** 2))
    if power == 0.0:
        raise ValueError("all channels are zero; normalization factor undefined")
    alpha = 1.0 / np.sqrt(power)
    return Dataset(
        channels=H * alpha,
        positions=np.stack([np.asarray(r.position, dtype=float) for r in records]),
        los=np.array([r.los for r in records], dtype=np.uint8),
        alpha=float(alpha),
        split=split_indices(len(records), seed),
    )


def generate_dataset(cfg, num_users, scenario=None):
    """Scenario + users + normalization in one go (deterministic in ``cfg.seed``)."""
    scenario = scenario or build_scenario(cfg)
    return normalize_dataset(generate_users(scenario, num_users, cfg.seed), seed=cfg.seed)


def save_dataset(path, ds):
    U, M, N = ds.channels.shape
    rec = np.dtype([("pos", "<f8", (2,)), ("los", "u1"), ("h", "<f4", (M * N * 2,))])
    arr = np.empty(U, dtype=rec)
    arr["pos"] = ds.positions
    arr["los"] = ds.los
    flat = ds.channels.reshape(U, M * N)
    inter = np.empty((U, M * N * 2), dtype="<f4")
    inter[:, 0::2] = flat.real
    inter[:, 1::2] = flat.imag
    arr["h"] = inter
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HIIId", VERSION, M, N, U, ds.alpha))
        fh.write(arr.tobytes())
        for name in ("train", "val", "test"):
            idx = np.asarray(ds.split.get(name, []), dtype="<u4")
            fh.write(struct.pack("<I", len(idx)))
            fh.write(idx.tobytes())


def load_dataset(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a WBDS dataset file")
    version, M, N, U, alpha = struct.unpack_from("<HIIId", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported WBDS version {version}")
    off = 4 + struct.calcsize("<HIIId")
    rec = np.dtype([("pos", "<f8", (2,)), ("los", "u1"), ("h", "<f4", (M * N * 2,))])
    arr = np.frombuffer(data, dtype=rec, count=U, offset=off)
    off += rec.itemsize * U
    inter = arr["h"].astype(np.float64)
    channels = (inter[:, 0::2] + 1j * inter[:, 1::2]).reshape(U, M, N)
    split = {}
    for name in ("train", "val", "test"):
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        split[name] = np.frombuffer(data, dtype="<u4", count=n, offset=off).astype(np.int64)
        off += 4 * n
    return Dataset(channels=channels, positions=arr["pos"].copy(), los=arr["los"].copy(),
                   alpha=float(alpha), split=split)
