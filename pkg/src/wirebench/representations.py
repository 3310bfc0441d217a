"""Feature extractors compared by the benchmark.

* ``raw``         real and imaginary parts flattened, length 2MN
* ``ae_latent``   encoder output of a denoising convolutional autoencoder,
                  length MN/32 or MN/16
* ``patch_embed`` frozen random linear map of each length-L patch to 128
                  dimensions plus a mean "summary" token, flattened token-major
                  to (P + 1) * 128.  This is a geometry-matched stand-in for a
                  pretrained transformer; it carries no learned structure.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .channel import add_awgn
from .nn import Adam, Network
from .nn import spec as S
from .nn.checkpoint import load_network, save_network
from .nn.losses import mse
from .patching import num_patches_for, to_patches_batch

log = logging.getLogger(__name__)

EMBED_DIM = 128


class TrainingDiverged(RuntimeError):
    pass


def to_two_channel(H):
    """(B, M, N) complex -> (B, 2, M, N) real."""
    H = np.asarray(H)
    return np.stack([H.real, H.imag], axis=1)


def from_two_channel(X):
    X = np.asarray(X)
    return X[:, 0] + 1j * X[:, 1]


# ----------------------------------------------------------------- autoencoder
@dataclass
class AEConfig:
    ratio: int = 32
    channels: tuple = (16, 32)
    snr_range_db: tuple = (0.0, 20.0)
    epochs: int = 12
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0

    def latent_dim(self, M, N):
        if (M * N) % self.ratio:
            raise ValueError(f"M*N = {M * N} is not divisible by the compression ratio {self.ratio}")
        return M * N // self.ratio


def encoder_specs(M, N, latent_dim, channels=(16, 32)):
    if M % 4 or N % 4:
        raise ValueError(f"encoder needs M and N divisible by 4, got {M}x{N}")
    c1, c2 = channels
    return [
        S.batchnorm2d(2),
        S.conv2d(2, c1), S.batchnorm2d(c1), S.relu(),
        S.conv2d(c1, c2), S.batchnorm2d(c2), S.relu(), S.maxpool2x2(),
        S.conv2d(c2, c2), S.batchnorm2d(c2), S.relu(), S.maxpool2x2(),
        S.flatten(),
        S.dense(c2 * M * N // 16, latent_dim),
    ]


def decoder_specs(M, N, latent_dim, channels=(16, 32)):
    c1, c2 = channels
    return [
        S.dense(latent_dim, c2 * M * N // 16),
        S.reshape(c2, M // 4, N // 4),
        S.upsample2x(), S.conv2d(c2, c2), S.batchnorm2d(c2), S.relu(),
        S.upsample2x(), S.conv2d(c2, c1), S.batchnorm2d(c1), S.relu(),
        S.conv2d(c1, 2),
    ]


@dataclass
class Autoencoder:
    encoder: Network
    decoder: Network
    ratio: int

    @classmethod
    def create(cls, M, N, cfg=None, dtype=np.float32):
        cfg = cfg or AEConfig()
        d = cfg.latent_dim(M, N)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xAE]))
        enc = Network(encoder_specs(M, N, d, cfg.channels), (2, M, N), rng, dtype)
        dec = Network(decoder_specs(M, N, d, cfg.channels), (d,), rng, dtype)
        return cls(enc, dec, cfg.ratio)

    @property
    def latent_dim(self):
        return self.encoder.output_shape[0]

    def encode(self, H, batch_size=256):
        """Eval-mode latent vectors for a batch of complex channels."""
        H = np.asarray(H)
        if H.ndim == 2:
            return self.encode(H[None], batch_size)[0]
        if H.shape[1:] != self.encoder.input_shape[1:]:
            raise ValueError(f"encoder expects {self.encoder.input_shape[1:]} channels, got {H.shape[1:]}")
        return self.encoder.predict(to_two_channel(H), batch_size)

    def decode(self, z, batch_size=256):
        z = np.asarray(z)
        if z.ndim == 1:
            return self.decode(z[None], batch_size)[0]
        if z.shape[1] != self.latent_dim:
            raise ValueError(f"decoder expects latent size {self.latent_dim}, got {z.shape[1]}")
        return from_two_channel(self.decoder.predict(z, batch_size))

    def reconstruct(self, H):
        return self.decode(self.encode(H))

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def save(self, path):
        """Two WBNN files: ``path`` (encoder) and ``path + '.dec'`` (decoder)."""
        save_network(path, self.encoder, {"role": "encoder", "ratio": self.ratio})
        save_network(str(path) + ".dec", self.decoder, {"role": "decoder", "ratio": self.ratio})

    @classmethod
    def load(cls, path, dtype=np.float32):
        enc, meta = load_network(path, dtype)
        dec, _ = load_network(str(path) + ".dec", dtype)
        return cls(enc, dec, int(meta.get("ratio", 32)))


def nmse(H_hat, H):
    """Mean over samples of ||H_hat - H||^2 / ||H||^2."""
    H_hat, H = np.asarray(H_hat), np.asarray(H)
    axes = tuple(range(1, H.ndim))
    return float(np.mean(np.sum(np.abs(H_hat - H) ** 2, axis=axes) / np.sum(np.abs(H) ** 2, axis=axes)))


@dataclass
class AETrainResult:
    model: Autoencoder
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)


def _corrupt(H, rng, snr_range):
    snr = rng.uniform(*snr_range, size=len(H))
    return np.stack([add_awgn(h, s, rng, ref_power=1.0) for h, s in zip(H, snr)])


def train_denoising_ae(train_channels, val_channels, cfg=None, log_every=1):
    """Train a denoising autoencoder on normalized channels.

    Each batch is corrupted per sample at an SNR drawn uniformly from
    ``cfg.snr_range_db`` (reference power 1, the normalized dataset mean) and
    the reconstruction is scored against the clean channel.
    """
    cfg = cfg or AEConfig()
    train_channels = np.asarray(train_channels)
    val_channels = np.asarray(val_channels)
    _, M, N = train_channels.shape
    ae = Autoencoder.create(M, N, cfg)
    params = ae.parameters()
    opt = Adam(params, lr=cfg.lr)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A1]))
    val_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A2]))
    val_noisy = _corrupt(val_channels, val_rng, cfg.snr_range_db)
    result = AETrainResult(ae)
    dtype = ae.encoder.dtype
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_channels))
        total, seen = 0.0, 0
        ae.encoder.train()
        ae.decoder.train()
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            clean = train_channels[idx]
            noisy = _corrupt(clean, rng, cfg.snr_range_db)
            z = ae.encoder.forward(to_two_channel(noisy).astype(dtype), mode="train")
            out = ae.decoder.forward(z, mode="train")
            loss = mse(out, to_two_channel(clean).astype(dtype))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(f"autoencoder loss became {value} at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
            seen += len(idx)
        ae.encoder.eval()
        ae.decoder.eval()
        val = float(np.mean(np.sum(np.abs(ae.reconstruct(val_noisy) - val_channels) ** 2, axis=(1, 2))))
        result.train_loss.append(total / max(seen, 1))
        result.val_loss.append(val)
        if log_every and epoch % log_every == 0:
            log.info("ae-1/%d epoch %d train %.4f val %.4f (%.1fs)", cfg.ratio, epoch,
                     result.train_loss[-1], val, time.perf_counter() - t0)
    return result


# ------------------------------------------------------------------- embedders
class Embedder:
    kind = ""
    feature_dim = 0

    def embed(self, H):
        return self.embed_batch(np.asarray(H)[None])[0]

    def embed_batch(self, H):
        raise NotImplementedError

    def count(self):
        """``(param_count, flop_count)`` for embedding one sample."""
        return 0, 0

    def manifest(self):
        return {"kind": self.kind, "feature_dim": self.feature_dim}

    @property
    def name(self):
        return self.kind


class RawEmbedder(Embedder):
    kind = "raw"

    def __init__(self, M, N):
        self.M, self.N = M, N
        self.feature_dim = 2 * M * N

    def embed_batch(self, H):
        H = np.asarray(H)
        B = len(H)
        return np.concatenate([H.real.reshape(B, -1), H.imag.reshape(B, -1)], axis=1)

    def invert(self, x):
        x = np.asarray(x)
        half = self.M * self.N
        return (x[..., :half] + 1j * x[..., half:]).reshape(x.shape[:-1] + (self.M, self.N))

    def manifest(self):
        return {**super().manifest(), "M": self.M, "N": self.N}


class AELatentEmbedder(Embedder):
    kind = "ae_latent"

    def __init__(self, autoencoder, path=None):
        self.ae = autoencoder
        self.ratio = autoencoder.ratio
        self.feature_dim = autoencoder.latent_dim
        self.path = path

    @property
    def name(self):
        return f"ae{self.ratio}"

    def embed_batch(self, H):
        return self.ae.encode(np.asarray(H)).astype(np.float64)

    def count(self):
        return self.ae.encoder.count()

    def manifest(self):
        return {**super().manifest(), "ratio": self.ratio, "checkpoint": self.path}


class PatchEmbedder(Embedder):
    kind = "patch_embed"

    def __init__(self, M, N, patch_length=32, dim=EMBED_DIM, seed=0):
        self.M, self.N = M, N
        self.P = num_patches_for(M, N, patch_length)
        self.L = patch_length
        self.dim = dim
        self.seed = seed
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9A7C]))
        self.weight = rng.standard_normal((patch_length, dim)) / np.sqrt(patch_length)
        self.feature_dim = (self.P + 1) * dim

    def tokens(self, H):
        """(B, P + 1, dim) token matrix, summary token first."""
        patches = to_patches_batch(np.asarray(H), self.P)
        emb = patches @ self.weight
        summary = emb.mean(axis=1, keepdims=True)
        return np.concatenate([summary, emb], axis=1)

    def embed_batch(self, H):
        t = self.tokens(H)
        return t.reshape(len(t), -1)

    def count(self):
        return self.L * self.dim, 2 * self.L * self.dim * self.P + self.dim * self.P

    def manifest(self):
        return {**super().manifest(), "M": self.M, "N": self.N, "patch_length": self.L,
                "dim": self.dim, "seed": self.seed}


def save_manifest(path, embedder):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(embedder.manifest(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path):
    with open(path, encoding="utf-8") as fh:
        m = json.load(fh)
    return embedder_from_manifest(m)


def embedder_from_manifest(m):
    kind = m["kind"]
    if kind == "raw":
        return RawEmbedder(m["M"], m["N"])
    if kind == "patch_embed":
        return PatchEmbedder(m["M"], m["N"], m["patch_length"], m["dim"], m["seed"])
    if kind == "ae_latent":
        return AELatentEmbedder(Autoencoder.load(m["checkpoint"]), m["checkpoint"])
    raise ValueError(f"unknown embedder kind {kind!r}")


def embed(embedder, H):
    """Feature vector(s) for one channel (M, N) or a batch (B, M, N)."""
    H = np.asarray(H)
    return embedder.embed(H) if H.ndim == 2 else embedder.embed_batch(H)


__all__ = [
    "AEConfig", "AELatentEmbedder", "AETrainResult", "Autoencoder", "Embedder", "PatchEmbedder",
    "RawEmbedder", "TrainingDiverged", "decoder_specs", "embed", "encoder_specs",
    "load_manifest", "nmse", "save_manifest", "train_denoising_ae",
]
