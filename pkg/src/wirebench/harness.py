"""Benchmark sweeps: data efficiency, noise robustness and complexity profiling.

Every sweep is a set of independent cells ``(representation, axis value,
seed)``.  Each cell derives its own generators from the seed, so cells can run
in any order or concurrently; rows are sorted by cell key before writing,
which is what makes single-threaded CSVs reproducible byte for byte.

Wall-clock columns are the one nondeterministic quantity.  ``wall_time_s`` is
left empty unless ``record_time`` is set.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import add_awgn, subcarrier_average
from .classical import LabelCache, PgdConfig, epa, sum_rate
from .config import RunConfig
from .dataset import load_dataset
from .representations import AELatentEmbedder, Autoencoder, PatchEmbedder, RawEmbedder
from .tasks.codebook import beam_labels, build_codebook
from .tasks.metrics import weighted_f1
from .tasks.models import TaskModelSpec
from .tasks.power import evaluate_se, group_users, noise_for_snr
from .tasks.training import Schedule, train_classifier, train_power

log = logging.getLogger(__name__)

COLUMNS = ("task", "representation", "axis", "axis_value", "seed", "metric_name", "metric_value",
           "wall_time_s")
TASKS = ("los", "beam", "power")
AXES = ("train_size", "snr_db", "profile")


class SweepError(ValueError):
    pass


@dataclass
class SweepConfig:
    task: str
    representations: tuple
    axis: str
    grid: tuple
    seeds: tuple
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    out: str | None = None
    record_time: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise SweepError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        if self.axis not in AXES:
            raise SweepError(f"unknown axis {self.axis!r}; choose from {', '.join(AXES)}")
        if self.axis != "profile" and not self.grid:
            raise SweepError("the sweep grid is empty")
        if not self.seeds:
            raise SweepError("at least one seed is required")
        if not self.representations:
            raise SweepError("at least one representation is required")


@dataclass(frozen=True)
class Row:
    task: str
    representation: str
    axis: str
    axis_value: float
    seed: int
    metric_name: str
    metric_value: float
    wall_time_s: float | None = None

    def key(self):
        return (self.task, self.representation, self.axis, self.axis_value, self.seed, self.metric_name)


def fmt_number(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def sorted(self):
        return SweepResult(sorted(self.rows, key=Row.key))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in sorted(self.rows, key=Row.key):
                w.writerow([r.task, r.representation, r.axis, fmt_number(r.axis_value), r.seed,
                            r.metric_name, repr(float(r.metric_value)),
                            "" if r.wall_time_s is None else repr(float(r.wall_time_s))])

    @classmethod
    def read_csv(cls, path):
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != COLUMNS:
                raise SweepError(f"{path}: unexpected header {header}")
            for rec in reader:
                t, rep, axis, av, seed, name, value, wall = rec
                value = float(value)
                if not math.isfinite(value):
                    raise SweepError(f"{path}: non-finite metric in row {rec}")
                rows.append(Row(t, rep, axis, float(av), int(seed), name, value,
                                float(wall) if wall else None))
        return cls(rows)


# ------------------------------------------------------------------ workspace
class Workspace:
    """Dataset, embedders and task data for one run configuration.

    Everything here is computed eagerly by :meth:`prepare` so that sweep cells
    only read shared state.
    """

    def __init__(self, cfg: RunConfig, dataset=None):
        self.cfg = cfg
        self.ds = dataset if dataset is not None else load_dataset(cfg.path("dataset"))
        self.M, self.N = self.ds.shape
        self._embedders = {}
        self._features = {}
        self.beam_labels = None
        self.power = None

    # embedders --------------------------------------------------------------
    def embedder(self, name):
        if name not in self._embedders:
            if name == "raw":
                e = RawEmbedder(self.M, self.N)
            elif name == "patch":
                e = PatchEmbedder(self.M, self.N, self.cfg.bench.patch_length, seed=0)
            elif name in ("ae32", "ae16"):
                path = self.cfg.path(name)
                if not os.path.exists(path):
                    raise FileNotFoundError(f"autoencoder checkpoint not found: {path} "
                                            f"(run train-ae first)")
                e = AELatentEmbedder(Autoencoder.load(path), path)
            else:
                raise SweepError(f"unknown representation {name!r}")
            self._embedders[name] = e
        return self._embedders[name]

    def features(self, name):
        """Embeddings of every clean channel in the dataset."""
        if name not in self._features:
            self._features[name] = self.embedder(name).embed_batch(self.ds.channels)
        return self._features[name]

    def noisy_features(self, name, idx, snr_db, salt):
        if np.isposinf(snr_db):
            return self.features(name)[idx]
        rng = np.random.default_rng(np.random.SeedSequence([self.cfg.scenario.seed, 0x5A, salt]))
        # dataset channels have unit mean power, which is the SNR reference
        noisy = add_awgn(self.ds.channels[idx], snr_db, rng, ref_power=1.0)
        return self.embedder(name).embed_batch(noisy)

    # task data --------------------------------------------------------------
    def prepare(self, task, representations):
        for r in representations:
            self.features(r)
        if task == "beam" and self.beam_labels is None:
            b = self.cfg.bench
            cb = build_codebook(self.M, b.beams, b.fov_deg,
                                self.cfg.scenario.spacing, self.cfg.scenario.wavelength)
            self.beam_labels = beam_labels(cb, self.ds.channels)
        if task == "power" and self.power is None:
            self.power = PowerData.build(self)

    def labels(self, task):
        return self.ds.los.astype(int) if task == "los" else self.beam_labels


@dataclass
class PowerData:
    train: list
    test: list
    ref_gain: float
    noise_power: float
    cache: LabelCache
    pgd: PgdConfig

    @classmethod
    def build(cls, ws, cache=None):
        pc = ws.cfg.power
        h = subcarrier_average(ws.ds.channels)
        ref_gain = float(np.mean(np.sum(np.abs(h) ** 2, axis=1)))
        noise = noise_for_snr(pc.snr_db, ref_gain)
        rng = np.random.default_rng(np.random.SeedSequence([ws.cfg.scenario.seed, 0x6A0]))
        common = dict(rho_min=pc.rho_min, rho_max=pc.rho_max, gamma_max=pc.gamma_max,
                      noise_power=noise, p_total=1.0)
        train = group_users(h, pc.users, rng=rng, num_groups=pc.train_groups,
                            pool=ws.ds.split["train"], **common)
        test = group_users(h, pc.users, rng=rng, num_groups=pc.test_groups,
                           pool=ws.ds.split["test"], **common)
        if cache is None:
            path = ws.cfg.path("labels")
            cache = LabelCache(path if os.path.exists(path) else None)
        return cls(train, test, ref_gain, noise, cache,
                   PgdConfig(iterations=pc.pgd_iterations, restarts=pc.pgd_restarts))

    def solve(self, inst):
        return self.cache.solve(inst, self.pgd, np.random.default_rng(0))

    def features(self, feats, instances):
        return np.stack([feats[list(g.users)] for g in instances])


# ---------------------------------------------------------------------- cells
def _subset(ws, n, seed):
    train = ws.ds.split["train"]
    if n > len(train):
        raise SweepError(f"train_size {n} exceeds the {len(train)}-sample train split")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A, int(n)]))
    return np.sort(rng.choice(train, size=int(n), replace=False))


def _classifier_cell(ws, sc, rep, n, seed, snr_db):
    feats = ws.features(rep)
    y = ws.labels(sc.task)
    idx = _subset(ws, n, seed)
    K = 2 if sc.task == "los" else ws.cfg.bench.beams
    spec = TaskModelSpec(sc.task, feats.shape[1], num_classes=K)
    sched = Schedule(epochs=sc.epochs, batch_size=sc.batch_size, lr=sc.lr, seed=seed)
    model = train_classifier(spec, feats[idx], y[idx], schedule=sched)
    test = ws.ds.split["test"]
    out = {}
    for s in snr_db:
        Xt = ws.noisy_features(rep, test, s, salt=_salt(seed, s))
        out[s] = {"f1": weighted_f1(model.predict(Xt), y[test], K)}
    return out


def _power_cell(ws, sc, rep, n, seed, snr_db):
    pd = ws.power
    pc = ws.cfg.power
    if n > len(pd.train):
        raise SweepError(f"train_size {n} exceeds the {len(pd.train)} training instances")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E7, int(n)]))
    order = rng.permutation(len(pd.train))[:int(n)]
    insts = [pd.train[i] for i in order]
    n_sup = int(math.ceil(pc.supervised_fraction * len(insts)))
    labels = {i: pd.solve(insts[i])[0] for i in range(n_sup)}
    feats = ws.features(rep)
    X = pd.features(feats, insts)
    spec = TaskModelSpec("power", feats.shape[1], num_users=pc.users)
    sched = Schedule(epochs=pc.epochs, batch_size=sc.batch_size, lr=pc.lr, seed=seed,
                     warmup_fraction=pc.warmup_fraction)
    model = train_power(spec, X, insts, labels, schedule=sched)
    out = {}
    for s in snr_db:
        if np.isposinf(s):
            tests = pd.test
            Xt = pd.features(feats, tests)
        else:
            tests = [g.with_noise(noise_for_snr(s, pd.ref_gain)) for g in pd.test]
            users = np.array([g.users for g in pd.test]).ravel()
            noisy = ws.noisy_features(rep, users, s, salt=_salt(seed, s))
            Xt = noisy.reshape(len(pd.test), pc.users, -1)
        p_hat = model.predict(Xt)
        se_model = np.array([evaluate_se(p, g) for p, g in zip(p_hat, tests)])
        se_pgd = np.array([pd.solve(g)[1] for g in tests])
        se_epa = np.array([sum_rate(g.gains, epa(g.K, g.p_total), g.noise_power) for g in tests])
        out[s] = {"se_model": se_model.mean(), "se_pgd": se_pgd.mean(), "se_epa": se_epa.mean(),
                  "ratio_pgd": np.mean(se_model / se_pgd), "ratio_epa": np.mean(se_model / se_epa)}
    return out


def _salt(seed, snr):
    return int(seed) * 1000 + (99999 if np.isposinf(snr) else int(round(snr * 10)) + 500)


def _run_cells(ws, sc, cells, fn):
    """Evaluate ``fn(rep, n, seed, snrs)`` for every cell; returns rows."""
    def job(cell):
        rep, n, seed, snrs, axis_values = cell
        t0 = time.perf_counter()
        metrics = fn(rep, n, seed, snrs)
        wall = time.perf_counter() - t0
        rows = []
        for s, av in zip(snrs, axis_values):
            for name, value in metrics[s].items():
                if not np.isfinite(value):
                    raise SweepError(f"non-finite {name} for {rep} at {sc.axis}={av}, seed {seed}")
                rows.append(Row(sc.task, rep, sc.axis, float(av), int(seed), name, float(value),
                                wall if sc.record_time else None))
        return rows

    if sc.workers > 1:
        with ThreadPoolExecutor(max_workers=sc.workers) as pool:
            chunks = list(pool.map(job, cells))
    else:
        chunks = [job(c) for c in cells]
    return SweepResult([r for c in chunks for r in c]).sorted()


def _cell_fn(ws, sc):
    if sc.task == "power":
        return lambda rep, n, seed, snrs: _power_cell(ws, sc, rep, n, seed, snrs)
    return lambda rep, n, seed, snrs: _classifier_cell(ws, sc, rep, n, seed, snrs)


def run_data_efficiency(ws, sc):
    """Train on seeded subsets of each size, evaluate on the clean test split."""
    ws.prepare(sc.task, sc.representations)
    cells = [(rep, int(n), seed, (math.inf,), (n,))
             for rep in sc.representations for n in sc.grid for seed in sc.seeds]
    return _run_cells(ws, sc, cells, _cell_fn(ws, sc))


def run_noise_robustness(ws, sc, train_size=None):
    """Train once per (representation, seed) on the full train split (or
    ``train_size``), then evaluate at every SNR with test channels corrupted
    before embedding.  Power rows re-solve PGD at the degraded noise level."""
    ws.prepare(sc.task, sc.representations)
    if train_size is None:
        train_size = len(ws.power.train) if sc.task == "power" else len(ws.ds.split["train"])
    snrs = tuple(float(s) for s in sc.grid)
    cells = [(rep, int(train_size), seed, snrs, snrs)
             for rep in sc.representations for seed in sc.seeds]
    return _run_cells(ws, sc, cells, _cell_fn(ws, sc))


# ------------------------------------------------------------------ profiling
def profile(embedder=None, model_spec=None, sample=None, runs=100, warmup=10):
    """``(param_count, flop_count, median_latency_s)`` for one-sample inference.

    Either part may be omitted; counts of the embedder and the downstream
    model add up, and latency covers embedding followed by the model forward.
    """
    params = flops = 0
    if embedder is not None:
        p, f = embedder.count()
        params, flops = params + p, flops + f
    net = None
    if model_spec is not None:
        net = model_spec.build(np.random.default_rng(0))
        net.eval()
        p, f = net.count()
        params, flops = params + p, flops + f
    if sample is None:
        raise ValueError("profile needs a sample input")

    def once():
        x = embedder.embed_batch(sample[None]) if embedder is not None else sample[None]
        if net is not None:
            if model_spec.task == "power":
                x = np.repeat(x[:, None, :], model_spec.num_users, axis=1)
            net.predict(x)

    for _ in range(warmup):
        once()
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        once()
        times.append(time.perf_counter() - t0)
    return int(params), int(flops), float(np.median(times))


def run_profile(ws, task, representations, runs=100, warmup=10):
    rows = []
    sample = ws.ds.channels[0]
    for rep in representations:
        e = ws.embedder(rep)
        spec = None
        if task in TASKS:
            K = {"los": 2, "beam": ws.cfg.bench.beams, "power": 2}[task]
            spec = TaskModelSpec(task, e.feature_dim, num_classes=K, num_users=ws.cfg.power.users)
        params, flops, lat = profile(e, spec, sample, runs, warmup)
        label = task if task in TASKS else "embedder"
        for name, value in (("param_count", params), ("flop_count", flops), ("latency_s", lat)):
            rows.append(Row(label, rep, "profile", 1.0, 0, name, float(value), None))
    return SweepResult(rows).sorted()


# ----------------------------------------------------------------- reporting
def merge(results):
    return SweepResult([r for res in results for r in res.rows]).sorted()


def summarize(result):
    """Mean / std / count over seeds per (task, representation, axis, value, metric),
    plus a train-size trend audit (largest-n mean vs smallest-n mean)."""
    groups = {}
    for r in result.rows:
        k = (r.task, r.representation, r.axis, r.axis_value, r.metric_name)
        groups.setdefault(k, []).append(r.metric_value)
    cells = []
    for k in sorted(groups):
        v = np.array(groups[k])
        cells.append({"task": k[0], "representation": k[1], "axis": k[2],
                      "axis_value": fmt_number(k[3]), "metric": k[4], "mean": float(v.mean()),
                      "std": float(v.std()), "n": int(len(v))})
    audits = []
    trend = {}
    for c, k in zip(cells, sorted(groups)):
        if k[2] == "train_size":
            trend.setdefault((k[0], k[1], k[4]), []).append((k[3], c["mean"]))
    for (task, rep, metric), pts in sorted(trend.items()):
        if len(pts) < 2:
            continue
        pts.sort()
        audits.append({"task": task, "representation": rep, "metric": metric,
                       "smallest_n": fmt_number(pts[0][0]), "largest_n": fmt_number(pts[-1][0]),
                       "improves": bool(pts[-1][1] >= pts[0][1])})
    return {"cells": cells, "train_size_trend": audits, "rows": len(result.rows)}


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
