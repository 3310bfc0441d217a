"""Command line entry point.

    wirebench [--config F] [--seed S] [--threads T] [--out O] <command> ...

Commands: gen, train-ae, labels-pgd, bench <task> --axis <axis>, profile,
report <csv ...>.  Exit status: 0 success, 1 usage or configuration error,
2 runtime failure (missing files included).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from . import harness
from .classical import LabelCache
from .config import ConfigError, load_config, resolve_out
from .dataset import generate_dataset, load_dataset, save_dataset
from .representations import AEConfig, AELatentEmbedder, save_manifest, train_denoising_ae

log = logging.getLogger("wirebench")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _globals(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="INI run configuration")
    p.add_argument("--seed", type=int, default=d, help="override the run seed")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker threads (1 = fully deterministic, single BLAS thread)")
    p.add_argument("--out", default=d, help="output path")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    p = Parser(prog="wirebench", description="Wireless representation benchmark")
    _globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=Parser)
    sub.required = True

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _globals(sp, suppress=True)
        return sp

    add("gen", "generate a synthetic dataset file")
    sp = add("train-ae", "train a denoising autoencoder")
    sp.add_argument("--ratio", type=int, choices=(16, 32), default=None)
    sp.add_argument("--dataset", default=None)
    sp = add("labels-pgd", "precompute PGD power labels for the supervised subset")
    sp.add_argument("--dataset", default=None)
    sp = add("bench", "run a benchmark sweep")
    sp.add_argument("task", choices=harness.TASKS)
    sp.add_argument("--axis", required=True, choices=harness.AXES)
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--representations", default=None, help="comma separated, e.g. raw,ae32")
    sp.add_argument("--record-time", action="store_true", help="fill the wall_time_s column")
    sp = add("profile", "parameter, FLOP and latency counts of each embedder")
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--representations", default=None)
    sp.add_argument("--runs", type=int, default=100)
    sp = add("report", "merge result CSVs and write a summary JSON")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--merged", default=None, help="also write the merged CSV here")
    return p


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "dataset", None):
        cfg = dataclasses.replace(cfg, paths=dataclasses.replace(cfg.paths, dataset=os.path.abspath(args.dataset)))
    return cfg


def _reps(args, cfg):
    if getattr(args, "representations", None):
        reps = tuple(r.strip() for r in args.representations.split(",") if r.strip())
        for r in reps:
            if r not in ("raw", "ae32", "ae16", "patch"):
                raise ConfigError(f"unknown representation {r!r}")
        return reps
    return cfg.bench.representations


def cmd_gen(args):
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = resolve_out(args.out or cfg.path("dataset"))
    ds = generate_dataset(cfg.scenario, cfg.num_users)
    save_dataset(out, ds)
    log.info("wrote %d users (LoS fraction %.3f) to %s", len(ds), ds.los.mean(), out)


def cmd_train_ae(args):
    cfg = _config(args)
    a = cfg.ae
    ratio = args.ratio or a.ratio
    ds = load_dataset(cfg.path("dataset"))
    ae_cfg = AEConfig(ratio=ratio, channels=(a.c1, a.c2), snr_range_db=(a.snr_low_db, a.snr_high_db),
                      epochs=a.epochs, batch_size=a.batch_size, lr=a.lr,
                      seed=args.seed if args.seed is not None else 0)
    res = train_denoising_ae(ds.channels[ds.split["train"]], ds.channels[ds.split["val"]], ae_cfg)
    out = resolve_out(args.out or cfg.path(f"ae{ratio}"))
    res.model.save(out)
    save_manifest(out + ".json", AELatentEmbedder(res.model, os.path.abspath(out)))
    log.info("saved AE-1/%d to %s (final val loss %.4f)", ratio, out, res.val_loss[-1])


def cmd_labels_pgd(args):
    cfg = _config(args)
    ws = harness.Workspace(cfg)
    out = resolve_out(args.out or cfg.path("labels"))
    pd = harness.PowerData.build(ws, cache=LabelCache(out if os.path.exists(out) else None))
    n_sup = int(-(-cfg.power.supervised_fraction * len(pd.train) // 1))
    for inst in pd.train[:max(n_sup, 0)] + pd.test:
        pd.solve(inst)
    pd.cache.save(out)
    log.info("label cache %s holds %d solutions", out, len(pd.cache))


def cmd_bench(args):
    cfg = _config(args)
    reps = _reps(args, cfg)
    seeds = (args.seed,) if args.seed is not None else cfg.bench.seeds
    b = cfg.bench
    grid = b.train_sizes if args.axis == "train_size" else b.snr_grid
    sc = harness.SweepConfig(args.task, reps, args.axis, tuple(grid), tuple(seeds), b.epochs,
                             b.batch_size, b.lr, record_time=args.record_time, workers=args.threads)
    ws = harness.Workspace(cfg)
    if args.axis == "train_size":
        result = harness.run_data_efficiency(ws, sc)
    elif args.axis == "snr_db":
        result = harness.run_noise_robustness(ws, sc)
    else:
        result = harness.run_profile(ws, args.task, reps)
    out = resolve_out(args.out or f"bench_{args.task}_{args.axis}.csv")
    result.write_csv(out)
    log.info("wrote %d rows to %s", len(result.rows), out)


def cmd_profile(args):
    cfg = _config(args)
    ws = harness.Workspace(cfg)
    result = harness.run_profile(ws, "embedder", _reps(args, cfg), runs=args.runs)
    out = resolve_out(args.out or "profile.csv")
    result.write_csv(out)
    for r in result.rows:
        print(f"{r.representation:8s} {r.metric_name:12s} {r.metric_value:.6g}")


def cmd_report(args):
    for p in args.inputs:
        if not os.path.exists(p):
            raise FileNotFoundError(f"result file not found: {p}")
    merged = harness.merge([harness.SweepResult.read_csv(p) for p in args.inputs])
    if args.merged:
        merged.write_csv(resolve_out(args.merged))
    out = resolve_out(args.out or "summary.json")
    harness.write_summary(out, harness.summarize(merged))
    log.info("summarized %d rows into %s", len(merged.rows), out)


COMMANDS = {"gen": cmd_gen, "train-ae": cmd_train_ae, "labels-pgd": cmd_labels_pgd,
            "bench": cmd_bench, "profile": cmd_profile, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:   # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("wirebench: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        # per-cell parallelism only; BLAS itself always runs single threaded
        with threadpool_limits(limits=1):
            COMMANDS[args.command](args)
    except (ConfigError, harness.SweepError) as exc:
        print(f"wirebench: config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"wirebench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
