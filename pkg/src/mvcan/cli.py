"""Command-line front end: generate, train, ablate, eval, export, verify.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 verification
counterexample.  ``MVCAN_SEED`` overrides the default seed.
"""
from __future__ import annotations

import argparse
import contextlib
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import checkpoint
from . import clustering as cl
from . import data as mvd
from . import engine as en
from . import verification as vf

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("MVCAN_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MVCAN_SEED must be an integer, got {raw!r}") from None


def parse_views(text: str) -> List[mvd.ViewSpec]:
    """``inf:20,noise:8`` -> view specs (spacing/std filled in later)."""
    out = []
    for item in text.split(","):
        kind, _, width = item.strip().partition(":")
        kinds = {"inf": "informative", "informative": "informative",
                 "noise": "noisy", "noisy": "noisy"}
        if kind not in kinds or not width.isdigit() or int(width) < 1:
            raise UsageError(f"bad view spec {item!r}; expected inf:WIDTH or noise:WIDTH")
        out.append(mvd.ViewSpec(int(width), kinds[kind]))
    return out


def _hidden(text: str):
    try:
        return tuple(int(h) for h in text.split(",") if h.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer widths {text!r}") from None


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    d = en.TrainConfig(2)
    p.add_argument("--data", required=True, help="MVDS dataset file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", type=int, help="number of clusters (default: dataset hint)")
    p.add_argument("--lam", type=float, default=d.lam)
    p.add_argument("--t1", type=int, default=d.t1)
    p.add_argument("--t2", type=int, default=d.t2)
    p.add_argument("--epochs", type=int, default=d.epochs,
                   help="representation-level epochs in total")
    p.add_argument("--pretrain-epochs", type=int, default=d.pretrain_epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--embed-dim", type=int, default=d.embed_dim)
    p.add_argument("--hidden", type=_hidden, default=d.hidden, help="e.g. 500,500,2000")
    p.add_argument("--kmeans-init", type=int, default=d.kmeans_init)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-normalize", action="store_true", help="skip min-max scaling")
    p.add_argument("--threads", type=int, help="BLAS thread limit; 1 is bit-reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvcan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic multi-view dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--views", required=True, help="e.g. inf:20,inf:20")
    g.add_argument("--noise-views", type=int, default=0)
    g.add_argument("--noise-width", type=int, help="default: mean view width")
    g.add_argument("--spacing", type=float, default=6.0)
    g.add_argument("--std", type=float, default=1.0)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="fit a model (optionally an ablation)")
    _add_train_flags(t)
    t.add_argument("--ablate", choices=en.ABLATION_MODES, default="full")

    a = sub.add_parser("ablate", help="alias of train --ablate MODE")
    a.add_argument("mode", choices=en.ABLATION_MODES)
    _add_train_flags(a)

    for name, helptext in (("eval", "score a checkpoint on a dataset"),
                           ("export", "write scaled representations and soft labels")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--model", required=True)
        e.add_argument("--data", required=True)
        e.add_argument("--threads", type=int)
        if name == "export":
            e.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="run theorem campaigns")
    sel = v.add_mutually_exclusive_group(required=True)
    sel.add_argument("--all", action="store_true")
    sel.add_argument("--theorem", action="append", choices=sorted(vf.CAMPAIGNS))
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int)
    v.add_argument("--out", help="also write the reports to this file")
    return parser


def _threads(args):
    n = getattr(args, "threads", None)
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return threadpool_limits(limits=n)


def _print_metrics(metrics, out) -> None:
    if metrics:
        print("ACC {acc:.4f}  NMI {nmi:.4f}  ARI {ari:.4f}".format(**metrics), file=out)


def cmd_generate(args, out) -> int:
    views = parse_views(args.views)
    for vs in views:
        vs.spacing, vs.std = args.spacing, args.std
    if args.noise_views < 0:
        raise UsageError("--noise-views must be >= 0")
    seed = default_seed() if args.seed is None else args.seed
    try:
        ds = mvd.generate_synthetic(mvd.SyntheticSpec(args.n, args.k, views, seed))
        for i in range(args.noise_views):
            ds = mvd.inject_noise_view(ds, args.noise_width, seed=seed + 1 + i)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    path = Path(args.out)
    mvd.save(ds, path)
    path.with_name(path.name + ".manifest.txt").write_text(ds.manifest_text(), encoding="utf-8")
    print(ds.manifest_text(), end="", file=out)
    print(f"chance level ACC ~ {1 / args.k:.3f}", file=out)
    for name, x in zip(ds.names, mvd.normalize(ds).views):
        labels = cl.kmeans(x, args.k, seed=0, n_init=3)[1]
        print(f"  {name}: K-means ACC {cl.accuracy(labels, ds.labels):.3f} "
              f"NMI {cl.nmi(labels, ds.labels):.3f}", file=out)
    return EXIT_OK


def _config(args, ds) -> en.TrainConfig:
    k = args.k if args.k is not None else ds.k_hint
    if not k:
        raise UsageError("--k is required when the dataset has no cluster hint")
    seed = default_seed() if args.seed is None else args.seed
    try:
        return en.TrainConfig(k, lam=args.lam, t1=args.t1, t2=args.t2, epochs=args.epochs,
                              pretrain_epochs=args.pretrain_epochs, batch_size=args.batch_size,
                              lr=args.lr, seed=seed, embed_dim=args.embed_dim,
                              hidden=args.hidden, kmeans_init=args.kmeans_init)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args, out, mode: str) -> int:
    ds = mvd.load(args.data)
    config = _config(args, ds)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, report = en.ablate(ds, config, mode, normalize=not args.no_normalize)
    report.write(outdir / "report.jsonl")
    if model is not None:
        checkpoint.save(model, outdir / "model.mvck")
        print(f"weights {np.round(model.scaling.weights, 4).tolist()}", file=out)
    print(f"mode {mode}  wall time {report.wall_time:.1f}s", file=out)
    _print_metrics(report.metrics, out)
    return EXIT_OK


def cmd_eval(args, out) -> int:
    model = checkpoint.load(args.model)
    ds = mvd.load(args.data)
    labels, _ = en.predict(model, ds)
    print(f"weights {np.round(model.scaling.weights, 4).tolist()}", file=out)
    if ds.labels is not None:
        _print_metrics({"acc": cl.accuracy(labels, ds.labels), "nmi": cl.nmi(labels, ds.labels),
                        "ari": cl.ari(labels, ds.labels)}, out)
    return EXIT_OK


def cmd_export(args, out) -> int:
    model = checkpoint.load(args.model)
    ds = mvd.load(args.data)
    z = en.scaled_representation(model, ds)
    _, y = en.predict(model, ds)
    notes = "scaled representation and fused soft labels; labels are the dataset's"
    mvd.save(mvd.MultiViewDataset([z, y], ds.labels, ["scaled_representation", "soft_labels"],
                                  model.config.n_clusters, notes), args.out)
    print(f"wrote {z.shape[0]} rows to {args.out}", file=out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    seed = default_seed() if args.seed is None else args.seed
    theorems = sorted(vf.CAMPAIGNS) if args.all else args.theorem
    reports = vf.run_campaigns(theorems, args.trials, seed)
    text = "\n".join(r.to_text() for r in reports)
    print(text, end="", file=out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_COUNTEREXAMPLE


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        with _threads(args):
            if args.command == "generate":
                return cmd_generate(args, out)
            if args.command == "train":
                return cmd_train(args, out, args.ablate)
            if args.command == "ablate":
                return cmd_train(args, out, args.mode)
            if args.command == "eval":
                return cmd_eval(args, out)
            if args.command == "export":
                return cmd_export(args, out)
            return cmd_verify(args, out)
    except UsageError as exc:
        print(f"mvcan: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"mvcan: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
