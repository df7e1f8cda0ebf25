"""Command-line entry point: ``bioaction <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import os
import sys

from . import cvt, qpso
from .errors import ConfigurationError, DatasetError


def _load_config(path):
    from .pipeline.config import PipelineConfig
    return PipelineConfig.load(path) if path else PipelineConfig()


def _dataset_from_config(cfg, manifest, base):
    from .pipeline.dataset import load_dataset
    if manifest is None:
        manifest = cfg.dataset.manifest
        if manifest is None:
            raise SystemExit("no dataset: pass --manifest or set dataset.manifest in the config")
        if not os.path.isabs(manifest):
            manifest = os.path.join(base, manifest)
    d = cfg.dataset
    return load_dataset(manifest, (d.target_width, d.target_height), d.mirror)


def cmd_train(args):
    from .pipeline.training import train
    cfg = _load_config(args.config)
    if args.scenario is not None:
        cfg = cfg.replace(training={"scenario": args.scenario})
    base = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()
    ds = _dataset_from_config(cfg, args.manifest, base)
    if cfg.dataset.train_subjects is not None:
        ds = ds.subset(cfg.dataset.train_subjects)
    bundle = train(ds, cfg)
    bundle.save(args.out)
    print(f"scenario {bundle.scenario}: {len(bundle.classes)} classes, {bundle.bank.n_rows} prototypes -> {args.out}")
    for line in bundle.report:
        print(f"  note: {line}")


def cmd_classify(args):
    from .pipeline.bundle import ModelBundle
    from .pipeline.dataset import load_frames
    from .pipeline.inference import classify_sequence
    bundle = ModelBundle.load(args.bundle)
    d = bundle.config.dataset
    frames = load_frames(args.frames, (d.target_width, d.target_height))
    if frames is None:
        raise SystemExit(f"no image frames in {args.frames}")
    res = classify_sequence(frames, bundle)
    for t, lab in enumerate(res.frame_labels):
        print(f"frame {t}\t{lab if lab is not None else 'unclassified'}")
    flags = [name for name, on in (("tie", res.video_tie), ("form-only", res.form_only)) if on]
    label = res.video_label if res.video_label is not None else "unclassified"
    print(f"video\t{label}" + (f"\t({', '.join(flags)})" if flags else ""))


def cmd_evaluate(args):
    from .pipeline.bundle import ModelBundle
    from .pipeline.dataset import load_dataset
    from .pipeline.inference import evaluate
    bundle = ModelBundle.load(args.bundle)
    d = bundle.config.dataset
    ds = load_dataset(args.manifest, (d.target_width, d.target_height), d.mirror, classes=bundle.classes)
    ev = evaluate(ds, bundle)
    cm = ev.videos if args.level == "video" else ev.frames
    text = cm.to_csv(args.out)
    sys.stdout.write(text)
    print(f"frame accuracy {ev.frames.accuracy:.4f}, video accuracy {ev.videos.accuracy:.4f}", file=sys.stderr)


def cmd_synth(args):
    from .pipeline.config import PipelineConfig
    from .pipeline.dataset import write_dataset
    from .pipeline.synthetic import make_action_dataset
    ds = make_action_dataset(args.seed, args.subjects, args.sequences, args.frames, (args.size, args.size))
    subjects = ds.subjects
    train_subjects = subjects[:args.train_subjects]
    write_dataset(ds, args.out, "manifest.tsv")
    write_dataset(ds, args.out, "train.tsv", set(train_subjects))
    write_dataset(ds, args.out, "test.tsv", set(subjects[args.train_subjects:]))
    cfg = PipelineConfig().replace(
        dataset={"manifest": "train.tsv", "target_width": args.size, "target_height": args.size},
        training={"subjects": len(train_subjects), "seed": args.seed},
    )
    cfg.save(os.path.join(args.out, "config.json"))
    print(f"{len(ds)} videos ({', '.join(ds.classes)}) written to {args.out}; "
          f"train subjects {', '.join(train_subjects)}")


def cmd_bench(args):
    f = qpso.BENCHMARKS[args.function]
    config = qpso.OptimizerConfig(M=args.particles, iterations=args.iterations, mode=args.mode, seed=args.seed,
                                  initializer=args.initializer,
                                  alpha=qpso.AlphaSchedule(args.alpha_start, args.alpha_end, args.constant_alpha))
    res = qpso.optimize(f, [(-args.bound, args.bound)] * args.dims, config, vectorized=True)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["iteration", "fitness"])
        for i, h in enumerate(res.history):
            w.writerow([i, repr(h)])
    finally:
        if args.out:
            out.close()
    print(f"best fitness {res.fitness:.3e}", file=sys.stderr)


def cmd_cvt_dump(args):
    bounds = [(args.low, args.high)] * args.dims
    gen = cvt.jdg_cvt(bounds, args.k, cvt.CvtConfig(samples=args.samples, iterations=args.iterations,
                                                   j1=args.j1, j2=args.j2, seed=args.seed))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(args.dims)])
    for p in gen.points:
        w.writerow([repr(float(v)) for v in p])


def build_parser():
    p = argparse.ArgumentParser(prog="bioaction", description="Form/motion action recognition toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model bundle")
    t.add_argument("--scenario", type=int, choices=(1, 2))
    t.add_argument("--config", help="JSON configuration file")
    t.add_argument("--manifest", help="dataset manifest (overrides dataset.manifest)")
    t.add_argument("--out", required=True, help="bundle directory")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="classify one frame directory")
    c.add_argument("--bundle", required=True)
    c.add_argument("--frames", required=True)
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("evaluate", help="confusion matrix over a labeled manifest")
    e.add_argument("--bundle", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--level", choices=("frame", "video"), default="video")
    e.add_argument("--out", help="write the confusion CSV here as well")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("synth", help="write the synthetic moving-bar dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--subjects", type=int, default=5)
    s.add_argument("--sequences", type=int, default=3)
    s.add_argument("--frames", type=int, default=10)
    s.add_argument("--size", type=int, default=48)
    s.add_argument("--train-subjects", type=int, default=3)
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("qpso-bench", aliases=["bench"], help="QPSO on a benchmark function; CSV history")
    b.add_argument("--function", choices=sorted(qpso.BENCHMARKS), default="sphere")
    b.add_argument("--dims", type=int, default=10)
    b.add_argument("--bound", type=float, default=100.0)
    b.add_argument("--particles", type=int, default=20)
    b.add_argument("--iterations", type=int, default=500)
    b.add_argument("--mode", choices=("quantum", "classic"), default="quantum")
    b.add_argument("--initializer", choices=("uniform", "cvt"), default="uniform")
    b.add_argument("--alpha-start", type=float, default=1.0)
    b.add_argument("--alpha-end", type=float, default=0.5)
    b.add_argument("--constant-alpha", action="store_true")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("cvt-dump", help="print CVT generator coordinates as CSV")
    d.add_argument("--k", type=int, default=20)
    d.add_argument("--dims", type=int, default=2)
    d.add_argument("--low", type=float, default=0.0)
    d.add_argument("--high", type=float, default=1.0)
    d.add_argument("--samples", type=int)
    d.add_argument("--iterations", type=int, default=100)
    d.add_argument("--j1", type=float, default=1.0)
    d.add_argument("--j2", type=float, default=1.0)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_cvt_dump)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (DatasetError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
