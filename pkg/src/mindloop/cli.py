"""Command-line front door: simulate, record, train, sweep, validate, replay, serve.

Every command resolves and prints its seed and configuration, so a run
can be reproduced bit-for-bit (wall-time fields aside) from its own
log. Errors exit with a stable status code and one machine-readable
JSON line on stderr: 2 usage, 3 data, 4 source, 5 training divergence.
"""

from __future__ import annotations

import argparse
import glob as globlib
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import SamplingConfig, SynthConfig, SyntheticSource, write_raw_recording
from .dataset import balance, consolidate, load_session, save_session, split
from .errors import (
    BadFooter,
    BadHeader,
    CorruptFile,
    DesyncDetected,
    DivergenceDetected,
    EmptyDataset,
    EmptyTrainingSet,
    FormatVersionMismatch,
    InvalidBand,
    KTooLarge,
    MindloopError,
    Overflow,
    ScheduleGap,
    ShapeMismatch,
    ShapeUnderflow,
    ShortPacket,
    SingularCovariance,
    SourceLost,
    SourceUnavailable,
    TooFewClasses,
    UnstableDesign,
)
from .labels import ClassLabel
from .models import TrainConfig, SweepGrid, fit_model, load_model, run_sweep, save_model
from .engine import (
    PilotDriver,
    PipelineConfig,
    ScriptDriver,
    SessionPlan,
    SessionRunner,
    open_block_source,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOURCE, EXIT_DIVERGENCE = 0, 2, 3, 4, 5

_SOURCE_ERRORS = (SourceUnavailable, DesyncDetected, Overflow, SourceLost,
                  ShortPacket, BadHeader, BadFooter, ScheduleGap)
_DATA_ERRORS = (EmptyDataset, EmptyTrainingSet, CorruptFile, FormatVersionMismatch,
                KTooLarge, SingularCovariance, TooFewClasses, ShapeUnderflow,
                ShapeMismatch, InvalidBand, UnstableDesign, ValueError, OSError)


def _resolve_seed(args) -> int:
    seed = args.seed if args.seed is not None else secrets.randbits(32)
    print(f"seed: {seed}")
    return seed


def _echo_config(name: str, cfg: dict) -> None:
    print(f"config[{name}]: {json.dumps(cfg, sort_keys=True, default=str)}")


def _parse_schedule(text: str, duration: float) -> list[tuple[float, float, ClassLabel]]:
    """'none:3,left:3,right:3,both:3' repeated until duration is covered."""
    pattern = []
    for part in text.split(","):
        name, _, secs = part.partition(":")
        pattern.append((ClassLabel[name.strip().upper()], float(secs)))
    if not pattern or any(d <= 0 for _, d in pattern):
        raise ValueError(f"bad schedule {text!r}")
    out, t = [], 0.0
    while t < duration:
        for label, d in pattern:
            end = min(t + d, duration)
            out.append((t, end, label))
            t = end
            if t >= duration:
                break
    return out


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        sampling=SamplingConfig(mains_freq=args.mains_freq),
        hp_cutoff=args.hp_cutoff, lp_cutoff=args.lp_cutoff, notch_q=args.notch_q)


def _synth_config(args, seed: int) -> SynthConfig:
    return SynthConfig(seed=seed, mu_depth=args.mu_depth,
                       noise_amplitude=args.noise_amplitude,
                       mains_leak=args.mains_leak,
                       drift_amplitude=args.drift_amplitude)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed; generated and printed when omitted")
    p.add_argument("--mains-freq", type=float, default=50.0, choices=(50.0, 60.0))
    p.add_argument("--hp-cutoff", type=float, default=0.5)
    p.add_argument("--lp-cutoff", type=float, default=45.0)
    p.add_argument("--notch-q", type=float, default=30.0)


def _add_synth(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu-depth", type=float, default=0.8)
    p.add_argument("--noise-amplitude", type=float, default=10.0)
    p.add_argument("--mains-leak", type=float, default=5.0)
    p.add_argument("--drift-amplitude", type=float, default=20.0)


def _load_sessions(patterns: list[str]):
    paths: list[str] = []
    for pattern in patterns:
        hits = sorted(globlib.glob(pattern))
        paths.extend(hits if hits else [pattern])
    return [load_session(p) for p in paths]


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    pcfg = _pipeline_config(args)
    scfg = _synth_config(args, seed)
    schedule = _parse_schedule(args.schedule, args.duration)
    source = SyntheticSource(pcfg.sampling, scfg, montage=pcfg.montage,
                             schedule=schedule)
    n = round(args.duration * pcfg.sampling.sample_rate)
    _, volts = source.take(n)
    write_raw_recording(args.out, pcfg.sampling, volts)
    _echo_config("simulate", {"duration": args.duration, "schedule": args.schedule,
                              "out": args.out, "synth": vars(scfg)})
    print(f"wrote {n} samples to {args.out}")
    return EXIT_OK


def _make_keys(spec: str, duration: float):
    if spec == "pilot":
        return PilotDriver()
    if spec.startswith("schedule:"):
        return ScriptDriver(_parse_schedule(spec[len("schedule:"):], duration))
    raise ValueError(f"unknown key driver {spec!r} (use pilot or schedule:...)")


def cmd_record(args) -> int:
    seed = _resolve_seed(args)
    pcfg = _pipeline_config(args)
    source = open_block_source(args.source, pcfg,
                               synth_cfg=_synth_config(args, seed))
    plan = SessionPlan(training_s=args.duration)
    runner = SessionRunner(pcfg, source, seed=seed, subject_id=args.subject)
    keys = _make_keys(args.keys, args.duration)
    record = runner.run_training_session(plan, keys)
    save_session(record, args.out)
    _echo_config("record", {"source": args.source, "duration": args.duration,
                            "subject": args.subject, "keys": args.keys,
                            "out": args.out})
    m = record.metrics
    print(f"recorded {len(record.frames)} frames, {len(record.key_log)} key events, "
          f"caught {m.boxes_caught}, missed {m.misses}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    sessions = _load_sessions(args.sessions)
    examples = consolidate(sessions, fraction=args.consolidate_fraction,
                           rng_seed=seed)
    balanced = balance(examples, rng_seed=seed)
    train, test = split(balanced, train_fraction=args.train_fraction,
                        mode=args.split, rng_seed=seed)
    cfg = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                      epochs=args.epochs, seed=seed)
    model, test_eval = fit_model(
        args.model, train, test, seed=seed, k=args.k, shrinkage=args.shrinkage,
        n_convs=args.n_convs, dense_len=args.dense_len, train_cfg=cfg)
    _echo_config("train", {
        "model": args.model, "sessions": args.sessions,
        "consolidate_fraction": args.consolidate_fraction, "split": args.split,
        "train_fraction": args.train_fraction, "n_train": len(train),
        "n_test": len(test), "hyperparameters": model.hyperparameters})
    print(f"train accuracy: {model.meta.training_accuracy:.4f}")
    if test_eval is not None:
        print(f"test accuracy: {test_eval.accuracy:.4f}")
        print(test_eval)
    save_model(model, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    seed = _resolve_seed(args)
    sessions = _load_sessions(args.sessions)
    datasets = {}
    for spec in args.dataset:
        name, _, rest = spec.partition("=")
        fraction, _, subject = rest.partition(":")
        subset = [s for s in sessions if not subject or s.header.subject_id == subject]
        if not subset:
            raise EmptyDataset(f"dataset {name!r}: no sessions match {subject!r}")
        datasets[name] = consolidate(subset, fraction=float(fraction), rng_seed=seed)
    grid = SweepGrid(n_convs=tuple(int(v) for v in args.grid_n.split(",")),
                     dense_lens=tuple(int(v) for v in args.grid_l.split(",")))
    cfg = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                      epochs=args.epochs, seed=seed)
    _echo_config("sweep", {"datasets": args.dataset, "grid_n": args.grid_n,
                           "grid_l": args.grid_l, "epochs": args.epochs,
                           "jobs": args.jobs, "out": args.out})
    rows = run_sweep(datasets, args.out, grid=grid, cfg=cfg, base_seed=seed,
                     split_mode=args.split, jobs=args.jobs, progress=print)
    print(f"sweep complete: {len(rows)} cells -> {args.out}/sweep.csv")
    return EXIT_OK


def cmd_validate(args) -> int:
    seed = _resolve_seed(args)
    pcfg = _pipeline_config(args)
    source = open_block_source(args.source, pcfg,
                               synth_cfg=_synth_config(args, seed))
    plan = SessionPlan(record_s=args.record_s, control_s=args.control_s,
                       smoothing=args.smoothing)
    runner = SessionRunner(pcfg, source, seed=seed, subject_id=args.subject)
    base = load_model(args.base_model) if args.base_model else None
    keys = _make_keys(args.keys, args.record_s + args.control_s)
    row, record, _ = runner.run_validation(
        args.model, plan, keys, base_model=base, rating=args.rating,
        fit_kwargs={"k": args.k, "shrinkage": args.shrinkage,
                    "n_convs": args.n_convs, "dense_len": args.dense_len,
                    "train_cfg": TrainConfig(epochs=args.epochs, seed=seed,
                                             learning_rate=args.learning_rate,
                                             batch_size=args.batch_size)}
        if args.model == "cnn" else
        {"k": args.k, "shrinkage": args.shrinkage})
    _echo_config("validate", {"model": args.model, "source": args.source,
                              "record_s": args.record_s,
                              "control_s": args.control_s, "out": args.out})
    print(f"training accuracy: {row.training_accuracy:.4f}")
    print(f"boxes caught: {row.boxes_caught}  max streak: {row.max_streak}  "
          f"rating: {row.user_rating if row.user_rating else '-'}")
    out = Path(args.out)
    header = "model,seed,training_accuracy,boxes_caught,max_streak,user_rating\n"
    line = (f"{row.model_kind},{seed},{row.training_accuracy:.6f},"
            f"{row.boxes_caught},{row.max_streak},"
            f"{row.user_rating if row.user_rating else ''}\n")
    if not out.exists():
        out.write_text(header + line)
    else:
        with open(out, "a") as fh:
            fh.write(line)
    if args.session_out:
        save_session(record, args.session_out)
        print(f"wrote {args.session_out}")
    print(f"appended row to {args.out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    record = load_session(args.session)
    mismatches = sum(1 for ex in record.frames
                     if record.key_log.label_at(ex.t) != ex.label)
    total = len(record.frames)
    if args.model:
        model = load_model(args.model)
        from .features import normalized_matrix
        from .models import predict_labels
        x = normalized_matrix([ex.features for ex in record.frames], model.norm)
        predicted = predict_labels(model, x)
        truth = np.array([int(ex.label) for ex in record.frames])
        print(f"model agreement: {float((predicted == truth).mean()):.4f}")
    if mismatches:
        print(f"labels: {total - mismatches}/{total} reproduced "
              f"({mismatches} mismatches)")
        raise CorruptFile("stored labels do not reproduce from the key log")
    print("labels: 100% reproduced")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .engine.server import serve
    pcfg = _pipeline_config(args)
    print(f"serving on {args.bind}, sessions in {args.data_dir}")
    serve(bind=args.bind, data_dir=args.data_dir, pcfg=pcfg)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mindloop",
        description="Motor-imagery EEG engine: record, train, and play.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file of flag defaults (same layout as "
                             "session headers' config echo)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic raw recording")
    _add_common(p); _add_synth(p)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--schedule", type=str, default="none:3,left:3,right:3,both:3")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("record", help="run a headless training session")
    _add_common(p); _add_synth(p)
    p.add_argument("--source", type=str, default="synthetic")
    p.add_argument("--duration", type=float, default=300.0)
    p.add_argument("--subject", type=str, default="anon")
    p.add_argument("--keys", type=str, default="pilot",
                   help="'pilot' or 'schedule:none:3,left:3,...'")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("train", help="consolidate, balance, split, fit, evaluate")
    _add_common(p)
    p.add_argument("--sessions", type=str, nargs="+", required=True)
    p.add_argument("--model", type=str, choices=("knn", "lda", "cnn"), required=True)
    p.add_argument("--consolidate-fraction", type=float, default=1.0)
    p.add_argument("--split", type=str, choices=("random", "temporal"),
                   default="random")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--shrinkage", type=float, default=1e-3)
    p.add_argument("--n-convs", type=int, default=2)
    p.add_argument("--dense-len", type=int, default=200)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train the CNN architecture grid")
    _add_common(p)
    p.add_argument("--sessions", type=str, nargs="+", required=True)
    p.add_argument("--dataset", type=str, nargs="+",
                   default=["full=1.0", "10pct=0.1"],
                   help="NAME=FRACTION[:SUBJECT], e.g. full=1.0 user2=1.0:p2")
    p.add_argument("--grid-n", type=str, default="1,2,3,4")
    p.add_argument("--grid-l", type=str, default="100,200,400,800,1600,3200")
    p.add_argument("--split", type=str, choices=("random", "temporal"),
                   default="random")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="30s record + fit + 30s model control")
    _add_common(p); _add_synth(p)
    p.add_argument("--source", type=str, default="synthetic")
    p.add_argument("--model", type=str, choices=("knn", "lda", "cnn"), required=True)
    p.add_argument("--base-model", type=str, default=None,
                   help="pre-trained CNN file to retune (transfer)")
    p.add_argument("--record-s", type=float, default=30.0)
    p.add_argument("--control-s", type=float, default=30.0)
    p.add_argument("--subject", type=str, default="anon")
    p.add_argument("--keys", type=str, default="pilot")
    p.add_argument("--smoothing", type=int, default=3,
                   help="majority span for model commands; 1 = raw argmax")
    p.add_argument("--rating", type=int, default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--shrinkage", type=float, default=1e-3)
    p.add_argument("--n-convs", type=int, default=2)
    p.add_argument("--dense-len", type=int, default=200)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--session-out", type=str, default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="verify a stored session relabels identically")
    p.add_argument("--session", type=str, required=True)
    p.add_argument("--model", type=str, default=None,
                   help="optional model file to re-run predictions")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the WebSocket/HTTP game service")
    _add_common(p)
    p.add_argument("--bind", type=str, default="127.0.0.1:8323")
    p.add_argument("--data-dir", type=str, default="./sessions")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # subcommand defaults live on the subparser, so config-file
        # defaults must be installed there before the re-parse
        doc = json.loads(Path(args.config).read_text())
        sub_action = next(a for a in parser._actions
                          if isinstance(a, argparse._SubParsersAction))
        chosen = sub_action.choices[args.command]
        known = {a.dest for a in chosen._actions}
        chosen.set_defaults(**{k: v for k, v in doc.items() if k in known})
        args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceDetected as e:
        _fail(e, EXIT_DIVERGENCE)
        return EXIT_DIVERGENCE
    except _SOURCE_ERRORS as e:
        _fail(e, EXIT_SOURCE)
        return EXIT_SOURCE
    except _DATA_ERRORS as e:
        _fail(e, EXIT_DATA)
        return EXIT_DATA
    except MindloopError as e:
        _fail(e, EXIT_DATA)
        return EXIT_DATA


def _fail(e: BaseException, code: int) -> None:
    print(json.dumps({"error": type(e).__name__, "exit": code, "message": str(e)}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
