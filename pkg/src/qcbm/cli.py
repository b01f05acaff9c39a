"""Command-line pipeline: datagen, train, sample, eval, lcd, fraction-study.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .ansatz import evaluate
from .config import RunConfig, load_config
from .datagen import IngestionError, load_csv, save_csv, synthesize
from .encoding import TargetDistribution, build_target, fit_binning, rebin_counts
from .lcd import noisy_loss, run_lcd, write_summary_csv, write_trace_csv
from .metrics import build_report, data_fraction_study, repeated_sampling_stats, sample_model, write_report
from .simulator import ConfigurationError, index_to_bitstring
from .training import (
    StepTimer,
    exact_loss,
    load_checkpoint,
    save_checkpoint,
    train,
    write_loss_csv,
)

log = logging.getLogger("qcbm")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: Optional[RunConfig], seeds: dict,
                   inputs: dict, outputs: list, timings: dict, extra: Optional[dict] = None) -> Path:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config.to_dict() if config is not None else None,
        "seeds": seeds,
        "inputs": {name: {"path": str(p), "sha256": sha256(p)} for name, p in inputs.items()},
        "outputs": [{"path": Path(p).name, "sha256": sha256(p)} for p in outputs],
        "timings": timings,
    }
    if extra:
        manifest.update(extra)
    path = out_dir / f"manifest_{command.replace('-', '_')}.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def _load_data(args, config: RunConfig):
    path = args.data or config.data.path
    if path is None:
        raise UsageError("no data file given (use --data or data.path)")
    return Path(path), load_csv(path, config.data.features)


def _fit(config: RunConfig, data):
    scheme = fit_binning(data, [int(q) for q in config.binning.qubits_per_feature], config.binning.edge_mode)
    return scheme, build_target(data, scheme)


def cmd_datagen(args, config: RunConfig, out: Path) -> None:
    if args.seed is not None:
        config = config.with_overrides(datagen={"seed": args.seed})
    t0 = time.perf_counter()
    data = synthesize(config.datagen)
    path = out / "data.csv"
    save_csv(data, path)
    corr = np.corrcoef(data.values, rowvar=False)
    achieved = {
        f"{data.names[i]}-{data.names[j]}": float(corr[i, j])
        for i in range(data.num_features) for j in range(i + 1, data.num_features)
    }
    write_manifest(out, "datagen", config, {"datagen": config.datagen.seed}, {}, [path],
                   {"total_s": time.perf_counter() - t0}, {"achieved_correlation": achieved})
    print(f"wrote {data.num_events} events to {path}; pearson {achieved}")


def cmd_train(args, config: RunConfig, out: Path) -> None:
    if args.seed is not None:
        config = config.with_overrides(training={"seed": args.seed})
    data_path, data = _load_data(args, config)
    scheme, target = _fit(config, data)
    t0 = time.perf_counter()
    timer = StepTimer()
    ckpt = out / "checkpoint.json"
    state = train(
        config.circuit, target, config.training, checkpoint_path=ckpt, workers=args.threads,
        callback=timer, checkpoint_extra={"scheme": scheme, "target": target.probabilities},
    )
    loss_csv = out / "loss.csv"
    write_loss_csv(loss_csv, state.loss_history)
    write_manifest(
        out, "train", config, {"training": config.training.seed}, {"data": data_path}, [ckpt, loss_csv],
        {"total_s": time.perf_counter() - t0, "step_wall_s": timer.elapsed},
        {"final_js": state.loss_history[-1], "rejected_rows": data.rejected},
    )
    print(f"trained {state.step} steps; final JS {state.loss_history[-1]:.6g}; checkpoint {ckpt}")


def _require_checkpoint(path):
    if path is None:
        raise UsageError("--checkpoint is required")
    ckpt = load_checkpoint(path)
    if ckpt.scheme is None or ckpt.target is None:
        raise ValueError(f"{path} has no binning scheme/target; train it with the CLI")
    return ckpt


def cmd_sample(args, config: Optional[RunConfig], out: Path) -> None:
    ckpt = _require_checkpoint(args.checkpoint)
    seed = 0 if args.seed is None else args.seed
    n_shots = args.n_shots
    if n_shots is None:
        n_shots = config.eval.sample_shots if config is not None else 8192
    t0 = time.perf_counter()
    counts, synthetic = sample_model(ckpt.spec, ckpt.state.theta, n_shots, ckpt.scheme, seed=seed)
    samples = out / "samples.csv"
    save_csv(synthetic, samples)
    counts_csv = out / "sample_counts.csv"
    with counts_csv.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bitstring", "count"])
        for i in np.flatnonzero(counts):
            writer.writerow([index_to_bitstring(int(i), ckpt.spec.num_qubits), int(counts[i])])
    consistent = bool(np.array_equal(rebin_counts(synthetic, ckpt.scheme), counts))
    write_manifest(out, "sample", config, {"sample": seed}, {"checkpoint": Path(args.checkpoint)},
                   [samples, counts_csv], {"total_s": time.perf_counter() - t0},
                   {"n_shots": n_shots, "rebin_matches_counts": consistent})
    print(f"wrote {synthetic.num_events} synthetic events to {samples}")


def cmd_eval(args, config: RunConfig, out: Path) -> None:
    if args.seed is not None:
        config = config.with_overrides(eval={"seed": args.seed})
    ckpt = _require_checkpoint(args.checkpoint)
    data_path, data = _load_data(args, config)
    # reuse the checkpoint's binning so bitstrings keep their meaning
    target = build_target(data, ckpt.scheme)
    t0 = time.perf_counter()
    model = evaluate(ckpt.spec, ckpt.state.theta)
    stats_seq, sample_seq = np.random.SeedSequence(config.eval.seed).spawn(2)
    js_mean, js_std = repeated_sampling_stats(
        ckpt.spec, ckpt.state.theta, target, config.eval.n_shots, config.eval.repetitions,
        seed=np.random.default_rng(stats_seq),
    )
    _, synthetic = sample_model(ckpt.spec, ckpt.state.theta, config.eval.sample_shots, ckpt.scheme, seed=sample_seq)
    report = build_report(target, model, ckpt.scheme, synthetic, js_mean, js_std, truth=data)
    paths = write_report(report, out)
    write_manifest(out, "eval", config, {"eval": config.eval.seed},
                   {"checkpoint": Path(args.checkpoint), "data": data_path}, paths,
                   {"total_s": time.perf_counter() - t0})
    print(json.dumps(report.to_dict(), indent=2))


def cmd_lcd(args, config: RunConfig, out: Path) -> None:
    if args.seed is not None:
        config = config.with_overrides(lcd={"seed": args.seed})
    ckpt = _require_checkpoint(args.checkpoint)
    spec, target = ckpt.spec, ckpt.target
    t0 = time.perf_counter()
    result = run_lcd(spec, ckpt.state.theta, target, config.lcd, workers=args.threads)
    noise = config.lcd.noise
    before = {"noisy_js": noisy_loss(spec, ckpt.state.theta, target, noise), "exact_js": exact_loss(spec, ckpt.state.theta, target)}
    after = {"noisy_js": noisy_loss(spec, result.best_theta, target, noise), "exact_js": exact_loss(spec, result.best_theta, target)}
    state = ckpt.state
    state.theta = result.best_theta
    tuned = out / "checkpoint_lcd.json"
    save_checkpoint(tuned, spec, state, ckpt.config, ckpt.scheme, target)
    trace, summary = out / "lcd_trace.csv", out / "lcd_summary.csv"
    write_trace_csv(trace, result)
    write_summary_csv(summary, result)
    write_manifest(
        out, "lcd", config, {"lcd": config.lcd.seed}, {"checkpoint": Path(args.checkpoint)},
        [tuned, trace, summary], {"total_s": time.perf_counter() - t0},
        {"before": before, "after": after, "final_theta": result.theta.tolist(),
         "grid": result.grid.tolist(), "skipped_coordinates": sum(s.skipped for s in result.steps)},
    )
    print(f"LCD: noisy JS {before['noisy_js']:.6g} -> {after['noisy_js']:.6g}; tuned checkpoint {tuned}")


def cmd_fraction_study(args, config: RunConfig, out: Path) -> None:
    if args.seed is not None:
        config = config.with_overrides(eval={"seed": args.seed})
    data_path, data = _load_data(args, config)
    scheme, _ = _fit(config, data)
    t0 = time.perf_counter()
    results = data_fraction_study(
        data, config.eval.fractions, config.circuit, scheme, config.training,
        config.eval.repetitions, n_shots=config.eval.n_shots, seed=config.eval.seed, workers=args.threads,
    )
    path = out / "fraction_study.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fraction", "n_events", "js_mean", "js_std", "final_train_js"])
        for r in results:
            writer.writerow([repr(r.fraction), r.n_events, repr(r.js_mean), repr(r.js_std), repr(r.final_train_js)])
    write_manifest(out, "fraction-study", config, {"eval": config.eval.seed, "training": config.training.seed},
                   {"data": data_path}, [path], {"total_s": time.perf_counter() - t0})
    print(f"wrote {len(results)} fraction rows to {path}")


COMMANDS = {
    "datagen": cmd_datagen,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "lcd": cmd_lcd,
    "fraction-study": cmd_fraction_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run-config YAML file")
        p.add_argument("--out-dir", default=".", help="directory for outputs (created if missing)")
        p.add_argument("--seed", type=int, help="override the command's seed from the config")
        p.add_argument("--threads", type=int, default=1, help="maximum worker threads for circuit batches")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("train", "eval", "fraction-study"):
            p.add_argument("--data", help="CSV dataset (overrides data.path)")
        if name in ("sample", "eval", "lcd"):
            p.add_argument("--checkpoint", help="checkpoint JSON written by `train` or `lcd`")
        if name == "sample":
            p.add_argument("--n-shots", type=int, help="number of samples to draw")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.config is None and args.command != "sample":
            raise UsageError("--config is required")
        config = load_config(args.config) if args.config else None
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, config, out)
    except (UsageError, ConfigurationError) as exc:
        print(f"qcbm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"qcbm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        print(f"qcbm: internal error: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
