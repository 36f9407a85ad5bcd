"""Command-line entry point: gen-data, train, track, eval, grad-check, ablate."""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, from_mapping, parse_kv, split_config, to_lines
from .data import (SyntheticConfig, easy_config, generate_dataset, list_sequences, load_dataset,
                   load_sequence, save_dataset)
from .gradcheck import format_results, run_suite
from .loss import LossWeights, format_log_line
from .metrics import EvalReport, evaluate
from .model import Model, ModelConfig, load_checkpoint, save_checkpoint
from .tensor import NumericError
from .track import Tracker, read_results, write_results
from .train import TrainConfig, Trainer

log = logging.getLogger("autoregtrack")

EXIT_USAGE = 2
EXIT_NUMERIC = 3
CONFIG_CLASSES = (ModelConfig, TrainConfig, LossWeights, SyntheticConfig)
# alternative spellings accepted in ablation grids
ALIASES = {"masking_ratio": "mask_ratio"}


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    weights: LossWeights
    synthetic: SyntheticConfig


def load_run_config(path: str | None, seed: int | None = None,
                    overrides: dict | None = None) -> RunConfig:
    mapping = parse_kv(Path(path).read_text(encoding="utf-8")) if path else {}
    mapping.update(overrides or {})
    parts = split_config(mapping, *CONFIG_CLASSES)
    objs = [from_mapping(cls, part) for cls, part in zip(CONFIG_CLASSES, parts)]
    run = RunConfig(*objs)
    if seed is not None:
        run.train.seed = seed
    return run


# -- manifest ------------------------------------------------------------------
class Manifest:
    """Run record written to ``<out>/manifest.txt`` before any other output."""

    def __init__(self, out: Path, command: str, config: str | None, seed: int | None):
        self.path = out / "manifest.txt"
        self.fields = {"command": command, "config": config or "", "seed": seed,
                       "version": __version__, "start": _stamp(), "end": "",
                       "out": str(out)}
        out.mkdir(parents=True, exist_ok=True)
        self.write()

    def write(self):
        self.path.write_text("".join(f"{k} = {v}\n" for k, v in self.fields.items()))

    def finish(self, status: str = "ok"):
        self.fields["end"] = _stamp()
        self.fields["status"] = status
        self.write()


def _stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime())


# -- commands -------------------------------------------------------------------
def cmd_gen_data(args, run: RunConfig, out: Path) -> int:
    seed = run.train.seed
    cfg = easy_config(length=run.synthetic.length) if args.easy else run.synthetic
    seqs = generate_dataset(cfg, args.count, seed)
    save_dataset(seqs, out, {"seed": seed})
    (out / "synthetic.txt").write_text("\n".join(to_lines(cfg)) + "\n")
    print(f"wrote {len(seqs)} sequences to {out}")
    return 0


def train_model(run: RunConfig, dataset, log_path: Path | None = None, echo: bool = False):
    model = Model(run.model, seed=run.train.seed)
    trainer = Trainer(model, dataset, run.train, run.weights)
    last = trainer.total_steps - 1
    fh = open(log_path, "w") if log_path else None
    try:
        if fh:
            fh.write("step\tce\tsiou\tmse\tl1\ttotal\tlr\n")

        def on_step(s):
            line = format_log_line(s.step, s.ce, s.siou, s.mse, s.l1, s.total, s.lr)
            if fh:
                fh.write(line + "\n")
            if echo and (s.step % 50 == 0 or s.step == last):
                print(line, flush=True)
        trainer.fit(callback=on_step)
    finally:
        if fh:
            fh.close()
    return model


def cmd_train(args, run: RunConfig, out: Path) -> int:
    if not args.dataset:
        raise UsageError("train needs --dataset")
    dataset = load_dataset(args.dataset)
    if not dataset:
        raise UsageError(f"no sequences under {args.dataset}")
    (out / "config.txt").write_text(
        "\n".join(to_lines(run.model) + to_lines(run.train) + to_lines(run.weights)) + "\n")
    model = train_model(run, dataset, out / "loss.tsv", echo=not args.quiet)
    save_checkpoint(out / "checkpoint.ckpt", run.model, model.params)
    print(f"checkpoint: {out / 'checkpoint.ckpt'}")
    return 0


def _track_one(ckpt: str, seq_dir: str, out_dir: str) -> tuple[str, float]:
    cfg, params = load_checkpoint(ckpt)
    seq = load_sequence(seq_dir)
    tracker = Tracker(Model(cfg, params))
    results = tracker.run(seq.frames, seq.boxes[0])
    times = tracker.last_state.times_ms
    mean_ms = float(np.mean(times)) if times else 0.0
    write_results(Path(out_dir) / f"{seq.name}.txt", results, mean_ms)
    return seq.name, mean_ms


def _fan_out(fn, jobs: int, arglists):
    if jobs <= 1:
        return [fn(*a) for a in arglists]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*arglists)))


def cmd_track(args, run: RunConfig, out: Path) -> int:
    if not args.checkpoint or not args.sequence:
        raise UsageError("track needs --checkpoint and --sequence")
    dirs = list_sequences(args.sequence)
    if not dirs:
        raise UsageError(f"no sequences under {args.sequence}")
    done = _fan_out(_track_one, args.jobs,
                    [(str(args.checkpoint), str(d), str(out)) for d in dirs])
    for name, ms in done:
        print(f"{name}\t{ms:.2f} ms/frame")
    return 0


def _eval_one(result_path: str, seq_dir: str):
    results, ms = read_results(result_path)
    seq = load_sequence(seq_dir)
    return seq.name, [b for b, _ in results], seq.boxes, ms


def cmd_eval(args, run: RunConfig, out: Path) -> int:
    if not args.results or not args.dataset:
        raise UsageError("eval needs --results and --dataset")
    res_dir = Path(args.results)
    pairs = []
    for d in list_sequences(args.dataset):
        name = load_sequence_name(d)
        path = res_dir / f"{name}.txt"
        if path.exists():
            pairs.append((str(path), str(d)))
    if not pairs:
        raise UsageError(f"no result files in {res_dir} match {args.dataset}")
    rows = _fan_out(_eval_one, args.jobs, pairs)
    report = evaluate({n: p for n, p, _, _ in rows}, {n: g for n, _, g, _ in rows},
                      {n: ms for n, _, _, ms in rows if ms is not None})
    _write_report(report, out)
    print(report.to_text(), end="")
    return 0


def load_sequence_name(d: Path) -> str:
    meta = d / "meta.txt"
    if meta.exists():
        return parse_kv(meta.read_text()).get("name", d.name)
    return d.name


def _write_report(report: EvalReport, out: Path):
    (out / "metrics.tsv").write_text(report.to_tsv())
    (out / "curve.tsv").write_text(report.curve_tsv())
    (out / "report.txt").write_text(report.to_text())


def cmd_grad_check(args, run: RunConfig, out: Path) -> int:
    results = run_suite(trials=args.trials, seed=run.train.seed)
    text = format_results(results)
    (out / "gradcheck.txt").write_text(text)
    print(text, end="")
    return 0 if all(r.ok for r in results) else 1


def parse_grid(specs: list[str]) -> list[tuple[str, list[str]]]:
    """``key=v1,v2`` items into (field, values), resolving aliases."""
    grid = []
    for spec in specs:
        if "=" not in spec:
            raise UsageError(f"grid item {spec!r} is not key=v1,v2,...")
        key, vals = spec.split("=", 1)
        key = ALIASES.get(key.strip(), key.strip())
        values = [v.strip() for v in vals.split(",") if v.strip()]
        if not values:
            raise UsageError(f"grid item {spec!r} has no values")
        grid.append((key, values))
    return grid


def cmd_ablate(args, run: RunConfig, out: Path) -> int:
    if not args.dataset:
        raise UsageError("ablate needs --dataset (training sequences)")
    grid = parse_grid(args.grid)
    train_set = load_dataset(args.dataset)
    eval_set = load_dataset(args.eval_dataset) if args.eval_dataset else train_set
    seeds = [run.train.seed + i for i in range(args.seeds)]
    keys = [k for k, _ in grid]
    header = keys + ["seed", "AO", "SR50", "AUC"]
    lines = ["\t".join(header + ["mean_AO"])]
    for combo in itertools.product(*[v for _, v in grid]):
        overrides = dict(zip(keys, combo))
        aos, rows = [], []
        for seed in seeds:
            cell = load_run_config(args.config, seed, overrides)
            model = train_model(cell, train_set)
            report = evaluate_model(model, eval_set)
            o = report.overall()
            aos.append(o.ao)
            rows.append(list(combo) + [str(seed), repr(o.ao), repr(o.sr50), repr(o.auc)])
        mean = repr(float(np.mean(aos)))
        for r in rows:
            lines.append("\t".join(r + [mean]))
        print("\t".join(f"{k}={v}" for k, v in overrides.items()) + f"\tmean_AO={float(mean):.4f}",
              flush=True)
    (out / "ablation.tsv").write_text("\n".join(lines) + "\n")
    return 0


def evaluate_model(model: Model, sequences) -> EvalReport:
    tracker = Tracker(model)
    preds, gts = {}, {}
    for seq in sequences:
        preds[seq.name] = [b for b, _ in tracker.run(seq.frames, seq.boxes[0])]
        gts[seq.name] = seq.boxes
    return evaluate(preds, gts)


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "track": cmd_track,
            "eval": cmd_eval, "grad-check": cmd_grad_check, "ablate": cmd_ablate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers (track/eval)")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="autoregtrack",
                                     description="Autoregressive single-object tracker.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write synthetic sequences")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--easy", action="store_true",
                   help="no occlusion, constant velocity, no distractors")

    p = sub.add_parser("train", parents=[common], help="train and write a checkpoint")
    p.add_argument("--dataset", help="directory of sequence directories")

    p = sub.add_parser("track", parents=[common], help="run a checkpoint over sequences")
    p.add_argument("--checkpoint")
    p.add_argument("--sequence", help="a sequence directory or a directory of them")

    p = sub.add_parser("eval", parents=[common], help="score result files")
    p.add_argument("--results", help="directory of result files from track")
    p.add_argument("--dataset", help="ground-truth sequence directories")

    p = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient suite")
    p.add_argument("--trials", type=int, default=10)

    p = sub.add_parser("ablate", parents=[common], help="train/eval over a toggle grid")
    p.add_argument("grid", nargs="+", help="key=v1,v2 items; the grid is their product")
    p.add_argument("--dataset", help="training sequences")
    p.add_argument("--eval-dataset", help="held-out sequences (defaults to --dataset)")
    p.add_argument("--seeds", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        run = load_run_config(args.config, args.seed)
        if args.command == "ablate":
            for key, values in parse_grid(args.grid):
                for v in values:
                    load_run_config(args.config, args.seed, {key: v})
    except (ConfigError, UsageError, OSError) as exc:
        parser.error(str(exc))
    except ValueError as exc:
        parser.error(f"invalid config: {exc}")
    words = sys.argv[1:] if argv is None else list(argv)
    manifest = Manifest(out, " ".join(words), args.config, run.train.seed)
    try:
        code = COMMANDS[args.command](args, run, out)
    except UsageError as exc:
        manifest.finish("usage error")
        print(f"autoregtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        manifest.finish("numeric failure")
        print(f"autoregtrack: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest.finish("ok" if code == 0 else f"exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
