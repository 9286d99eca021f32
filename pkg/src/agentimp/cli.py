"""Command-line entry point: ``agentimp {gen,train,eval,heatmap}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Log verbosity comes from ``AGENTIMP_LOG_LEVEL`` (default INFO); logs go to
stderr, machine-readable outputs to files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from agentimp import __version__
from agentimp.errors import ConfigError, DataError, NumericError, ShapeError

log = logging.getLogger("agentimp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _ks(text):
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        if item.lower() == "all":
            out.append("all")
        else:
            try:
                k = int(item)
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad k {item!r}") from None
            if k < 1:
                raise argparse.ArgumentTypeError(f"k must be >= 1, got {k}")
            out.append(k)
    if not out:
        raise argparse.ArgumentTypeError("no k values given")
    return out


def _write_config(path: Path, command: str, args: argparse.Namespace, extra: dict | None = None) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}
    payload = {"command": command, "version": __version__, "args": cfg}
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sidecar(out: Path, suffix: str) -> Path:
    return out.with_name(out.name + suffix)


def _load_scenes(path: Path):
    from agentimp.scenegen import read_scenes

    if not path.exists():
        raise DataError(f"scene file {path} not found")
    scenes = read_scenes(path)
    if not scenes:
        raise DataError(f"scene file {path} contains no scenes")
    return scenes


def _load_model(path: Path):
    from agentimp.model import load_params

    if not path.exists():
        raise DataError(f"weight file {path} not found")
    return load_params(path)


def _check_writable(path: Path) -> None:
    parent = path.parent if path.parent != Path("") else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise DataError(f"cannot write to {path}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_gen(args) -> int:
    from agentimp.scenegen import DEFAULT_MIX, GenConfig, generate, parse_mix, read_scenes, write_scenes

    mix = parse_mix(args.mix) if args.mix else dict(DEFAULT_MIX)
    _check_writable(args.out)
    config = GenConfig(num_scenes=args.num_scenes, seed=args.seed, scenario_mix=mix)
    scenes = generate(config)
    n = write_scenes(args.out, scenes)
    if len(read_scenes(args.out)) != n:
        raise DataError(f"{args.out}: read-back found a different scene count")
    cfg = dataclasses.asdict(config)
    _write_config(_sidecar(args.out, ".config.json"), "gen", args, {"resolved": cfg})
    log.info("wrote %d scenes to %s", n, args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    from agentimp.model import ModelConfig, TrainConfig, load_params, save_params, train

    scenes = _load_scenes(args.data)
    _check_writable(args.out)
    init = _load_model(args.init) if args.init else None
    if init is not None:
        mc = init.config
        if args.layer_kind is not None and args.layer_kind != mc.layer_kind:
            raise UsageError(f"--layer-kind {args.layer_kind} conflicts with --init weights ({mc.layer_kind})")
        if args.layers is not None and args.layers != mc.num_layers:
            raise UsageError(f"--layers {args.layers} conflicts with --init weights ({mc.num_layers})")
    else:
        mc = ModelConfig(layer_kind=args.layer_kind or "lanegcn", num_layers=args.layers or 2, width=args.width)
    tc = TrainConfig(epochs=args.epochs, lr=args.lr, batch=args.batch, seed=args.seed)

    losses_path = _sidecar(args.out, ".loss.csv")

    def on_epoch(epoch, loss):
        print(f"epoch {epoch} loss {loss:.6f}", flush=True)

    result = train(scenes, tc, mc, init=init, on_epoch=on_epoch)
    save_params(result.params, args.out)
    if not load_params(args.out).equal(result.params):
        raise DataError(f"{args.out}: weights did not round-trip")
    with open(losses_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for n, loss in enumerate(result.losses, 1):
            fh.write(f"{n},{loss!r}\n")
    _write_config(
        _sidecar(args.out, ".config.json"), "train", args,
        {"resolved": {"model": dataclasses.asdict(result.params.config), "train": dataclasses.asdict(tc)}},
    )
    log.info("wrote weights to %s", args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from agentimp.evalharness import evaluate, write_report

    params = _load_model(args.model)
    scenes = _load_scenes(args.data)
    rep = evaluate(params, scenes, args.ks, args.agg, hist_bins=args.hist_bins, hist_max=args.hist_max)
    paths = write_report(rep, args.report_dir)
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise DataError(f"report files missing after write: {missing}")
    _write_config(args.report_dir / "config.json", "eval", args)
    for row in rep.removal.rows:
        log.info("k=%s n=%d pearson(traj)=%s", row.label, row.n, row.traj_pearson)
    log.info("wrote report to %s (%s)", args.report_dir, ", ".join(sorted(p.name for p in paths.values())))
    return EXIT_OK


def cmd_heatmap(args) -> int:
    from agentimp.evalharness import attention_heatmap
    from agentimp.evalharness.report import heatmap_summary, read_heatmap_csv, write_heatmap_csv, write_json

    params = _load_model(args.model)
    scenes = _load_scenes(args.data)
    _check_writable(args.out)
    hm = attention_heatmap(params, scenes, cell=args.cell, extent=args.extent, agg_mode=args.agg)
    write_heatmap_csv(args.out, hm)
    if read_heatmap_csv(args.out)[2].shape != hm.mass.shape:
        raise DataError(f"{args.out}: heatmap grid did not round-trip")
    write_json(_sidecar(args.out, ".json"), heatmap_summary(hm))
    _write_config(_sidecar(args.out, ".config.json"), "heatmap", args)
    if hm.overflow_count:
        log.warning("%d agent(s) outside the grid; overflow mass %.6f", hm.overflow_count, hm.overflow_mass)
    log.info("front half-plane mass fraction %.4f", hm.front_fraction())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agentimp", description="Attention-derived agent importance: data, training, evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate synthetic scenes (JSON lines)")
    g.add_argument("--num-scenes", type=_positive_int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mix", default=None, help="scenario weights, e.g. lead_brake=0.3,cut_in=0.2")
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the trajectory predictor")
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--epochs", type=_positive_int, default=60)
    t.add_argument("--lr", type=_nonneg_float, default=2e-3)
    t.add_argument("--batch", type=_positive_int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--layer-kind", choices=("lanegcn", "transformer"), default=None, help="default lanegcn")
    t.add_argument("--layers", type=_positive_int, default=None, help="interaction layers (default 2)")
    t.add_argument("--width", type=_positive_int, default=64)
    t.add_argument("--init", type=Path, default=None, help="resume from these weights")
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="agent-removal evaluation and report tables")
    e.add_argument("--model", type=Path, required=True)
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--ks", type=_ks, default=[1, 2, 3, "all"])
    e.add_argument("--agg", choices=("max", "mean", "last"), default="last")
    e.add_argument("--hist-bins", type=_positive_int, default=30)
    e.add_argument("--hist-max", type=_positive_float, default=3.0)
    e.add_argument("--report-dir", type=Path, required=True)
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("heatmap", help="ego-frame attention heatmap")
    h.add_argument("--model", type=Path, required=True)
    h.add_argument("--data", type=Path, required=True)
    h.add_argument("--cell", type=_positive_float, default=4.0)
    h.add_argument("--extent", type=_positive_float, default=60.0)
    h.add_argument("--agg", choices=("max", "mean", "last"), default="last")
    h.add_argument("--out", type=Path, required=True)
    h.set_defaults(func=cmd_heatmap)
    return p


def _setup_logging() -> None:
    level = os.environ.get("AGENTIMP_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, ShapeError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
