"""Command line entry point: ``tpil <experiment> [flags]`` and ``tpil plot``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, ExperimentFailed, TpilError
from .harness import KINDS, ExperimentConfig, default_config, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def parse_seeds(text: str) -> list[int]:
    "'100' means seeds 0..99; '1,5,7' is an explicit list; '3-9' a range."
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        if "-" in text[1:]:
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        n = int(text)
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    if n < 1:
        raise ConfigError("seed count must be >= 1")
    return list(range(n))


def load_config(kind: str, path: str | None) -> ExperimentConfig:
    if path is None:
        return default_config(kind)
    import yaml

    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    if data.setdefault("kind", kind) != kind:
        raise ConfigError(f"config {path} is for {data['kind']!r}, not {kind!r}")
    return ExperimentConfig.from_dict(data)


def build_config(args) -> ExperimentConfig:
    config = load_config(args.command, args.config)
    overrides = {}
    if args.seeds is not None:
        overrides["seeds"] = parse_seeds(args.seeds)
    for name in ("budget", "parallel", "gamma", "horizon", "backend"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.out is not None:
        overrides["out_dir"] = args.out
    return dataclasses.replace(config, **overrides).validate()


def summarize(result) -> str:
    last = {}
    for c in result.curves:
        last[c.strategy] = c
    lines = [f"{'strategy':<16}{'t':>6}{'mean':>10}{'ci_lo':>10}{'ci_hi':>10}{'n':>6}"]
    for c in last.values():
        lines.append(f"{c.strategy:<16}{c.t:>6}{c.mean:>10.4f}{c.ci_lo:>10.4f}{c.ci_hi:>10.4f}{c.n:>6}")
    return "\n".join(lines)


def plot_curves(curves_csv: str, output: str, title: str | None = None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    try:
        with open(curves_csv, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {curves_csv}: {exc.strerror or exc}") from exc
    series: dict = {}
    for r in rows:
        series.setdefault(r["strategy"], []).append((int(r["t"]), float(r["mean"]), float(r["ci_lo"]), float(r["ci_hi"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in series.items():
        t, m, lo, hi = zip(*sorted(pts))
        ax.plot(t, m, label=name)
        ax.fill_between(t, lo, hi, alpha=0.2)
    ax.set_xlabel("number of observed demonstrations")
    ax.set_ylabel("mean")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(output, dpi=120)
    plt.close(fig)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpil", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="YAML file with ExperimentConfig fields")
        p.add_argument("--seeds", help="seed count n (0..n-1), a list '1,5,7' or a range '3-9'")
        p.add_argument("--budget", type=int, help="demonstrations per run")
        p.add_argument("--out", default=None, help="output directory for runs.csv, curves.csv, manifest.json")
        p.add_argument("--parallel", type=int, help="worker processes (seeds run independently)")
        p.add_argument("--gamma", type=float, help="discount factor (default 0.3)")
        p.add_argument("--horizon", type=int, help="demonstration length (default 30)")
        p.add_argument("--backend", choices=("ipm", "highs"), help="LP backend")
    p = sub.add_parser("plot", help="render curves.csv as a line plot")
    p.add_argument("curves", help="path to curves.csv")
    p.add_argument("--output", "-o", default="curves.png")
    p.add_argument("--title")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            plot_curves(args.curves, args.output, args.title)
            print(f"wrote {args.output}")
            return EXIT_OK
        config = build_config(args)
        result = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.result is not None and exc.result.config.out_dir:
            print(f"partial results in {exc.result.config.out_dir}", file=sys.stderr)
        return EXIT_RUNTIME
    except TpilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result.curves:
        print(summarize(result))
    elif config.kind == "counterexample":
        worst = max(r.marginal_deviation for r in result.records)
        values = {r.p_left: r.value for r in result.records[:2]}
        print(f"always-left value {values[1.0]}, always-right value {values[0.0]}")
        print(f"largest marginal deviation over {len(result.records)} policies: {worst}")
    if config.out_dir:
        print(f"results in {config.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
