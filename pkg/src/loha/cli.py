"""Command-line entry point.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines whose
keys are the long flag names (``weights = 2,8``).  Repeatable flags may be
given on several lines.  Anything passed on the command line wins over the
file.  Exit status: 0 ok, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

log = logging.getLogger("loha")

DEFAULTS = {
    "domain": "car",
    "K": 4,
    "weights": [2.0, 8.0, 32.0, 128.0],
    "seeds": [0, 1, 2],
    "queries": 10,
    "cap": None,
    "out": ".",
    "map": [],
    "random": [],
    "test_map": [],
    "test_random": [],
    "methods": ["wastar", "astar_tl"],
    "limit": 2_000_000,
    "min_separation": None,
    "w": 4.0,
    "seed": 0,
    "examples": 100_000,
    "queries_per_map": 200,
    "epochs": 100,
    "batch_size": 32,
    "lr": 1e-3,
    "filters": 8,
    "holdout": 0.1,
    "Ks": [2, 4, 6],
    "test_examples": 5000,
    "n": 10,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv(kind):
    def conv(text):
        try:
            return [kind(t) for t in text.replace(" ", "").split(",") if t]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}")
    return conv


def _maps(p):
    p.add_argument("--map", action="append", metavar="PATH", help="map file (repeatable)")
    p.add_argument("--random", action="append", nargs=4, metavar=("W", "H", "PCT", "SEED"),
                   help="random map recipe (repeatable)")


def _test_maps(p):
    p.add_argument("--test-map", action="append", metavar="PATH")
    p.add_argument("--test-random", action="append", nargs=4, metavar=("W", "H", "PCT", "SEED"))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--domain", choices=("grid", "car"))
    common.add_argument("--K", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    p = _Parser(prog="loha", description="Local-heuristic search experiments.")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    s = sub.add_parser("gen-maps", parents=[common], help="write random maps as .map files")
    _maps(s)

    s = sub.add_parser("gen-scenarios", parents=[common], help="sample solvable start/goal pairs")
    _maps(s)
    s.add_argument("--n", type=int)
    s.add_argument("--min-separation", type=float)

    s = sub.add_parser("collect", parents=[common], help="collect local-heuristic training data")
    _maps(s)
    s.add_argument("--w", type=float, help="weight of the data-generating search")
    s.add_argument("--cap", type=int)
    s.add_argument("--examples", type=int)
    s.add_argument("--queries-per-map", type=int)
    s.add_argument("--min-separation", type=float)

    s = sub.add_parser("train", parents=[common], help="train a model on a dataset file")
    s.add_argument("--data", metavar="PATH")
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--filters", type=int)
    s.add_argument("--holdout", type=float)

    s = sub.add_parser("bench", parents=[common], help="run the method x weight grid")
    _maps(s)
    _test_maps(s)
    s.add_argument("--methods", type=_csv(str))
    s.add_argument("--weights", type=_csv(float))
    s.add_argument("--seeds", type=_csv(int))
    s.add_argument("--queries", type=int)
    s.add_argument("--cap", type=int)
    s.add_argument("--model", metavar="PATH")
    s.add_argument("--limit", type=int, help="expansion limit per query")
    s.add_argument("--min-separation", type=float)

    s = sub.add_parser("ablate-k", parents=[common], help="train/test loss as a function of K")
    _maps(s)
    _test_maps(s)
    s.add_argument("--Ks", type=_csv(int))
    s.add_argument("--seeds", type=_csv(int))
    s.add_argument("--examples", type=int)
    s.add_argument("--test-examples", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--w", type=float)
    s.add_argument("--cap", type=int)
    s.add_argument("--queries-per-map", type=int)
    s.add_argument("--holdout", type=float)

    s = sub.add_parser("report", parents=[common], help="aggregate a rows CSV into tables")
    s.add_argument("--rows", metavar="PATH")
    return p


def read_config(path) -> list:
    """``[(key, value), ...]`` in file order; ``#`` starts a comment."""
    items = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (t.strip() for t in line.split("=", 1))
        if not k:
            raise UsageError(f"{path}:{n}: empty key")
        items.append((k, v))
    return items


def _config_argv(items) -> list:
    argv = []
    for k, v in items:
        flag = "--" + k.replace("_", "-") if k not in ("K", "Ks") else "--" + k
        if k in ("random", "test_random", "test-random"):
            argv += [flag, *v.split()]
        elif k == "verbose":
            if v.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
        else:
            argv += [flag, v]
    return argv


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        raise UsageError(parser.format_usage().strip())
    merged = dict.fromkeys(vars(args))
    if args.config:
        try:
            items = read_config(args.config)
        except OSError as e:
            raise UsageError(f"cannot read config: {e}")
        cfg = parser.parse_args([args.cmd] + _config_argv(items))
        merged.update({k: v for k, v in vars(cfg).items() if v is not None})
    merged.update({k: v for k, v in vars(args).items() if v is not None})
    for k, v in DEFAULTS.items():
        if k in merged and merged[k] is None:
            merged[k] = v
    return argparse.Namespace(**merged)


def _sources(args, test=False):
    from .bench import MapSource
    out = [MapSource("train", path=p) for p in args.map]
    out += [MapSource("train", random=_recipe(r)) for r in args.random]
    if test:
        out += [MapSource("test", path=p) for p in args.test_map]
        out += [MapSource("test", random=_recipe(r)) for r in args.test_random]
    return out


def _recipe(r):
    try:
        w, h, pct, seed = int(r[0]), int(r[1]), float(r[2]), int(r[3])
    except ValueError:
        raise UsageError(f"--random expects W H PCT SEED, got {' '.join(r)}")
    if w < 1 or h < 1 or not 0 <= pct <= 100:
        raise UsageError(f"bad random map recipe {' '.join(r)}")
    return (w, h, pct, seed)


def _need(cond, msg):
    if not cond:
        raise UsageError(msg)


def _fmt_state(s):
    return ",".join(str(v) for v in s)


def cmd_gen_maps(args, out: Path):
    from .gridmap import save_map
    srcs = _sources(args)
    _need(srcs, "gen-maps needs at least one --random or --map")
    for src in srcs:
        m = src.load()
        path = out / f"{m.name}.map"
        save_map(m, path)
        print(path)


def cmd_gen_scenarios(args, out: Path):
    from .bench import scenario_seed
    from .scenarios import generate_scenarios
    srcs = _sources(args)
    _need(srcs, "gen-scenarios needs a map")
    _need(args.n >= 1, "--n must be >= 1")
    path = out / "scenarios.txt"
    with open(path, "w") as f:
        f.write("map\tquery\tstart\tgoal\n")
        for src in srcs:
            m = src.load()
            pairs = generate_scenarios(m, args.domain, args.n, scenario_seed(m.name, args.seed),
                                       args.min_separation)
            for i, (s, g) in enumerate(pairs):
                f.write(f"{m.name}\t{i}\t{_fmt_state(s)}\t{_fmt_state(g)}\n")
    print(path)


def cmd_collect(args, out: Path):
    from .learn.dataset import collect_dataset, save_dataset
    srcs = _sources(args)
    _need(srcs, "collect needs a map")
    _need(args.examples >= 0, "--examples must be >= 0")
    maps = [s.load() for s in srcs]
    t0 = time.perf_counter()
    ds = collect_dataset(maps, args.queries_per_map, args.w, args.K, args.cap, args.seed, args.examples,
                         args.domain, args.min_separation)
    path = out / "dataset.txt"
    save_dataset(ds, path)
    log.info("collected %d examples in %.1fs", len(ds), time.perf_counter() - t0)
    print(path)


def cmd_train(args, out: Path):
    from .learn.dataset import load_dataset
    from .learn.network import evaluate_loss, save_model, train
    _need(args.data, "train needs --data")
    ds = load_dataset(args.data)
    _need(0 <= args.holdout < 1, "--holdout must be in [0, 1)")
    tr, held = ds.split(args.holdout, args.seed) if args.holdout > 0 else (ds, None)

    def progress(epoch, loss):
        log.info("epoch %d loss %.6f", epoch + 1, loss)

    model, hist = train(tr, args.epochs, args.batch_size, args.lr, args.seed, args.filters, progress)
    path = out / "model.loha"
    save_model(model, path)
    msg = f"train loss {hist[-1]:.6f}" if hist else "no epochs"
    if held is not None and len(held):
        msg += f", held-out loss {evaluate_loss(model, held):.6f} ({len(held)} examples)"
    print(msg)
    print(path)


def cmd_bench(args, out: Path):
    from .bench import ExperimentConfig, aggregate, report_csv, report_markdown, run_experiment, write_rows
    cfg = ExperimentConfig(maps=_sources(args, test=True), domain=args.domain, methods=tuple(args.methods),
                           weights=tuple(args.weights), K=args.K, seeds=tuple(args.seeds),
                           queries=args.queries, expansion_limit=args.limit, model=args.model,
                           cap=args.cap, min_separation=args.min_separation)
    try:
        cfg.validate()
    except ValueError as e:
        raise UsageError(str(e))

    def progress(name, seed, part):
        log.info("%s seed %d: %d rows", name, seed, len(part))

    rows = run_experiment(cfg, progress)
    write_rows(rows, out / "rows.csv")
    rep = aggregate(rows)
    report_csv(rep, out / "report.csv")
    md = report_markdown(rep)
    (out / "report.md").write_text(md)
    print(md, end="")


def cmd_ablate_k(args, out: Path):
    from .bench import ablate_k, ablation_table, write_ablation_csv
    train_srcs = _sources(args)
    test_srcs = [s for s in _sources(args, test=True) if s.split == "test"]
    _need(train_srcs and test_srcs, "ablate-k needs train maps and --test-map/--test-random")
    _need(args.Ks, "--Ks must be nonempty")

    def progress(r):
        log.info("K=%d seed=%d train %.4f test %.4f", r.K, r.seed, r.train_loss, r.test_loss)

    rows = ablate_k([s.load() for s in train_srcs], [s.load() for s in test_srcs], args.Ks, args.seeds,
                    args.domain, args.examples, args.test_examples, args.epochs, args.batch_size, args.lr,
                    args.w, args.cap, args.queries_per_map, args.holdout if args.holdout > 0 else 0.2,
                    progress)
    write_ablation_csv(rows, out / "ablation.csv")
    md = ablation_table(rows)
    (out / "ablation.md").write_text(md)
    print(md, end="")


def cmd_report(args, out: Path):
    from .bench import aggregate, read_rows, report_csv, report_markdown
    path = Path(args.rows) if args.rows else out / "rows.csv"
    rows = read_rows(path)
    rep = aggregate(rows)
    report_csv(rep, out / "report.csv")
    md = report_markdown(rep)
    (out / "report.md").write_text(md)
    print(md, end="")


COMMANDS = {
    "gen-maps": cmd_gen_maps,
    "gen-scenarios": cmd_gen_scenarios,
    "collect": cmd_collect,
    "train": cmd_train,
    "bench": cmd_bench,
    "ablate-k": cmd_ablate_k,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return 0 if e.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.cmd](args, out)
    except UsageError as e:
        print(f"loha {args.cmd}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"loha {args.cmd}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
