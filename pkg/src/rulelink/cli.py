"""Command line entry point.

Settings come from built-in defaults, then an optional ``key=value``
properties file (``--config``), then command-line flags. Progress goes to
stderr; stdout only carries machine-readable summaries.

Exit codes: 0 success, 1 usage, 2 input or parse error, 3 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import pipeline
from .errors import ContractError, ParseError, RulelinkError, ValidationError
from .evaluation import evaluate, format_report
from .formats import (read_clusters, read_predictions, read_signatures, write_clusters,
                      write_predictions, write_signatures)
from .graph import load_graph
from .minhash import MinHashParams
from .plotting import plot_eval, plot_search
from .rules import parse_ruleset
from .search import SearchConfig, grid_search, prepare_units, random_search

log = logging.getLogger("rulelink")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

OUTPUT_NAMES = {
    "applymax": "predictions_max.txt",
    "applynoisy": "predictions_noisy.txt",
    "applynrnoisy": "predictions_nrnoisy.txt",
    "calcjacc": "signatures.tsv",
    "learnclusters": "clusters.txt",
    "eval": "eval.txt",
}


class InputError(RulelinkError):
    """A referenced input file is missing or unreadable."""


@dataclass
class RunConfig:
    action: str = ""
    train: str | None = None
    valid: str | None = None
    test: str | None = None
    rules: str | None = None
    out: str = "."
    clusters: str | None = None
    signatures: str | None = None
    predictions: str | None = None
    topk: int = 100
    seed: int = 42
    minhash_k: int = 128
    strategy: str = "random"
    step: float = 0.005
    resolution: float = 0.1
    iterations: int = 10000
    fitness_k: int | None = None
    threads: int = 1

    def validate(self) -> None:
        if self.threads < 1:
            raise ContractError(f"threads must be >= 1, got {self.threads}")
        if self.topk < 1:
            raise ContractError(f"topk must be >= 1, got {self.topk}")

    def out_path(self, name: str) -> Path:
        return Path(self.out) / name

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise InputError(f"no {name} path given (flag --{name} or '{name}=' in the config)")
            if not Path(value).is_file():
                raise InputError(f"{name} file not found: {value}")

    @property
    def minhash(self) -> MinHashParams:
        return MinHashParams(self.minhash_k, self.seed)

    @property
    def search(self) -> SearchConfig:
        return SearchConfig(self.strategy, self.step, self.iterations, self.resolution,
                            self.seed, self.fitness_k or self.topk)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value: str):
    kind = str(_TYPES[name])
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def read_properties(path) -> dict[str, object]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().lower().replace("-", "_").replace(".", "_")
            if not sep or key not in _TYPES or key == "action":
                raise ParseError(f"unknown or malformed setting {line!r}", path=path, line=lineno)
            try:
                out[key] = _coerce(key, value.strip())
            except ValueError:
                raise ParseError(f"bad value for {key}: {value.strip()!r}", path=path, line=lineno) from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value properties file")
    paths = {"train": "training triples", "valid": "validation triples", "test": "test triples",
             "rules": "rule file (predicted, correct, confidence, rule)",
             "clusters": "cluster file (default: OUT/clusters.txt)",
             "signatures": "signature file (default: OUT/signatures.tsv)",
             "predictions": "prediction file to evaluate (default: OUT/predictions_nrnoisy.txt)"}
    for name, text in paths.items():
        common.add_argument(f"--{name}", metavar="PATH", help=text)
    common.add_argument("--out", metavar="DIR", help="output directory (default: .)")
    common.add_argument("--threads", type=int, metavar="N", help="worker processes (default: 1)")
    common.add_argument("--seed", type=int, metavar="S", help="seed for hashing and random search (default: 42)")
    common.add_argument("--topk", type=int, metavar="K", help="answers kept per task (default: 100)")
    common.add_argument("--minhash-k", dest="minhash_k", type=int, metavar="K",
                        help="MinHash signature length (default: 128)")
    common.add_argument("--resolution", type=float, metavar="R",
                        help="random search lattice step (default: 0.1)")
    common.add_argument("--step", type=float, metavar="R", help="grid search step (default: 0.005)")
    common.add_argument("--iterations", type=int, metavar="I", help="random search trials (default: 10000)")
    common.add_argument("--fitness-k", dest="fitness_k", type=int, metavar="K",
                        help="MRR cutoff during search (default: --topk)")
    common.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")

    parser = _Parser(prog="rulelink",
                     description="Apply learned rules to knowledge graph completion tasks.")
    sub = parser.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sub.add_parser("applymax", parents=[common], help="max aggregation with early termination")
    sub.add_parser("applynoisy", parents=[common], help="plain noisy-or baseline")
    sub.add_parser("applynrnoisy", parents=[common], help="noisy-or over cluster maxima")
    sub.add_parser("calcjacc", parents=[common], help="solution-set MinHash signatures")
    learn = sub.add_parser("learnclusters", parents=[common], help="threshold search on validation")
    learn.add_argument("--strategy", choices=("grid", "random"))
    sub.add_parser("eval", parents=[common], help="filtered hits@k / MRR of a prediction file")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    settings: dict[str, object] = {}
    if args.config:
        if not Path(args.config).is_file():
            raise InputError(f"config file not found: {args.config}")
        settings.update(read_properties(args.config))
    for name in _TYPES:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    cfg = RunConfig(**settings)
    cfg.validate()
    return cfg


def _load(cfg: RunConfig, need_rules: bool = True):
    cfg.require("train", "valid", "test")
    graph = load_graph(cfg.train, cfg.valid, cfg.test)
    ruleset = None
    if need_rules:
        cfg.require("rules")
        ruleset = parse_ruleset(cfg.rules, graph)
        log.info("%d rules, %d rejected", len(ruleset), len(ruleset.rejected))
    return graph, ruleset


def _apply(cfg: RunConfig, method: str) -> Path:
    graph, ruleset = _load(cfg)
    assignments = None
    if method == "nrnoisy":
        path = cfg.clusters or str(cfg.out_path(OUTPUT_NAMES["learnclusters"]))
        if not Path(path).is_file():
            raise InputError(f"clusters file not found: {path}")
        assignments = pipeline.assignments_from_sections(read_clusters(path), ruleset)
    records = pipeline.predict(graph, ruleset, method, cfg.topk, cfg.threads, assignments)
    out = cfg.out_path(OUTPUT_NAMES["apply" + method])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_predictions(out, records)
    print(f"predictions={out}")
    print(f"triples={len(records)}")
    return out


def cmd_applymax(cfg: RunConfig) -> Path:
    return _apply(cfg, "max")


def cmd_applynoisy(cfg: RunConfig) -> Path:
    return _apply(cfg, "noisy")


def cmd_applynrnoisy(cfg: RunConfig) -> Path:
    return _apply(cfg, "nrnoisy")


def cmd_calcjacc(cfg: RunConfig) -> Path:
    graph, ruleset = _load(cfg)
    records = pipeline.compute_signatures(graph, ruleset, cfg.minhash, cfg.threads)
    out = cfg.out_path(OUTPUT_NAMES["calcjacc"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_signatures(out, cfg.minhash, records)
    print(f"signatures={out}")
    print(f"rules={len(records)}")
    print(f"empty={sum(1 for r in records if r.size == 0)}")
    return out


def cmd_learnclusters(cfg: RunConfig) -> Path:
    graph, ruleset = _load(cfg)
    sig_path = Path(cfg.signatures) if cfg.signatures else cfg.out_path(OUTPUT_NAMES["calcjacc"])
    if cfg.signatures and not sig_path.is_file():
        raise InputError(f"signatures file not found: {sig_path}")
    if sig_path.is_file():
        params, records = read_signatures(sig_path)
        if params != cfg.minhash:
            log.warning("using stored signatures (k=%d seed=%d)", params.k, params.seed)
    else:
        log.info("no signature file, computing signatures inline")
        params = cfg.minhash
        records = pipeline.compute_signatures(graph, ruleset, params, cfg.threads)
    signatures = pipeline.signatures_by_id(records, ruleset)
    search_cfg = cfg.search
    units = prepare_units(graph, ruleset, signatures, search_cfg.k, cfg.threads)
    run = grid_search if search_cfg.strategy == "grid" else random_search
    result = run(ruleset, graph, search_cfg, signatures, cfg.threads, units=units)
    sections = pipeline.sections_from_search(result, ruleset)
    header = (f"clusters strategy={search_cfg.strategy} seed={search_cfg.seed} "
              f"minhash_k={params.k} minhash_seed={params.seed} fitness_k={search_cfg.k} ")
    header += (f"step={search_cfg.step}" if search_cfg.strategy == "grid"
               else f"resolution={search_cfg.resolution} iterations={search_cfg.iterations}")
    out = cfg.out_path(OUTPUT_NAMES["learnclusters"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_clusters(out, sections, header)
    plot_search(result, out.with_name("search_fitness.png"))
    print(f"clusters={out}")
    print(f"sections={len(sections)}")
    fits = [u.fitness for u in result.units.values() if not u.default]
    print(f"mean_fitness={sum(fits) / len(fits) if fits else 0.0:.6f}")
    return out


def cmd_eval(cfg: RunConfig) -> Path:
    graph, _ = _load(cfg, need_rules=False)
    pred = cfg.predictions or str(cfg.out_path(OUTPUT_NAMES["applynrnoisy"]))
    if not Path(pred).is_file():
        raise InputError(f"predictions file not found: {pred}")
    report = evaluate(read_predictions(pred), graph)
    text = format_report(report)
    out = cfg.out_path(OUTPUT_NAMES["eval"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    plot_eval(report, out.with_name("eval_relations.png"))
    for key, value in report.as_dict().items():
        print(f"{key}={value}" if key == "tasks" else f"{key}={value:.6f}")
    return out


COMMANDS = {
    "applymax": cmd_applymax,
    "applynoisy": cmd_applynoisy,
    "applynrnoisy": cmd_applynrnoisy,
    "calcjacc": cmd_calcjacc,
    "learnclusters": cmd_learnclusters,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        cfg.action = args.action
        cfg.search, cfg.minhash  # validate derived settings up front
    except ContractError as exc:
        print(f"rulelink {args.action}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ParseError) as exc:
        print(f"rulelink {args.action}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        COMMANDS[args.action](cfg)
    except (InputError, ParseError, ValidationError, OSError) as exc:
        print(f"rulelink {args.action}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ContractError, AssertionError) as exc:
        print(f"rulelink {args.action}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
