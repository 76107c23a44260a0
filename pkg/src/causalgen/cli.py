"""Command-line entry point: ``causalgen <subcommand> ...``.

Exit status: 0 success, 1 usage error, 2 data error (missing or malformed
input).  Path flags fall back to ``CAUSALGEN_<FLAG>`` environment variables
(e.g. ``CAUSALGEN_GRAPH``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
ENV_PREFIX = "CAUSALGEN_"

log = logging.getLogger("causalgen")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))


def _existing(path, flag: str) -> Path:
    if path is None:
        raise UsageError(f"missing required option {flag}")
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {p}")
    return p


def _writable(path, flag: str) -> Path | None:
    if path is None or path == "-":
        return None
    p = Path(path)
    if not p.parent.exists():
        raise DataError(f"output directory does not exist: {p.parent}")
    return p


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _threads(args) -> int:
    n = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return n


def _read_lines(path: Path, field: str | None = None) -> list[list[str]]:
    from .text import words

    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            if field:
                try:
                    line = json.loads(line)[field]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise DataError(f"{path}:{lineno}: no field {field!r} ({exc})") from exc
            out.append(words(line))
    return out


# -- subcommands -------------------------------------------------------------

def cmd_mine(args) -> int:
    from .miner import MinerConfig, Miner, load_patterns, read_documents, write_jsonl

    src = _existing(args.input, "--in")
    patterns_path = args.patterns or _env("patterns")
    patterns = load_patterns(_existing(patterns_path, "--patterns") if patterns_path else None)
    out = _writable(args.out, "--out")
    if out is None:
        raise UsageError("--out is required for mine")
    stats_path = Path(args.stats) if args.stats else Path(str(out) + ".stats.json")
    config = MinerConfig(
        patterns=patterns,
        min_arg_tokens=args.min_arg_tokens,
        negation_window=args.negation_window,
        enable_passive_filter=not args.no_passive_filter,
        enable_negation_filter=not args.no_negation_filter,
    )
    miner = Miner(config, threads=_threads(args))
    n = write_jsonl(miner.mine(read_documents(src)), out)
    stats = miner.stats.to_json()
    if args.timestamps:
        stats["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    stats_path.write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    if args.figures:
        from .report import plot_mining_stats

        plot_mining_stats(stats, args.figures)
    log.info("wrote %d pairs to %s", n, out)
    return EXIT_OK


def _lexicon(args):
    from .morphology import Lexicon, default_lexicon

    path = args.lexicon or _env("lexicon")
    return Lexicon.load(_existing(path, "--lexicon")) if path else default_lexicon()


def cmd_build_graph(args) -> int:
    from .ceg import build_graph
    from .miner import read_jsonl

    src = _existing(args.input, "--in")
    out = _writable(args.out, "--out")
    if out is None:
        raise UsageError("--out is required for build-graph")
    lexicon = _lexicon(args)
    graph = build_graph(read_jsonl(src), threshold=args.threshold, lexicon=lexicon,
                        threads=_threads(args))
    graph.save(out)
    if args.figures:
        from .report import plot_edge_frequencies

        plot_edge_frequencies(sorted(graph.edges.values()), args.figures)
    return EXIT_OK


def _graph(args):
    from .ceg import CauseEffectGraph

    path = args.graph or _env("graph")
    return CauseEffectGraph.load(_existing(path, "--graph"))


def cmd_query_graph(args) -> int:
    from .ceg import query_candidates

    graph = _graph(args)
    out = _writable(args.out, "--out")
    rows = query_candidates(graph, [l.lower() for l in args.lemmas], args.direction, args.n)
    _emit("".join(f"{lemma}\t{freq}\n" for lemma, freq in rows), out)
    return EXIT_OK


def cmd_train_lm(args) -> int:
    from .scoring import train_ngram

    src = _existing(args.input, "--in")
    out = _writable(args.out, "--out")
    if out is None:
        raise UsageError("--out is required for train-lm")
    if args.order < 1 or args.alpha <= 0:
        raise UsageError("--order must be >= 1 and --alpha > 0")
    model = train_ngram(_read_lines(src, args.field), order=args.order, alpha=args.alpha)
    model.save(out)
    if args.vocab_out:
        model.vocab.save(args.vocab_out)
    return EXIT_OK


def _model(args):
    from .scoring import NGramModel

    path = args.model or _env("model")
    return NGramModel.load(_existing(path, "--model"))


def cmd_decode(args) -> int:
    from .dpc import constrained_beam_search, load_constraints, random_sampling_decode

    model = _model(args)
    out = _writable(args.out, "--out")
    sets = []
    if args.constraints:
        sets = load_constraints(_existing(args.constraints, "--constraints"), model.vocab)
    if args.beam < 1 or args.k_max < 1:
        raise UsageError("--beam and --k-max must be >= 1")
    if args.sample:
        if sets:
            raise UsageError("--sample cannot be combined with --constraints")
        hyps = random_sampling_decode(model, args.sample, args.k_max, args.seed)
    else:
        hyps = constrained_beam_search(model, sets, args.beam, args.k_max)
    _emit(json.dumps([h.to_json(model.vocab) for h in hyps], ensure_ascii=False) + "\n", out)
    return EXIT_OK


def cmd_generate(args) -> int:
    from .pipeline import GenerationConfig, generate

    if not (args.graph or _env("graph")):
        raise UsageError("generate requires --graph")
    if not (args.model or _env("model")):
        raise UsageError("generate requires --model")
    graph = _graph(args)
    model = _model(args)
    lexicon = _lexicon(args)
    out = _writable(args.out, "--out")
    try:
        config = GenerationConfig(
            direction=args.direction, n_constraints=args.n, per_constraint_keep=args.m,
            final_k=args.k, beam_size=args.beam, k_max=args.k_max,
            length_normalize=args.length_normalize, threads=_threads(args),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = generate(args.input, graph, model, lexicon, config)
    payload = result.to_json()
    _emit(json.dumps(payload, ensure_ascii=False) + "\n", out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .pipeline import div_metric
    from .scoring import perplexity, word_accuracy

    out = _writable(args.out, "--out")
    if not (args.corpus or args.div):
        raise UsageError("eval needs --corpus (with --model) and/or --div")
    report: dict = {}
    div_scores: list[float] = []
    if args.corpus:
        model = _model(args)
        sents = [model.vocab.encode(s) for s in _read_lines(_existing(args.corpus, "--corpus"))]
        if not sents:
            raise DataError(f"{args.corpus}: no sentences")
        report["perplexity"] = perplexity(model, sents)
        report["word_accuracy"] = word_accuracy(model, sents)
        report["positions"] = sum(len(s) + 1 for s in sents)
    if args.div:
        path = _existing(args.div, "--div")
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    div_scores.append(div_metric(rec["gold"], rec["outputs"][:3]))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise DataError(f"{path}:{lineno}: bad Div record ({exc})") from exc
        if not div_scores:
            raise DataError(f"{path}: no Div records")
        report["div"] = sum(div_scores) / len(div_scores)
        report["div_items"] = len(div_scores)
    _emit(json.dumps(report, sort_keys=True) + "\n", out)
    if args.figures:
        from .report import plot_eval

        plot_eval({k: report[k] for k in ("perplexity", "word_accuracy", "div") if k in report},
                  div_scores, args.figures)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="causalgen", description="Causal pair mining, cause-effect graphs and "
                                              "disjunctively constrained generation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, threads=False):
        if threads:
            sp.add_argument("--threads", type=int, default=None,
                            help="worker count (default: all cores); output is identical for any value")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("mine", help="documents -> causal-pair JSONL + stats")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--patterns")
    sp.add_argument("--stats")
    sp.add_argument("--min-arg-tokens", type=int, default=2)
    sp.add_argument("--negation-window", type=int, default=3)
    sp.add_argument("--no-passive-filter", action="store_true")
    sp.add_argument("--no-negation-filter", action="store_true")
    sp.add_argument("--timestamps", action="store_true")
    sp.add_argument("--figures", metavar="DIR")
    common(sp, threads=True)
    sp.set_defaults(func=cmd_mine)

    sp = sub.add_parser("build-graph", help="causal-pair JSONL -> graph TSV + index")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--threshold", type=int, default=5)
    sp.add_argument("--lexicon")
    sp.add_argument("--figures", metavar="DIR")
    common(sp, threads=True)
    sp.set_defaults(func=cmd_build_graph)

    sp = sub.add_parser("query-graph", help="lemmas -> ranked candidate TSV")
    sp.add_argument("--graph")
    sp.add_argument("--lemmas", nargs="+", required=True)
    sp.add_argument("--direction", choices=["cause-of", "effect-of"], default="cause-of")
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_query_graph)

    sp = sub.add_parser("train-lm", help="token corpus -> n-gram model")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--field", choices=["cause", "effect"],
                    help="read this field from causal-pair JSONL instead of plain lines")
    sp.add_argument("--order", type=int, default=2)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--vocab-out")
    common(sp)
    sp.set_defaults(func=cmd_train_lm)

    sp = sub.add_parser("decode", help="constraints JSON + model -> hypotheses JSON")
    sp.add_argument("--model")
    sp.add_argument("--constraints")
    sp.add_argument("--beam", type=int, default=5)
    sp.add_argument("--k-max", type=int, default=20)
    sp.add_argument("--sample", type=int, metavar="N", help="random sampling instead of beam search")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("generate", help="sentence -> ranked causes/effects JSON")
    sp.add_argument("--input", required=True)
    sp.add_argument("--graph")
    sp.add_argument("--model")
    sp.add_argument("--lexicon")
    sp.add_argument("--direction", choices=["cause", "effect"], default="cause")
    sp.add_argument("--n", type=int, default=300, help="constraint lemmas taken from the graph")
    sp.add_argument("--m", type=int, default=5, help="outputs kept per constraint")
    sp.add_argument("--k", type=int, default=10, help="outputs returned")
    sp.add_argument("--beam", type=int, default=10)
    sp.add_argument("--k-max", type=int, default=20)
    sp.add_argument("--length-normalize", action="store_true")
    sp.add_argument("--out")
    common(sp, threads=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("eval", help="perplexity / word accuracy / Div")
    sp.add_argument("--model")
    sp.add_argument("--corpus")
    sp.add_argument("--div", help="JSONL records {gold: [...], outputs: [...]}")
    sp.add_argument("--out")
    sp.add_argument("--figures", metavar="DIR")
    common(sp)
    sp.set_defaults(func=cmd_eval)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise UsageError("a subcommand is required")
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
