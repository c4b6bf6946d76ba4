"""amedet command line.

Exit codes: 0 when no function is flagged, 2 when at least one verdict is 1,
1 on any fatal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import load_manifest, write_manifest, write_synthetic
from .frontend import ir_to_dict, parse_source
from .graph import EmptyGraph, NoCoreNodes, build_graph, normalize_graph
from .model import VARIANTS, AMEModel, ModelConfig
from .nn.checkpoint import LoadError
from .patterns import Vulnerability, extract_patterns
from .report import DEFAULT_SIGMA, NoFunctionsFound, detect_files, format_text
from .trainer import evaluate, predict_weights, split_dataset, train, weight_stats_from_weights

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_FINDINGS = 2
DEFAULT_EPOCHS = 30
MODEL_DIR_ENV = "AME_MODEL_DIR"


class CliError(Exception):
    pass


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def resolve_model_path(model, vulnerability) -> Path:
    """``--model`` as a file, a directory holding ``<vuln>.ckpt``, or looked up under $AME_MODEL_DIR."""
    vuln = Vulnerability.parse(vulnerability).value
    if model:
        p = Path(model)
        if p.is_dir():
            p = p / f"{vuln}.ckpt"
        if not p.exists():
            raise CliError(f"model checkpoint not found: {p}")
        return p
    for d in filter(None, os.environ.get(MODEL_DIR_ENV, "").split(os.pathsep)):
        p = Path(d) / f"{vuln}.ckpt"
        if p.exists():
            return p
    raise CliError(f"no --model given and no {vuln}.ckpt under ${MODEL_DIR_ENV}")


def _select(unit, function):
    if function:
        return [unit.find(function)]
    return list(unit.functions)


# -- subcommands ---------------------------------------------------------------------


def cmd_detect(args) -> int:
    model = AMEModel.load(resolve_model_path(args.model, args.vuln), vulnerability=args.vuln)
    run = detect_files(args.files, model, sigma=args.sigma)
    if args.format == "json":
        _emit(run.to_dict(), args.out)
    else:
        text = format_text(run)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    return run.exit_code


def cmd_train(args) -> int:
    examples = load_manifest(args.manifest, vulnerability=args.vuln)
    if not examples:
        raise CliError(f"manifest has no {args.vuln} examples")
    config = ModelConfig(vulnerability=args.vuln, variant=args.variant, d=args.dim)
    model = AMEModel(config, seed=args.seed)
    history = train(model, examples, epochs=args.epochs, seed=args.seed, lr=args.lr)
    digest = model.save(args.out)
    curve = {**history.to_dict(), "checkpoint": str(args.out), "sha256": digest, "seed": args.seed}
    _emit(curve, args.curve or f"{args.out}.json")
    return EXIT_CLEAN


def _load_for_manifest(args):
    model = AMEModel.load(args.model)
    examples = load_manifest(args.manifest, vulnerability=model.config.vulnerability)
    return model, examples


def cmd_eval(args) -> int:
    model, examples = _load_for_manifest(args)
    _emit(evaluate(model, examples).to_dict(), args.out)
    return EXIT_CLEAN


def cmd_stats(args) -> int:
    model, examples = _load_for_manifest(args)
    weights = predict_weights(model, examples)
    stats = weight_stats_from_weights(weights, model.config.feature_names(), args.sigma)
    doc = stats.to_dict()
    if args.dump_weights:
        doc["examples"] = [
            {"path": ex.path, "function": ex.function, "weights": [float(x) for x in row]}
            for ex, row in zip(examples, weights)
        ]
    _emit(doc, args.out)
    return EXIT_CLEAN


def cmd_extract_patterns(args) -> int:
    unit = parse_source(Path(args.file).read_text())
    out = []
    for ir in _select(unit, args.function):
        pv = extract_patterns(ir, args.vuln, unit.index_for(ir))
        out.append({"function": ir.name, "contract": ir.contract, **pv.to_dict()})
    _emit(out, args.out)
    return EXIT_CLEAN


def cmd_build_graph(args) -> int:
    unit = parse_source(Path(args.file).read_text())
    out = []
    for ir in _select(unit, args.function):
        entry = {"function": ir.name, "contract": ir.contract}
        try:
            graph = build_graph(ir, unit.index_for(ir), args.vuln)
            if args.normalized:
                graph = normalize_graph(graph)
            entry["graph"] = graph.to_dict()
        except (EmptyGraph, NoCoreNodes) as exc:
            entry["graph"] = None
            entry["note"] = f"{type(exc).__name__}: {exc}"
        out.append(entry)
    _emit(out, args.out)
    return EXIT_CLEAN


def cmd_parse(args) -> int:
    unit = parse_source(Path(args.file).read_text())
    doc = {
        "functions": [
            {"name": ir.name, "contract": ir.contract, **({"ir": ir_to_dict(ir)} if args.emit_ir else {})}
            for ir in unit.functions
        ],
        "errors": [{"function": e.name, "contract": e.contract, "error": e.error, "line": e.line} for e in unit.errors],
    }
    _emit(doc, args.out)
    return EXIT_CLEAN


def cmd_split(args) -> int:
    path = Path(args.manifest)
    doc = json.loads(path.read_text())
    entries = doc["examples"] if isinstance(doc, dict) else doc

    class _Row:
        def __init__(self, i, e):
            self.i, self.label = i, int(e["label"])

    train_rows, test_rows = split_dataset([_Row(i, e) for i, e in enumerate(entries)], seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # keep source paths valid relative to the new manifests
    rel = os.path.relpath(path.parent.resolve(), out_dir.resolve())

    def rebase(e):
        return {**e, "source": os.path.normpath(os.path.join(rel, e["source"]))}

    write_manifest(out_dir / "train.json", [rebase(entries[r.i]) for r in train_rows])
    write_manifest(out_dir / "test.json", [rebase(entries[r.i]) for r in test_rows])
    _emit({"train": len(train_rows), "test": len(test_rows), "out_dir": str(out_dir)})
    return EXIT_CLEAN


def cmd_generate(args) -> int:
    manifest = write_synthetic(args.out_dir, args.vuln, n=args.n, seed=args.seed)
    _emit({"manifest": str(manifest), "n": args.n})
    return EXIT_CLEAN


# -- argument parsing ---------------------------------------------------------------------


def _vuln(value: str) -> str:
    try:
        return Vulnerability.parse(value).value
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown vulnerability {value!r} (choose reentrancy, timestamp or loop)"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amedet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"amedet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="classify every function of the given files")
    d.add_argument("files", nargs="+")
    d.add_argument("--vuln", type=_vuln, required=True)
    d.add_argument("--model", help=f"checkpoint file or directory (default: ${MODEL_DIR_ENV})")
    d.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    d.add_argument("--format", choices=("json", "text"), default="json")
    d.add_argument("--out")
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("train", help="train a model from a manifest")
    t.add_argument("--vuln", type=_vuln, required=True)
    t.add_argument("--manifest", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--variant", choices=VARIANTS, default=VARIANTS[0])
    t.add_argument("--dim", type=int, default=200)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--curve", help="loss-curve JSON path (default: <out>.json)")
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "accuracy/recall/precision/F1 on a manifest"),
                                 ("stats", cmd_stats, "interpretability weight statistics")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--model", required=True)
        s.add_argument("--manifest", required=True)
        s.add_argument("--out")
        if name == "stats":
            s.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
            s.add_argument("--dump-weights", action="store_true", help="include per-example weights")
        s.set_defaults(func=func)

    for name, func in (("extract-patterns", cmd_extract_patterns), ("build-graph", cmd_build_graph)):
        s = sub.add_parser(name, help=f"debug dump: {name.replace('-', ' ')}")
        s.add_argument("file")
        s.add_argument("--vuln", type=_vuln, required=True)
        s.add_argument("--function", help="NAME or CONTRACT.NAME (default: all)")
        s.add_argument("--out")
        if name == "build-graph":
            s.add_argument("--normalized", action="store_true")
        s.set_defaults(func=func)

    s = sub.add_parser("parse", help="parse a file and list its functions")
    s.add_argument("file")
    s.add_argument("--emit-ir", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("split", help="stratified 80/20 split of a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("generate", help="write a synthetic labeled corpus")
    s.add_argument("--vuln", type=_vuln, required=True)
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, LoadError, NoFunctionsFound, OSError, ValueError, KeyError) as exc:
        print(f"amedet: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
