"""Labeled examples, manifests and feature caching."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .frontend import parse_source
from .graph import NormalizedGraph, graph_input
from .model import ModelInput
from .patterns import PatternVector, Vulnerability, extract_patterns
from .synthetic import generate


class ManifestError(ValueError):
    pass


class FunctionNotFound(KeyError):
    pass


@dataclass
class LabeledExample:
    path: str
    function: str
    vulnerability: str
    label: int
    source_hash: str
    patterns: PatternVector
    graph: Optional[NormalizedGraph]

    def model_input(self) -> ModelInput:
        return ModelInput(self.patterns.encodings, self.graph)


def source_hash(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def analyze_function(source: str, function: str, vulnerability):
    """Parse ``source`` and return (pattern vector, normalized graph or None) for ``function``."""
    vuln = Vulnerability.parse(vulnerability)
    unit = parse_source(source)
    try:
        ir = unit.find(function)
    except KeyError:
        errors = [e for e in unit.errors if e.name == function.split(".")[-1]]
        if errors:
            raise FunctionNotFound(f"{function}: {errors[0].error}")
        raise FunctionNotFound(f"no function named {function!r}")
    index = unit.index_for(ir)
    return extract_patterns(ir, vuln, index), graph_input(ir, index, vuln)


def make_example(source: str, function: str, vulnerability, label: int, path: str = "<memory>") -> LabeledExample:
    vuln = Vulnerability.parse(vulnerability)
    patterns, graph = analyze_function(source, function, vuln)
    return LabeledExample(path, function, vuln.value, int(label), source_hash(source), patterns, graph)


def load_manifest(path, vulnerability=None) -> list[LabeledExample]:
    """Read a manifest: JSON ``{"examples": [{"source", "function", "vulnerability", "label"}]}``.

    ``source`` paths are relative to the manifest's directory. An optional
    ``sha256`` per entry is checked against the file content.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    entries = doc["examples"] if isinstance(doc, dict) else doc
    want = Vulnerability.parse(vulnerability).value if vulnerability is not None else None
    sources: dict[Path, str] = {}
    out = []
    for i, entry in enumerate(entries):
        try:
            src_path = path.parent / entry["source"]
            vuln = Vulnerability.parse(entry["vulnerability"]).value
            label = int(entry["label"])
            function = entry["function"]
        except (KeyError, ValueError, TypeError) as exc:
            raise ManifestError(f"manifest entry {i}: {exc}") from None
        if label not in (0, 1):
            raise ManifestError(f"manifest entry {i}: label must be 0 or 1")
        if want is not None and vuln != want:
            continue
        if src_path not in sources:
            sources[src_path] = src_path.read_text()
        source = sources[src_path]
        if "sha256" in entry and entry["sha256"] != source_hash(source):
            raise ManifestError(f"manifest entry {i}: content hash mismatch for {entry['source']}")
        out.append(make_example(source, function, vuln, label, path=str(entry["source"])))
    return out


def write_manifest(path, entries: list[dict]) -> None:
    Path(path).write_text(json.dumps({"examples": entries}, indent=1) + "\n")


def synthetic_examples(vulnerability, n: int = 500, seed: int = 0) -> list[LabeledExample]:
    return [
        make_example(g.source, g.name, g.vulnerability, g.label, path=f"<synthetic:{g.template}>")
        for g in generate(vulnerability, n, seed)
    ]


def write_synthetic(out_dir, vulnerability, n: int = 500, seed: int = 0) -> Path:
    """Write generated functions as .sol files plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    vuln = Vulnerability.parse(vulnerability)
    (out_dir / vuln.value).mkdir(parents=True, exist_ok=True)
    entries = []
    for i, g in enumerate(generate(vuln, n, seed)):
        rel = f"{vuln.value}/{i:04d}_{g.name}.sol"
        (out_dir / rel).write_text(g.source)
        entries.append({
            "source": rel,
            "function": g.name,
            "vulnerability": vuln.value,
            "label": g.label,
            "sha256": source_hash(g.source),
        })
    manifest = out_dir / f"manifest_{vuln.value}.json"
    write_manifest(manifest, entries)
    return manifest
