"""The bundled hand-annotated corpus (15 functions per vulnerability)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

CORPUS_DIR = Path(__file__).parent / "data" / "corpus"
ANNOTATIONS = CORPUS_DIR / "annotations.json"


@dataclass(frozen=True)
class Annotation:
    source: str      # file name inside CORPUS_DIR
    function: str
    vulnerability: str
    label: int
    flags: dict      # vulnerability -> [b1, b2, b3]

    @property
    def path(self) -> Path:
        return CORPUS_DIR / self.source


def annotations() -> list[Annotation]:
    doc = json.loads(ANNOTATIONS.read_text())
    return [
        Annotation(e["source"], e["function"], e["vulnerability"], int(e["label"]), e["flags"])
        for e in doc["examples"]
    ]


def corpus_files() -> list[Path]:
    return sorted(CORPUS_DIR.glob("*.sol"))
