"""Per-function detection reports (JSON and text)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .frontend import parse_source
from .frontend.lexer import LexError
from .frontend.parser import ParseError
from .graph import graph_input
from .model import AMEModel, ModelInput
from .patterns import PATTERN_NAMES, Vulnerability, extract_patterns

DEFAULT_SIGMA = 0.25


class NoFunctionsFound(ValueError):
    pass


@dataclass
class DetectionReport:
    file: str
    function: str
    contract: Optional[str]
    vulnerability: str
    verdict: int
    confidence: float
    logit: float
    weights: dict
    flags: dict
    warnings: list
    tool_version: str = __version__
    model_hash: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ErrorRecord:
    file: str
    error: str
    function: Optional[str] = None
    contract: Optional[str] = None
    line: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DetectionRun:
    reports: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if any(r.verdict == 1 for r in self.reports) else 0

    def to_dict(self) -> dict:
        return {
            "tool": "amedet",
            "version": __version__,
            "reports": [r.to_dict() for r in self.reports],
            "errors": [e.to_dict() for e in self.errors],
        }


def warnings_for(weights: dict, flags: dict, sigma: float) -> list[str]:
    """Pattern names that are present and weigh more than ``sigma``."""
    return [name for name, flag in flags.items() if flag == 1 and weights.get(name, 0.0) > sigma]


def detect_sources(
    sources: Sequence[tuple[str, str]],
    model: AMEModel,
    sigma: float = DEFAULT_SIGMA,
) -> DetectionRun:
    """Run ``model`` on every function of every (file name, source text) pair, in input order."""
    vuln = Vulnerability(model.config.vulnerability)
    names = PATTERN_NAMES[vuln]
    run = DetectionRun()
    pending = []
    for file, text in sources:
        try:
            unit = parse_source(text)
        except (LexError, ParseError) as exc:
            run.errors.append(ErrorRecord(file=file, error=f"{type(exc).__name__}: {exc}"))
            continue
        for err in unit.errors:
            run.errors.append(ErrorRecord(file, err.error, err.name, err.contract, err.line))
        for ir in unit.functions:
            index = unit.index_for(ir)
            pv = extract_patterns(ir, vuln, index)
            pending.append((file, ir, pv, ModelInput(pv.encodings, graph_input(ir, index, vuln))))
    if not pending and not run.errors:
        raise NoFunctionsFound("no functions found in the input")
    traces = model.predict([p[3] for p in pending])
    for (file, ir, pv, _), tr in zip(pending, traces):
        flags = {n: int(f) for n, f in zip(names, pv.flags)}
        run.reports.append(DetectionReport(
            file=file,
            function=ir.name,
            contract=ir.contract,
            vulnerability=vuln.value,
            verdict=tr.label,
            confidence=tr.confidence,
            logit=tr.logit,
            weights=tr.weights,
            flags=flags,
            warnings=warnings_for(tr.weights, flags, sigma),
            model_hash=model.digest,
        ))
    return run


def detect_files(paths: Sequence, model: AMEModel, sigma: float = DEFAULT_SIGMA) -> DetectionRun:
    sources = []
    for p in paths:
        sources.append((str(p), Path(p).read_text()))
    return detect_sources(sources, model, sigma)


def format_text(run: DetectionRun) -> str:
    """Human-readable rendering; numbers use the same repr as the JSON output."""
    lines = []
    for r in run.reports:
        where = f"{r.contract}.{r.function}" if r.contract else r.function
        verdict = "VULNERABLE" if r.verdict else "clean"
        lines.append(f"{r.file}: {where} [{r.vulnerability}] {verdict} verdict={r.verdict} "
                     f"confidence={r.confidence!r} logit={r.logit!r}")
        for name, w in r.weights.items():
            flag = "" if name not in r.flags else f" flag={r.flags[name]}"
            mark = "  <- warning" if name in r.warnings else ""
            lines.append(f"    weight {name}={w!r}{flag}{mark}")
    for e in run.errors:
        where = e.function or "<file>"
        lines.append(f"{e.file}: {where} ERROR {e.error}")
    return "\n".join(lines) + ("\n" if lines else "")
