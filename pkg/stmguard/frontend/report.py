"""Check reports: assembly from checker results, JSON serialization and text rendering."""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click

from ..engine.checker import BadSite, Branch, CheckResult, Safe, Unknown, Unsafe, Verdict, verdict_name
from ..engine.config import CheckConfig
from .pretty import pretty_contract, pretty_expr

_STYLES = {
    "Safe": ("[OK]", "green"),
    "Unsafe": ("[FAIL]", "red"),
    "Unknown": ("[??]", "yellow"),
}


def describe_branch(branch: Branch) -> str:
    scrutinee, pattern = branch
    return f"{pretty_expr(scrutinee)} is {pattern}"


def describe_site(site: BadSite) -> str:
    where = pretty_expr(site.target)
    if not site.path:
        return where
    return f"{where} when " + ", ".join(describe_branch(b) for b in site.path)


@dataclass
class Entry:
    name: str
    verdict: str
    variants: int
    witness: Optional[Dict[str, str]] = None
    reason: Optional[str] = None
    trace: List[str] = field(default_factory=list)
    residual: Optional[str] = None
    bad_sites: List[str] = field(default_factory=list)
    pure: List[Dict[str, str]] = field(default_factory=list)
    ms: int = 0

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "verdict": self.verdict, "variants": self.variants}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.reason is not None:
            out["reason"] = self.reason
        if self.trace:
            out["trace"] = self.trace
        if self.residual is not None:
            out["residual"] = self.residual
        if self.bad_sites:
            out["badSites"] = self.bad_sites
        if self.pure:
            out["pure"] = self.pure
        out["ms"] = self.ms
        return out


def make_entry(result: CheckResult, ms: float = 0.0, dump_pure: bool = False) -> Entry:
    entry = Entry(result.name, verdict_name(result.verdict), len(result.variants), ms=int(round(ms)))
    verdict: Verdict = result.verdict
    if isinstance(verdict, Unsafe):
        entry.witness = {name: pretty_expr(value) for name, value in verdict.witness}
        entry.reason = verdict.reason
        entry.trace = [describe_branch(b) for b in verdict.trace]
    elif isinstance(verdict, Unknown):
        entry.reason = verdict.reason
        entry.residual = pretty_expr(verdict.residual)
        entry.bad_sites = [describe_site(s) for s in verdict.bad_sites]
    if dump_pure:
        entry.pure = [{"expr": pretty_expr(v.pure), "contract": pretty_contract(v.contract)}
                      for v in result.variants]
    return entry


def overall_status(entries: Sequence[Entry]) -> str:
    verdicts = {e.verdict for e in entries}
    if "Unsafe" in verdicts:
        return "Unsafe"
    if "Unknown" in verdicts:
        return "Unknown"
    return "Safe"


EXIT_CODES = {"Safe": 0, "Unsafe": 1, "Unknown": 2}


@dataclass
class Report:
    file: str
    transactions: List[Entry]
    functions: List[Entry]
    config: CheckConfig

    @property
    def status(self) -> str:
        return overall_status(self.transactions + self.functions)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "file": self.file,
            "status": self.status,
            "transactions": [e.to_dict() for e in self.transactions],
            "functions": [e.to_dict() for e in self.functions],
            "config": {
                "fuel": self.config.fuel,
                "inlineDepth": self.config.inline_depth,
                "samples": self.config.samples,
                "seed": self.config.seed,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def text_lines(self) -> List[Tuple[str, Optional[str]]]:
        """Lines of the text report, each with its color (None for plain)."""
        lines: List[Tuple[str, Optional[str]]] = [(f"{self.file}", None)]
        for title, entries in (("transactions", self.transactions), ("functions", self.functions)):
            if not entries:
                continue
            lines.append((f"{title}:", None))
            for e in entries:
                tag, color = _STYLES[e.verdict]
                plural = "variant" if e.variants == 1 else "variants"
                lines.append((f"{tag} {e.name}: {e.verdict} ({e.variants} {plural}, {e.ms} ms)", color))
                for item in e.pure:
                    lines.append((f"  pure: {item['expr']}", None))
                    lines.append((f"    :: {item['contract']}", None))
                if e.witness is not None:
                    shown = ", ".join(f"{k} = {v}" for k, v in e.witness.items())
                    lines.append((f"  witness: {shown}", None))
                if e.reason is not None:
                    lines.append((f"  reason: {e.reason}", None))
                for step in e.trace:
                    lines.append((f"  on path: {step}", None))
                for site in e.bad_sites:
                    lines.append((f"  unresolved: {site}", None))
                if e.residual is not None and not e.pure:
                    lines.append((f"  residual: {e.residual}", None))
        tag, color = _STYLES[self.status]
        lines.append((f"{tag} status: {self.status}", color))
        return lines

    def echo(self) -> None:
        for text, color in self.text_lines():
            click.echo(click.style(text, fg=color) if color else text)


def build_report(file: str, transactions: Sequence[Tuple[CheckResult, float]],
                 functions: Sequence[Tuple[CheckResult, float]], config: CheckConfig,
                 timings: bool = True, dump_pure: bool = False) -> Report:
    def entries(results):
        return [make_entry(r, ms if timings else 0.0, dump_pure) for r, ms in results]

    return Report(file, entries(transactions), entries(functions), config)
