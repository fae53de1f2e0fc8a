"""Proof documents and the line-oriented ``.proof`` DSL.

A document declares its symbol table, numbered preconditions, numbered steps
that continue the precondition numbering, and a goal:

    symbols: G KB G1 G2 p q
    precondition 1: G -> G1 & G2
    step 2: G & KB            ; hypothesis
    step 3: G                 ; conj-elim 2
    goal: G & KB -> q

Comments run from ``#`` to end of line. Justifications: ``precondition``,
``hypothesis``, ``conj-elim R``, ``conj-intro R1 R2 [R3 ...]``, ``mp R1 R2``,
``cond-proof I J``. References cite strictly smaller line numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from osamtl.logic.formulas import Formula, FormulaSyntaxError, atoms, parse_formula


class ProofDocumentError(ValueError):
    """Raised when a proof document is structurally malformed."""

    def __init__(self, message: str, line_no: int | None = None) -> None:
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{message}{where}")
        self.line_no = line_no


@dataclass(frozen=True)
class Precondition:
    pass


@dataclass(frozen=True)
class Hypothesis:
    pass


@dataclass(frozen=True)
class ConjElim:
    ref: int


@dataclass(frozen=True)
class ConjIntro:
    refs: tuple[int, ...]


@dataclass(frozen=True)
class MP:
    impl_ref: int
    antecedent_ref: int


@dataclass(frozen=True)
class CondProof:
    first_ref: int
    last_ref: int


Justification = Union[Precondition, Hypothesis, ConjElim, ConjIntro, MP, CondProof]


def justification_refs(justification: Justification) -> tuple[int, ...]:
    if isinstance(justification, ConjElim):
        return (justification.ref,)
    if isinstance(justification, ConjIntro):
        return justification.refs
    if isinstance(justification, MP):
        return (justification.impl_ref, justification.antecedent_ref)
    if isinstance(justification, CondProof):
        return (justification.first_ref, justification.last_ref)
    return ()


@dataclass(frozen=True)
class ProofStep:
    index: int
    judgment: Formula
    justification: Justification


@dataclass(frozen=True)
class Proof:
    name: str
    symbols: tuple[str, ...]
    preconditions: tuple[Formula, ...]
    steps: tuple[ProofStep, ...]
    goal: Formula


def _parse_justification(text: str, line_no: int) -> Justification:
    parts = text.split()
    if not parts:
        raise ProofDocumentError("missing justification", line_no)
    kind, args = parts[0], parts[1:]

    def refs(expected: int | None) -> tuple[int, ...]:
        try:
            values = tuple(int(a) for a in args)
        except ValueError:
            raise ProofDocumentError(f"non-integer reference in {text!r}", line_no) from None
        if expected is not None and len(values) != expected:
            raise ProofDocumentError(f"{kind} takes {expected} references, got {len(values)}", line_no)
        return values

    if kind == "precondition":
        refs(0)
        return Precondition()
    if kind == "hypothesis":
        refs(0)
        return Hypothesis()
    if kind == "conj-elim":
        return ConjElim(refs(1)[0])
    if kind == "conj-intro":
        values = refs(None)
        if len(values) < 2:
            raise ProofDocumentError("conj-intro takes at least 2 references", line_no)
        return ConjIntro(values)
    if kind == "mp":
        values = refs(2)
        return MP(values[0], values[1])
    if kind == "cond-proof":
        values = refs(2)
        return CondProof(values[0], values[1])
    raise ProofDocumentError(f"unknown justification {kind!r}", line_no)


def parse_proof_document(text: str, name: str = "") -> Proof:
    """Parse one ``.proof`` document; raises ProofDocumentError on structural
    problems (bad numbering, undeclared symbols, missing goal)."""
    symbols: tuple[str, ...] | None = None
    preconditions: list[Formula] = []
    steps: list[ProofStep] = []
    goal: Formula | None = None

    def parse_line_formula(src: str, line_no: int) -> Formula:
        try:
            return parse_formula(src)
        except FormulaSyntaxError as exc:
            raise ProofDocumentError(f"bad formula {src.strip()!r}: {exc}", line_no) from None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(":")
        head = head.strip()
        rest = rest.strip()
        if head == "symbols":
            if symbols is not None:
                raise ProofDocumentError("duplicate symbols line", line_no)
            symbols = tuple(rest.split())
            if not symbols:
                raise ProofDocumentError("empty symbol table", line_no)
            continue
        if head == "goal":
            if goal is not None:
                raise ProofDocumentError("duplicate goal line", line_no)
            goal = parse_line_formula(rest, line_no)
            continue
        keyword, _, index_text = head.partition(" ")
        if keyword == "precondition":
            if steps:
                raise ProofDocumentError("preconditions must precede steps", line_no)
            try:
                index = int(index_text)
            except ValueError:
                raise ProofDocumentError(f"bad precondition number {index_text!r}", line_no) from None
            if index != len(preconditions) + 1:
                raise ProofDocumentError(f"precondition {index} out of order", line_no)
            preconditions.append(parse_line_formula(rest, line_no))
            continue
        if keyword == "step":
            try:
                index = int(index_text)
            except ValueError:
                raise ProofDocumentError(f"bad step number {index_text!r}", line_no) from None
            expected = len(preconditions) + len(steps) + 1
            if index != expected:
                raise ProofDocumentError(f"step {index} out of order (expected {expected})", line_no)
            judgment_text, justified, justification_text = rest.partition(";")
            if not justified:
                raise ProofDocumentError("step needs '; justification'", line_no)
            judgment = parse_line_formula(judgment_text.strip(), line_no)
            justification = _parse_justification(justification_text.strip(), line_no)
            for ref in justification_refs(justification):
                if not 1 <= ref < index:
                    raise ProofDocumentError(
                        f"reference {ref} must cite a strictly smaller line than {index}", line_no
                    )
            steps.append(ProofStep(index, judgment, justification))
            continue
        raise ProofDocumentError(f"unrecognized line {line!r}", line_no)

    if symbols is None:
        raise ProofDocumentError("missing symbols line")
    if goal is None:
        raise ProofDocumentError("missing goal line")
    declared = set(symbols)
    for formula, what in (
        [(f, f"precondition {i + 1}") for i, f in enumerate(preconditions)]
        + [(s.judgment, f"step {s.index}") for s in steps]
        + [(goal, "goal")]
    ):
        undeclared = atoms(formula) - declared
        if undeclared:
            raise ProofDocumentError(f"{what} uses undeclared symbols {sorted(undeclared)}")
    return Proof(name, symbols, tuple(preconditions), tuple(steps), goal)
