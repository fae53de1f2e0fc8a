"""Single-step mutant generation for proof documents.

Every mutant changes exactly one step: its rule kind, one reference, or its
judgment (to another formula occurring in the same document). Generated
references always cite strictly smaller lines so each mutant exercises the
checker's rule logic rather than the parser's structural guards.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterator

from osamtl.logic import (
    CondProof,
    ConjElim,
    ConjIntro,
    Hypothesis,
    MP,
    Precondition,
    Proof,
    ProofStep,
)
from osamtl.logic.proofs import Justification, justification_refs


def _document_formulas(proof: Proof) -> list:
    seen = []
    for formula in (
        list(proof.preconditions) + [s.judgment for s in proof.steps] + [proof.goal]
    ):
        if formula not in seen:
            seen.append(formula)
    return seen


def _rule_kind_mutants(step: ProofStep) -> Iterator[Justification]:
    index = step.index
    refs = justification_refs(step.justification)
    first = refs[0] if refs else index - 1
    second = refs[1] if len(refs) > 1 else index - 1
    pair = (first, second) if first != second else (max(1, index - 2), index - 1)
    candidates: list[Justification] = [Precondition(), Hypothesis(), ConjElim(first)]
    if pair[0] != pair[1] and all(1 <= r < index for r in pair):
        candidates += [ConjIntro(pair), MP(*pair), CondProof(*pair)]
    for candidate in candidates:
        if type(candidate) is not type(step.justification):
            yield candidate


def _ref_mutants(step: ProofStep) -> Iterator[Justification]:
    refs = justification_refs(step.justification)
    for position in range(len(refs)):
        for other in range(1, step.index):
            if other == refs[position]:
                continue
            mutated = list(refs)
            mutated[position] = other
            if isinstance(step.justification, ConjElim):
                yield ConjElim(mutated[0])
            elif isinstance(step.justification, ConjIntro):
                yield ConjIntro(tuple(mutated))
            elif isinstance(step.justification, MP):
                yield MP(mutated[0], mutated[1])
            elif isinstance(step.justification, CondProof):
                yield CondProof(mutated[0], mutated[1])


def iter_mutants(proof: Proof) -> Iterator[tuple[int, str, Proof]]:
    """Yield (mutated step index, description, mutated proof) triples."""
    pool = _document_formulas(proof)
    for position, step in enumerate(proof.steps):
        def rebuild(new_step: ProofStep) -> Proof:
            steps = list(proof.steps)
            steps[position] = new_step
            return replace(proof, steps=tuple(steps))

        for justification in _rule_kind_mutants(step):
            yield step.index, f"rule {step.justification!r} -> {justification!r}", rebuild(
                replace(step, justification=justification)
            )
        for justification in _ref_mutants(step):
            yield step.index, f"refs {step.justification!r} -> {justification!r}", rebuild(
                replace(step, justification=justification)
            )
        for formula in pool:
            if formula != step.judgment:
                yield step.index, f"judgment of {step.index} -> {formula!r}", rebuild(
                    replace(step, judgment=formula)
                )
