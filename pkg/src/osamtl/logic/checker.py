"""Rule checker for proof documents.

The checker licenses each step in order and reports the first failure instead
of raising; structural problems at a step (dangling or forward references)
are failures at that step for the same reason.

Rules:

- ``precondition``: the judgment appears verbatim among the preconditions.
- ``hypothesis``: always licensed; opens a subderivation.
- ``conj-elim R``: the judgment's flattened conjunct leaves form a proper,
  nonempty, order-preserving subsequence of step R's leaves (so ``t & v``
  follows from ``t & u & v``; a formula is not a conjunct of itself).
- ``conj-intro R1 .. Rk``: the judgment is the left-nested conjunction of the
  cited judgments in citation order.
- ``mp R1 R2``: step R1 is ``A -> B``, step R2 is ``A``, the judgment is ``B``.
- ``cond-proof I J``: step I is the innermost open hypothesis ``H``, J is the
  line immediately before this one, the judgment is ``H -> C`` for C the
  judgment of J; lines I..J are discharged and may not be cited afterwards.

A proof is valid when every step is licensed and the final undischarged step
is a non-hypothesis whose judgment equals the declared goal (a derivation may
leave auxiliary hypotheses open, but it may not assume its own conclusion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from osamtl.logic.formulas import Conj, Formula, Impl, conjuncts, format_formula
from osamtl.logic.proofs import (
    CondProof,
    ConjElim,
    ConjIntro,
    Hypothesis,
    MP,
    Precondition,
    Proof,
    ProofStep,
    justification_refs,
)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    first_failure: Optional[tuple[int, str]] = None

    def __post_init__(self) -> None:
        if self.valid == (self.first_failure is not None):
            raise ValueError("valid reports carry no failure; invalid reports carry one")


def _is_proper_subsequence(needle: tuple[Formula, ...], haystack: tuple[Formula, ...]) -> bool:
    if not needle or len(needle) >= len(haystack):
        return False
    pos = 0
    for leaf in haystack:
        if pos < len(needle) and needle[pos] == leaf:
            pos += 1
    return pos == len(needle)


def _left_nested(parts: tuple[Formula, ...]) -> Formula:
    node = parts[0]
    for part in parts[1:]:
        node = Conj(node, part)
    return node


def check_proof(proof: Proof) -> ValidityReport:
    """Check every step; failures are reported, not raised."""
    n_pre = len(proof.preconditions)
    judgments: dict[int, Formula] = {i + 1: f for i, f in enumerate(proof.preconditions)}
    discharged: set[int] = set()
    hypothesis_steps: set[int] = set()
    # each open frame remembers the index of the hypothesis that opened it
    open_frames: list[int] = []

    def fail(step: ProofStep, reason: str) -> ValidityReport:
        return ValidityReport(False, (step.index, reason))

    for step in proof.steps:
        index, judgment, justification = step.index, step.judgment, step.justification

        bad_ref = None
        for ref in justification_refs(justification):
            if not 1 <= ref < index or (ref > n_pre and ref not in judgments):
                bad_ref = f"reference {ref} does not cite an earlier line"
                break
            if ref in discharged:
                bad_ref = f"reference {ref} cites a discharged line"
                break
        if bad_ref is not None:
            return fail(step, bad_ref)

        if isinstance(justification, Precondition):
            if judgment not in proof.preconditions:
                return fail(step, "judgment is not one of the preconditions")
        elif isinstance(justification, Hypothesis):
            open_frames.append(index)
            hypothesis_steps.add(index)
        elif isinstance(justification, ConjElim):
            source = conjuncts(judgments[justification.ref])
            if not _is_proper_subsequence(conjuncts(judgment), source):
                return fail(
                    step,
                    f"{format_formula(judgment)} is not a proper conjunct of the cited judgment",
                )
        elif isinstance(justification, ConjIntro):
            expected = _left_nested(tuple(judgments[r] for r in justification.refs))
            if judgment != expected:
                return fail(step, "judgment is not the conjunction of the cited judgments in order")
        elif isinstance(justification, MP):
            implication = judgments[justification.impl_ref]
            if not isinstance(implication, Impl):
                return fail(step, "first citation of mp is not an implication")
            if judgments[justification.antecedent_ref] != implication.antecedent:
                return fail(step, "second citation of mp does not match the antecedent")
            if judgment != implication.consequent:
                return fail(step, "judgment does not match the implication's consequent")
        elif isinstance(justification, CondProof):
            first, last = justification.first_ref, justification.last_ref
            if not open_frames or open_frames[-1] != first:
                return fail(step, f"line {first} is not the innermost open hypothesis")
            if last != index - 1:
                return fail(step, "the closed subderivation must end at the preceding line")
            expected = Impl(judgments[first], judgments[last])
            if judgment != expected:
                return fail(step, f"judgment must be {format_formula(expected)}")
            discharged.update(range(first, last + 1))
            open_frames.pop()
        else:  # pragma: no cover - justification union is closed
            return fail(step, f"unknown justification {justification!r}")

        judgments[index] = judgment

    undischarged = [s for s in proof.steps if s.index not in discharged]
    if not undischarged:
        last_index = proof.steps[-1].index if proof.steps else 0
        return ValidityReport(False, (last_index, "no undischarged conclusion"))
    conclusion = undischarged[-1]
    if conclusion.index in hypothesis_steps:
        return ValidityReport(False, (conclusion.index, "conclusion is an undischarged hypothesis"))
    if conclusion.judgment != proof.goal:
        return ValidityReport(
            False,
            (conclusion.index, f"final judgment {format_formula(conclusion.judgment)} differs from the goal"),
        )
    return ValidityReport(True)
