"""Propositional proofs in the conjunction/implication fragment.

`formulas` holds the formula AST and its parser, `proofs` the proof document
model and the line-oriented ``.proof`` DSL, `checker` the rule checker, and
`suite` the runner for the shipped reasoning corpus that gates the abduction
and evaluation pipelines.
"""

from osamtl.logic.checker import ValidityReport, check_proof
from osamtl.logic.formulas import (
    Atom,
    Conj,
    Formula,
    FormulaSyntaxError,
    Impl,
    format_formula,
    parse_formula,
)
from osamtl.logic.proofs import (
    CondProof,
    ConjElim,
    ConjIntro,
    Hypothesis,
    MP,
    Precondition,
    Proof,
    ProofDocumentError,
    ProofStep,
    parse_proof_document,
)
from osamtl.logic.suite import CORPUS_DIR, CorpusError, run_reasoning_suite

__all__ = [
    "Atom",
    "Conj",
    "CondProof",
    "ConjElim",
    "ConjIntro",
    "CORPUS_DIR",
    "CorpusError",
    "Formula",
    "FormulaSyntaxError",
    "format_formula",
    "Hypothesis",
    "Impl",
    "MP",
    "parse_formula",
    "parse_proof_document",
    "Precondition",
    "Proof",
    "ProofDocumentError",
    "ProofStep",
    "run_reasoning_suite",
    "ValidityReport",
    "check_proof",
]
