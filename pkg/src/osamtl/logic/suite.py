"""Run the shipped reasoning corpus.

The seven reasonings license the whole pipeline: the abduction and evaluation
stages refuse to run when any shipped proof fails to validate.
"""

from __future__ import annotations

from pathlib import Path

from osamtl.logic.checker import ValidityReport, check_proof
from osamtl.logic.proofs import ProofDocumentError, parse_proof_document

CORPUS_DIR = Path(__file__).parent / "corpus"

REASONING_NAMES = tuple(f"reasoning{i}" for i in range(1, 8))


class CorpusError(RuntimeError):
    """The corpus directory is missing documents or unreadable."""


def run_reasoning_suite(corpus_dir: Path | str | None = None) -> list[tuple[str, ValidityReport]]:
    """Check every ``.proof`` document in the corpus.

    Unparseable documents become invalid reports (step 0) rather than
    exceptions so a tampered corpus still yields exactly one invalid report;
    a directory that does not contain all seven shipped reasonings raises
    CorpusError("corpus incomplete").
    """
    directory = Path(corpus_dir) if corpus_dir is not None else CORPUS_DIR
    if not directory.is_dir():
        raise CorpusError(f"corpus directory {directory} does not exist")
    files = sorted(directory.glob("*.proof"))
    stems = {f.stem for f in files}
    missing = [name for name in REASONING_NAMES if name not in stems]
    if missing:
        raise CorpusError(f"corpus incomplete: missing {', '.join(missing)}")

    reports: list[tuple[str, ValidityReport]] = []
    for path in files:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"unreadable corpus file {path}: {exc}") from exc
        try:
            proof = parse_proof_document(text, name=path.stem)
        except ProofDocumentError as exc:
            reports.append((path.stem, ValidityReport(False, (0, f"parse error: {exc}"))))
            continue
        reports.append((path.stem, check_proof(proof)))
    return reports
