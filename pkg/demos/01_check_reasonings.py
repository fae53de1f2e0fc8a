"""
Demo 01: machine-checked reasoning
==================================
The abduction pipeline is licensed by seven propositional proofs that ship
with the package.  This script checks all of them, then corrupts one step
and shows that the checker pinpoints the first broken line.
"""

from osamtl.logic import CORPUS_DIR, check_proof, parse_proof_document, run_reasoning_suite


def main():
    # 1. Check the shipped corpus.
    print("Checking the shipped reasoning corpus:")
    for name, report in run_reasoning_suite():
        verdict = "valid" if report.valid else f"INVALID at {report.first_failure}"
        print(f"  {name}: {verdict}")

    # 2. Corrupt one citation and re-check.
    #    Step 15 of reasoning 1 is "q ; mp 3 14".  Citing line 4 instead of 3
    #    asks modus ponens to fire from the wrong implication.
    text = (CORPUS_DIR / "reasoning1.proof").read_text()
    tampered = text.replace("mp 3 14", "mp 4 14")
    proof = parse_proof_document(tampered, name="reasoning1-tampered")
    report = check_proof(proof)
    print("\nAfter mis-citing step 15:")
    print(f"  valid: {report.valid}")
    index, reason = report.first_failure
    print(f"  first failure at step {index}: {reason}")


if __name__ == "__main__":
    main()
