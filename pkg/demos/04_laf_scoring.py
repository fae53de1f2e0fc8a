"""
Demo 04: scoring a prediction without clean labels
==================================================
When only the two abduced targets exist, ordinary precision/recall cannot be
computed.  The logical counts use each target for what it is good at:

  LTP = predicted foreground inside Target2   (Target2 is precise)
  LFP = predicted foreground outside Target1  (Target1 is complete)
  LFN = predicted background inside Target2

A pixel that is foreground in Target1 but background in Target2 is evidence
for nothing, so a prediction there is counted nowhere.
"""

import numpy as np

from osamtl.imaging import BinaryMask
from osamtl.laf import aggregate_laf, binarize, laf_counts, laf_metrics

# One row of eight pixels, drawn as strings for readability.
#   target1: --XXXX--      target2: ---XX---      prediction: -X-XX-X-
T1 = "--XXXX--"
T2 = "---XX---"
PRED = "-X-XX-X-"


def _mask(row: str) -> BinaryMask:
    return BinaryMask(np.array([[c == "X" for c in row]]))


def main():
    t_f, t_b = binarize(np.array([[0.9 if c == "X" else 0.1 for c in PRED]]))
    counts = laf_counts(t_f, t_b, _mask(T1), _mask(T2))

    print(f"target1     {T1}")
    print(f"target2     {T2}")
    print(f"prediction  {PRED}")
    print(f"counts: LTP={counts.ltp:.0f} LFP={counts.lfp:.0f} LFN={counts.lfn:.0f}")
    # Pixel 3 (0-based) sits in target1 but outside target2 with a positive
    # prediction: it appears in none of the three counts.

    report = laf_metrics(counts)
    print(f"Lprecision={report.lprecision:.4f}  Lrecall={report.lrecall:.4f}  "
          f"Lf1={report.lf1:.4f}  LfIoU={report.lfiou:.4f}")

    # LfIoU is a pure function of Lf1, so it adds no ranking information;
    # it is kept because segmentation work likes IoU-flavored numbers.
    lf1 = report.lf1
    print(f"lf1/(2-lf1) = {lf1 / (2.0 - lf1):.12f} = lfiou")

    # Corpus-level scores average the counts first (micro), so big images
    # carry proportionally more weight than in a mean-of-ratios (macro).
    other = laf_counts(t_b, t_f, _mask(T1), _mask(T2))  # the inverted guess
    pooled = aggregate_laf([counts, other])
    print(f"\npooled over two images: LTP={pooled.counts.ltp:.1f} "
          f"LFP={pooled.counts.lfp:.1f} LFN={pooled.counts.lfn:.1f} "
          f"Lf1={pooled.lf1:.4f}")


if __name__ == "__main__":
    main()
