"""
Demo 02: abducing two targets from loose polygon labels
=======================================================
A generated patch comes with convex polygons that merely surround the dark
dots of interest.  Abduction turns those loose labels into two trainable
targets:

  Target1 = the polygon interiors       (complete but imprecise)
  Target2 = dark pixels near edges,     (precise but incomplete)
            kept only inside Target1

Because the generator also knows the exact dot mask, we can score both
targets against the truth and see the recall/precision trade they make.
"""

from pathlib import Path

from osamtl.imaging import abduce_targets, save_image, save_mask
from osamtl.laf import oracle_metrics
from osamtl.synthgen import GenParams, gen_patch

OUT = Path(__file__).parent / "out" / "abduce"


def main():
    patch = gen_patch(GenParams(), index=0)
    targets = abduce_targets(patch.image, list(patch.polygons))

    truth = patch.true_mask
    print(f"patch 0: {patch.image.width}x{patch.image.height} pixels, "
          f"{int(truth.bits.sum())} true dot pixels, {len(patch.polygons)} polygons")

    for name, mask in (("Target1", targets.target1), ("Target2", targets.target2)):
        report = oracle_metrics(mask, truth)
        print(f"  {name}: {int(mask.bits.sum()):4d} px  "
              f"precision={report.precision:.3f}  recall={report.recall:.3f}")

    # Target1 swallows every dot (recall 1) but also lots of background;
    # Target2 keeps almost only dot pixels but misses some.  Neither alone is
    # the truth, which is exactly why both are kept for training.
    OUT.mkdir(parents=True, exist_ok=True)
    save_image(patch.image, OUT / "patch.png")
    save_mask(truth, OUT / "true.png")
    save_mask(targets.target1, OUT / "target1.png")
    save_mask(targets.target2, OUT / "target2.png")
    print(f"\nwrote patch + masks to {OUT}")


if __name__ == "__main__":
    main()
