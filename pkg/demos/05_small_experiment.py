"""
Demo 05: a small end-to-end comparison run
==========================================
Generates a reduced corpus, trains one model per listed solution, scores
every model with the logical metrics, and writes the artifact tree (CSVs,
charts, overlays, checkpoints).  A solution name is <loss kind>_<supervision>:

  None_T1        plain cross entropy against the loose polygon target
  None_T2        plain cross entropy against the narrow edge target
  None_OSAMTLF   the weighted joint loss over both targets
  SCE_T1         symmetric cross entropy against the polygon target

The full-size run (200/50/50 patches, three solutions) is what
`osamtl run --out-dir ...` executes; this one is cut down to finish quickly.
"""

from dataclasses import replace
from pathlib import Path

from osamtl.experiment import default_config, run_experiment

OUT = Path(__file__).parent / "out" / "experiment"


def main():
    config = default_config()
    config = replace(
        config,
        n_train=40, n_val=10, n_test=15,
        solutions=("None_T1", "None_T2", "None_OSAMTLF", "SCE_T1"),
        train=replace(config.train, epochs=120),
        bootstrap_resamples=400,
    )

    print(f"running {len(config.solutions)} solutions on "
          f"{config.n_train}/{config.n_val}/{config.n_test} patches...")
    table = run_experiment(config, OUT)

    print(f"\n{'solution':<14} {'Lprec':>7} {'Lrec':>7} {'Lf1':>7} {'LfIoU':>7}  best_ep")
    for result in table.rows:
        r = result.laf
        print(f"{result.name:<14} {r.lprecision:7.4f} {r.lrecall:7.4f} "
              f"{r.lf1:7.4f} {r.lfiou:7.4f}  {result.best_epoch:7d}")

    print(f"\nartifacts under {OUT}:")
    for path in sorted(OUT.iterdir()):
        print(f"  {path.name}")


if __name__ == "__main__":
    main()
