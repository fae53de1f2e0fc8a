"""Experiment engine: config file handling, the solution registry, and the
generate / prove / abduce / train / evaluate / report pipeline.

A "solution" is named ``<kind>_<regime>``: kind picks the loss family
(``None`` for the plain loss, or one of the noise-robust baselines) and
regime picks the supervision (``T1``, ``T2``, or ``OSAMTLF`` for the
weighted multi-target joint loss).  Everything downstream of the config
is deterministic: reruns with equal config and seeds write byte-identical
CSVs.  Wall-clock runtimes go to a separate ``runtimes.txt`` so the CSVs
stay reproducible.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli
from PIL import Image

from .baselines import (
    BETA_HARD_DEFAULT,
    BETA_SOFT_DEFAULT,
    LOG_FLOOR_DEFAULT,
    SCE_ALPHA_DEFAULT,
    SCE_BETA_DEFAULT,
    BaselineConfig,
    NoiseTransition,
    build_objective,
    estimate_transition,
)
from .imaging import (
    AbductionParams,
    TargetSet,
    abduce_targets,
    load_image,
    load_mask,
    save_mask,
)
from .laf import (
    LafCounts,
    LafReport,
    OracleReport,
    aggregate_laf,
    binarize,
    laf_counts,
    laf_metrics,
    macro_laf,
    pooled_oracle_metrics,
    report_csv_row,
)
from .logic.suite import run_reasoning_suite
from .mtl.features import FEATURE_COUNT
from .mtl.losses import verify_theorem1
from .mtl.models import LogisticFeatures, predict, save_model
from .mtl.train import (
    JointObjective,
    SingleTargetObjective,
    TrainConfig,
    TrainExample,
    train,
    write_trace,
)
from .synthgen import GenParams, LabeledPatch, gen_corpus, load_corpus

RESULTS_HEADER = "solution,ltp,lfp,lfn,lprecision,lrecall,lf1,lfiou"
ORACLE_HEADER = "solution,precision,recall,f1,iou"
DELTAS_HEADER = "solution,anchor,metric,delta,ci_low,ci_high"
LAF_METRICS = ("lprecision", "lrecall", "lf1", "lfiou")
ANCHORS = ("None_T1", "None_T2")

KIND_TO_BASELINE = {
    "None": None,
    "Forward": "forward",
    "Backward": "backward",
    "Boost-Hard": "bootstrap-hard",
    "Boost-Soft": "bootstrap-soft",
    "SCE": "sce",
}
REGIME_TO_WHICH = {"T1": "target1", "T2": "target2", "OSAMTLF": "joint"}
DEFAULT_SOLUTIONS = ("None_T1", "None_T2", "None_OSAMTLF")


class ExperimentError(RuntimeError):
    """A pipeline stage failed; the message starts with the stage name."""


def parse_solution(name: str) -> tuple[str, str]:
    """Split a solution name into (kind, target selector)."""
    head, sep, tail = name.rpartition("_")
    if sep and head in KIND_TO_BASELINE and tail in REGIME_TO_WHICH:
        return head, REGIME_TO_WHICH[tail]
    kinds = ", ".join(sorted(KIND_TO_BASELINE))
    raise ValueError(
        f"unknown solution name {name!r}; expected <kind>_<regime> with "
        f"kind in {{{kinds}}} and regime in {{T1, T2, OSAMTLF}}"
    )


@dataclass(frozen=True)
class BaselineSettings:
    """Shared parameters for the noise-robust loss families."""

    transition: tuple[tuple[float, float], tuple[float, float]] | None = None
    beta_hard: float = BETA_HARD_DEFAULT
    beta_soft: float = BETA_SOFT_DEFAULT
    sce_alpha: float = SCE_ALPHA_DEFAULT
    sce_beta: float = SCE_BETA_DEFAULT
    log_floor: float = LOG_FLOOR_DEFAULT

    def __post_init__(self) -> None:
        if self.transition is not None:
            rows = tuple(tuple(float(v) for v in row) for row in self.transition)
            NoiseTransition(rows)  # validates shape and stochasticity
            object.__setattr__(self, "transition", rows)


def _default_train_config() -> TrainConfig:
    # The experiment schedule; longer than the library default because the
    # refined target is a rare class and needs the extra epochs to converge.
    return TrainConfig(learning_rate=0.2, epochs=300)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; the TOML file mirrors these fields."""

    gen: GenParams = field(default_factory=GenParams)
    corpus_path: Path | None = None
    n_train: int = 200
    n_val: int = 50
    n_test: int = 50
    abduction: AbductionParams = field(default_factory=AbductionParams)
    train: TrainConfig = field(default_factory=_default_train_config)
    solutions: tuple[str, ...] = DEFAULT_SOLUTIONS
    bootstrap_resamples: int = 1000
    ci_level: float = 0.95
    seed: int = 0
    baselines: BaselineSettings = field(default_factory=BaselineSettings)

    def __post_init__(self) -> None:
        solutions = tuple(self.solutions)
        object.__setattr__(self, "solutions", solutions)
        if not solutions:
            raise ValueError("config needs at least one solution")
        if len(set(solutions)) != len(solutions):
            raise ValueError("solution names must be unique")
        for name in solutions:
            parse_solution(name)
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie strictly between 0 and 1")
        if self.bootstrap_resamples < 1:
            raise ValueError("bootstrap_resamples must be positive")
        for label, count in (("n_train", self.n_train), ("n_val", self.n_val),
                             ("n_test", self.n_test)):
            if count < 0:
                raise ValueError(f"{label} must be non-negative")
        if self.corpus_path is not None:
            object.__setattr__(self, "corpus_path", Path(self.corpus_path))


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _build_section(raw: dict, section: str, keys: dict) -> dict:
    unknown = set(raw) - set(keys)
    if unknown:
        raise ValueError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )
    out = {}
    for name, value in raw.items():
        convert = keys[name]
        out[name] = convert(value) if convert else value
    return out


def _pair(value) -> tuple:
    seq = tuple(value)
    if len(seq) != 2:
        raise ValueError(f"expected a two-element list, got {value!r}")
    return seq


def load_config(path: Path | str) -> ExperimentConfig:
    """Parse a TOML experiment config; unknown sections or keys are errors."""
    with open(path, "rb") as handle:
        raw = tomli.load(handle)
    known = {"corpus", "abduction", "train", "experiment", "baselines"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    corpus = dict(raw.get("corpus", {}))
    corpus_path = corpus.pop("path", None)
    counts = {name: corpus.pop(name, default)
              for name, default in (("n_train", 200), ("n_val", 50), ("n_test", 50))}
    gen_keys = {
        "patch_size": int, "dots_per_patch": _pair, "dot_radius": _pair,
        "dot_intensity": _pair, "background_intensity": _pair,
        "texture_noise_std": float, "polygon_slack": float, "seed": int,
        "soft_dots_per_patch": _pair, "soft_dot_intensity": _pair,
        "soft_dot_sigma": _pair, "decoys_per_patch": _pair,
        "decoy_radius": _pair, "distractors_per_patch": _pair,
        "distractor_intensity": _pair, "distractor_radius": _pair,
        "distractor_inside_fraction": float,
    }
    gen = GenParams(**_build_section(corpus, "corpus", gen_keys))

    abduction_keys = {
        "gray_threshold": int, "canny_sigma": float, "canny_low_q": float,
        "canny_high_q": float, "edge_dilate_radius": int, "alphas": _pair,
    }
    abduction = AbductionParams(
        **_build_section(dict(raw.get("abduction", {})), "abduction", abduction_keys)
    )

    train_keys = {
        "learning_rate": float, "momentum": float, "epochs": int,
        "batch_size": int, "seed": int, "base_loss": str, "alphas": _pair,
    }
    train_section = _build_section(dict(raw.get("train", {})), "train", train_keys)
    defaults = _default_train_config()
    train_cfg = replace(defaults, **train_section)

    experiment_keys = {
        "solutions": tuple, "bootstrap_resamples": int, "ci_level": float,
        "seed": int,
    }
    experiment = _build_section(
        dict(raw.get("experiment", {})), "experiment", experiment_keys
    )

    baseline_keys = {
        "transition": None, "beta_hard": float, "beta_soft": float,
        "sce_alpha": float, "sce_beta": float, "log_floor": float,
    }
    baselines = BaselineSettings(
        **_build_section(dict(raw.get("baselines", {})), "baselines", baseline_keys)
    )

    return ExperimentConfig(
        gen=gen,
        corpus_path=Path(corpus_path) if corpus_path else None,
        n_train=int(counts["n_train"]),
        n_val=int(counts["n_val"]),
        n_test=int(counts["n_test"]),
        abduction=abduction,
        train=train_cfg,
        solutions=tuple(experiment.get("solutions", DEFAULT_SOLUTIONS)),
        bootstrap_resamples=int(experiment.get("bootstrap_resamples", 1000)),
        ci_level=float(experiment.get("ci_level", 0.95)),
        seed=int(experiment.get("seed", 0)),
        baselines=baselines,
    )


def override_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Point every stage at one seed: corpus, SGD, and bootstrap resampling."""
    return replace(
        config,
        seed=seed,
        gen=replace(config.gen, seed=seed),
        train=replace(config.train, seed=seed),
    )


def bootstrap_ci(per_image_deltas, resamples: int = 1000, level: float = 0.95,
                 seed=0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of per-image deltas."""
    deltas = np.asarray(per_image_deltas, dtype=np.float64).reshape(-1)
    if deltas.size == 0:
        raise ValueError("bootstrap_ci needs at least one delta")
    if resamples < 1:
        raise ValueError("resamples must be positive")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    if np.all(deltas == deltas[0]):
        return float(deltas[0]), float(deltas[0])
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, deltas.size, size=(resamples, deltas.size))
    means = deltas[picks].mean(axis=1)
    tail = (1.0 - level) / 2.0
    return float(np.quantile(means, tail)), float(np.quantile(means, 1.0 - tail))


@dataclass(frozen=True, eq=False)
class SolutionResult:
    name: str
    laf: LafReport
    macro: LafReport
    oracle: OracleReport
    runtime: float
    per_image: tuple[LafCounts, ...]
    predictions: tuple
    best_epoch: int
    model: object
    trace: tuple


@dataclass(frozen=True, eq=False)
class ResultTable:
    rows: tuple[SolutionResult, ...]

    def row(self, name: str) -> SolutionResult:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class PreparedData:
    splits: dict
    targets: dict
    examples: dict
    manifest: dict
    manifest_path: Path


def _thread_cap(n_solutions: int) -> int:
    raw = os.environ.get("OSAMTL_THREADS")
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            cap = -1
        if cap < 1:
            raise ValueError("OSAMTL_THREADS must be a positive integer")
    return max(1, min(n_solutions, cap))


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(f"{name}: {exc}") from exc


def prepare_data(config: ExperimentConfig, out_dir: Path) -> PreparedData:
    """Generate or load the corpus, then abduce targets for every split."""
    if config.corpus_path is not None:
        manifest_path = Path(config.corpus_path)
        if manifest_path.is_dir():
            manifest_path = manifest_path / "manifest.json"
    else:
        corpus_dir = out_dir / "corpus"
        gen_corpus(config.gen, config.n_train, config.n_val, config.n_test, corpus_dir)
        manifest_path = corpus_dir / "manifest.json"
    splits = load_corpus(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    targets: dict = {}
    examples: dict = {}
    for split, patches in splits.items():
        targets[split] = [
            abduce_targets(p.image, list(p.polygons), config.abduction)
            for p in patches
        ]
        examples[split] = [
            TrainExample(p.image, t) for p, t in zip(patches, targets[split])
        ]
    return PreparedData(splits, targets, examples, manifest, manifest_path)


def _needs_transition(config: ExperimentConfig) -> bool:
    for name in config.solutions:
        kind, _ = parse_solution(name)
        if KIND_TO_BASELINE[kind] in ("forward", "backward"):
            return True
    return False


def resolve_transition(config: ExperimentConfig, data: PreparedData) -> NoiseTransition | None:
    """The user-supplied matrix, or frequencies pooled over the train split."""
    if config.baselines.transition is not None:
        return NoiseTransition(config.baselines.transition)
    if not _needs_transition(config):
        return None
    train_targets = data.targets.get("train", [])
    if not train_targets:
        raise ValueError("transition estimation needs a non-empty train split")
    return estimate_transition(
        [t.target1 for t in train_targets],
        [t.target2 for t in train_targets],
    )


def build_solution_objective(name: str, config: ExperimentConfig,
                             transition: NoiseTransition | None):
    kind, which = parse_solution(name)
    baseline_kind = KIND_TO_BASELINE[kind]
    if baseline_kind is None:
        if which == "joint":
            return JointObjective(config.train.base_loss)
        return SingleTargetObjective(which, config.train.base_loss)
    settings = config.baselines
    beta = None
    if baseline_kind == "bootstrap-hard":
        beta = settings.beta_hard
    elif baseline_kind == "bootstrap-soft":
        beta = settings.beta_soft
    baseline = BaselineConfig(
        kind=baseline_kind,
        transition=transition if baseline_kind in ("forward", "backward") else None,
        beta=beta,
        alpha_sce=settings.sce_alpha,
        beta_sce=settings.sce_beta,
        log_floor=settings.log_floor,
    )
    return build_objective(baseline, which)


def verify_joint_wiring(config: ExperimentConfig, data: PreparedData,
                        checkpoints: int = 3, tolerance: float = 1e-9) -> float:
    """The joint objective at random checkpoints must equal the base loss
    against the weight-blended target (the one-step identity, end to end)."""
    pool = data.examples.get("train") or data.examples.get("test")
    if not pool:
        raise ValueError("no examples available for the identity check")
    rng = np.random.default_rng([config.seed, 104729])
    worst = 0.0
    for _ in range(checkpoints):
        model = LogisticFeatures(rng.normal(0.0, 2.0, size=FEATURE_COUNT))
        example = pool[int(rng.integers(0, len(pool)))]
        probs = predict(model, example.image).probs
        residual = verify_theorem1(probs, example.targets,
                                   base=config.train.base_loss)
        worst = max(worst, residual)
        if residual > tolerance:
            raise ValueError(
                f"joint loss deviates from its blended form by {residual:.3e}"
            )
    return worst


def _train_solution(name: str, config: ExperimentConfig, data: PreparedData,
                    transition: NoiseTransition | None):
    objective = build_solution_objective(name, config, transition)
    started = time.perf_counter()
    result = train(data.examples["train"], objective, config.train,
                   val_examples=data.examples["val"])
    return result, time.perf_counter() - started


def _evaluate_solution(name: str, result, elapsed: float,
                       data: PreparedData) -> SolutionResult:
    started = time.perf_counter()
    counts = []
    predictions = []
    oracle_pairs = []
    for patch, targets in zip(data.splits["test"], data.targets["test"]):
        prediction = predict(result.model, patch.image)
        t_f, t_b = binarize(prediction.probs)
        predictions.append(t_f)
        counts.append(laf_counts(t_f, t_b, targets.target1, targets.target2))
        oracle_pairs.append((t_f, patch.true_mask))
    micro = aggregate_laf(counts)
    macro = macro_laf(counts)
    oracle = pooled_oracle_metrics(oracle_pairs)
    elapsed += time.perf_counter() - started
    return SolutionResult(
        name=name, laf=micro, macro=macro, oracle=oracle, runtime=elapsed,
        per_image=tuple(counts), predictions=tuple(predictions),
        best_epoch=result.best_epoch, model=result.model, trace=result.trace,
    )


def _metric_value(counts: LafCounts, metric: str) -> float:
    return getattr(laf_metrics(counts), metric)


def compute_deltas(table: ResultTable, config: ExperimentConfig) -> list[str]:
    """CSV rows of per-image mean improvements against each anchor solution."""
    names = [row.name for row in table.rows]
    rows = []
    for anchor_index, anchor_name in enumerate(ANCHORS):
        if anchor_name not in names:
            continue
        anchor = table.row(anchor_name)
        for solution_index, row in enumerate(table.rows):
            if row.name == anchor_name:
                continue
            for metric_index, metric in enumerate(LAF_METRICS):
                deltas = [
                    _metric_value(mine, metric) - _metric_value(theirs, metric)
                    for mine, theirs in zip(row.per_image, anchor.per_image)
                ]
                low, high = bootstrap_ci(
                    deltas,
                    resamples=config.bootstrap_resamples,
                    level=config.ci_level,
                    seed=[config.seed, anchor_index, solution_index, metric_index],
                )
                mean = float(np.mean(deltas))
                rows.append(
                    f"{row.name},{anchor_name},{metric},"
                    f"{mean:.6f},{low:.6f},{high:.6f}"
                )
    return rows


def _bar_charts(chart_dir: Path, names: list[str],
                values_by_metric: dict[str, list[float]]) -> None:
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "osamtl"
    chart_dir.mkdir(parents=True, exist_ok=True)
    for metric, values in values_by_metric.items():
        fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 3.2))
        ax.bar(range(len(names)), values, color="#4878a8")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel(metric)
        ax.set_title(f"test {metric} by solution")
        fig.tight_layout()
        fig.savefig(chart_dir / f"{metric}.svg", format="svg",
                    metadata={"Date": None})
        plt.close(fig)


def _write_charts(chart_dir: Path, table: ResultTable) -> None:
    names = [row.name for row in table.rows]
    values = {metric: [getattr(row.laf, metric) for row in table.rows]
              for metric in LAF_METRICS}
    _bar_charts(chart_dir, names, values)


def write_artifacts(table: ResultTable, config: ExperimentConfig,
                    data: PreparedData, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    results = [RESULTS_HEADER]
    macro_rows = [RESULTS_HEADER]
    oracle_rows = [ORACLE_HEADER]
    runtimes = []
    for row in table.rows:
        results.append(report_csv_row(row.name, row.laf))
        macro_rows.append(report_csv_row(row.name, row.macro))
        oracle_rows.append(
            f"{row.name},{row.oracle.precision:.4f},{row.oracle.recall:.4f},"
            f"{row.oracle.f1:.4f},{row.oracle.iou:.4f}"
        )
        runtimes.append(f"{row.name} {row.runtime:.3f}s best_epoch={row.best_epoch}")
    (out_dir / "results.csv").write_text("\n".join(results) + "\n", encoding="utf-8")
    (out_dir / "macro_results.csv").write_text(
        "\n".join(macro_rows) + "\n", encoding="utf-8"
    )
    (out_dir / "oracle.csv").write_text("\n".join(oracle_rows) + "\n", encoding="utf-8")
    delta_rows = compute_deltas(table, config)
    (out_dir / "deltas.csv").write_text(
        "\n".join([DELTAS_HEADER, *delta_rows]) + "\n", encoding="utf-8"
    )
    # Wall-clock numbers vary run to run, so they stay out of the CSVs.
    (out_dir / "runtimes.txt").write_text("\n".join(runtimes) + "\n", encoding="utf-8")

    models_dir = out_dir / "models"
    traces_dir = out_dir / "traces"
    models_dir.mkdir(exist_ok=True)
    traces_dir.mkdir(exist_ok=True)
    test_stems = [Path(rel).name.removesuffix(".png")
                  for rel in data.manifest.get("test", [])]
    predictions_dir = out_dir / "predictions"
    for row in table.rows:
        save_model(row.model, models_dir / f"{row.name}.json")
        write_trace(row.trace, traces_dir / f"{row.name}.csv")
        solution_dir = predictions_dir / row.name
        solution_dir.mkdir(parents=True, exist_ok=True)
        for stem, mask in zip(test_stems, row.predictions):
            save_mask(mask, solution_dir / f"{stem}.png")

    targets_dir = out_dir / "targets"
    targets_dir.mkdir(exist_ok=True)
    for stem, targets in zip(test_stems, data.targets.get("test", [])):
        save_mask(targets.target1, targets_dir / f"{stem}_t1.png")
        save_mask(targets.target2, targets_dir / f"{stem}_t2.png")

    manifest_path = data.manifest_path
    try:
        manifest_ref = str(manifest_path.relative_to(out_dir))
    except ValueError:
        manifest_ref = str(manifest_path.resolve())
    run_info = {
        "solutions": [row.name for row in table.rows],
        "test_images": list(data.manifest.get("test", [])),
        "corpus_manifest": manifest_ref,
        "ci_level": config.ci_level,
        "bootstrap_resamples": config.bootstrap_resamples,
        "seed": config.seed,
    }
    (out_dir / "run.json").write_text(
        json.dumps(run_info, indent=2) + "\n", encoding="utf-8"
    )

    _write_charts(out_dir / "charts", table)


def run_experiment(config: ExperimentConfig, out_dir: Path | str) -> ResultTable:
    """The full pipeline; any stage failure aborts with the stage name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def _prove() -> None:
        outcomes = run_reasoning_suite()
        bad = [(name, report) for name, report in outcomes if not report.valid]
        if bad:
            name, report = bad[0]
            step, reason = report.first_failure
            raise ValueError(f"{name} fails at step {step}: {reason}")

    _stage("prove", _prove)
    data = _stage("corpus", prepare_data, config, out_dir)

    def _check_splits() -> None:
        if not data.examples.get("train"):
            raise ValueError("train split is empty")
        if not data.examples.get("test"):
            raise ValueError("test split is empty")

    _stage("corpus", _check_splits)
    transition = _stage("abduce", resolve_transition, config, data)
    _stage("theorem1", verify_joint_wiring, config, data)

    def _train_all() -> list:
        workers = _thread_cap(len(config.solutions))
        if workers == 1:
            return [_train_solution(name, config, data, transition)
                    for name in config.solutions]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_train_solution, name, config, data, transition)
                for name in config.solutions
            ]
            return [f.result() for f in futures]

    trained = _stage("train", _train_all)
    rows = _stage(
        "eval",
        lambda: tuple(
            _evaluate_solution(name, result, elapsed, data)
            for name, (result, elapsed) in zip(config.solutions, trained)
        ),
    )
    table = ResultTable(rows)
    _stage("report", write_artifacts, table, config, data, out_dir)
    return table


def write_overlays(result_dir: Path | str) -> int:
    """Recolor each saved test prediction by its logical classification.

    Hits inside the refined target are green, predicted pixels outside the
    permissive labels are red, missed refined-target pixels are blue; all
    other pixels keep the grayscale image.  Returns the overlay count.
    """
    result_dir = Path(result_dir)
    run_path = result_dir / "run.json"
    if not run_path.is_file():
        raise FileNotFoundError("nothing to report: run.json is missing")
    run_info = json.loads(run_path.read_text(encoding="utf-8"))
    manifest_ref = Path(run_info["corpus_manifest"])
    manifest_path = manifest_ref if manifest_ref.is_absolute() else result_dir / manifest_ref
    corpus_root = manifest_path.parent

    written = 0
    for solution in run_info["solutions"]:
        overlay_dir = result_dir / "overlays" / solution
        overlay_dir.mkdir(parents=True, exist_ok=True)
        for rel in run_info["test_images"]:
            stem = Path(rel).name.removesuffix(".png")
            image = load_image(corpus_root / rel)
            pred = load_mask(result_dir / "predictions" / solution / f"{stem}.png",
                             like=image).bits
            t1 = load_mask(result_dir / "targets" / f"{stem}_t1.png", like=image).bits
            t2 = load_mask(result_dir / "targets" / f"{stem}_t2.png", like=image).bits
            rgb = np.repeat(image.intensities[:, :, None], 3, axis=2)
            rgb[pred & t2] = (0, 168, 0)
            rgb[pred & ~t1] = (210, 0, 0)
            rgb[~pred & t2] = (0, 0, 210)
            Image.fromarray(rgb, mode="RGB").save(
                overlay_dir / f"{stem}.png", format="PNG"
            )
            written += 1
    return written


def regenerate_charts(result_dir: Path | str) -> int:
    """Rebuild the bar charts from a result directory's results.csv."""
    result_dir = Path(result_dir)
    results_path = result_dir / "results.csv"
    if not results_path.is_file():
        raise FileNotFoundError("nothing to report: results.csv is missing")
    lines = results_path.read_text(encoding="utf-8").strip().splitlines()
    if len(lines) < 2:
        raise ValueError("nothing to report: results.csv has no rows")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    names = [row[0] for row in rows]
    values = {metric: [float(row[header.index(metric)]) for row in rows]
              for metric in LAF_METRICS}
    _bar_charts(result_dir / "charts", names, values)
    return len(LAF_METRICS)
