"""Experiment orchestration: the end-to-end pipeline and its stages.

Stages run in sequence (ingest, extract, aggregate, train, evaluate,
compare, plot); each tags its failures so the CLI can report which stage
aborted. All randomness derives from the run seed, and every emitted
report and comparison document is byte-reproducible for a fixed config.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .categories import CLASSIFIED_CATEGORIES
from .config import BackendConfig, RunConfig, derive_seed
from .design import DesignMatrix, build_design, load_design, save_design, split_design
from .embeddings import extract, scan_cache, slide_rng, write_cache
from .learners import (
    KIND_LABELS,
    TABLE_ORDER,
    ClassifierSpec,
    CvPlan,
    build_classifier,
    cross_validate,
    default_grid,
    save_model,
)
from .manifest import Manifest, category_counts, effective_split, filter_categories, parse_manifest
from .metrics import EvaluationReport, classification_report
from .rocstats import PairedScores, delong_test, paired_ttest, venkatraman_test
from .svgplot import line_plot, write_svg
from .tracker import Tracker, WebhookSink


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        return f"[{self.stage}] {super().__str__()}"


def _stage_guard(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, str(exc)) from exc


def _write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def convert(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON serializable: {type(o).__name__}")

    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=convert) + "\n", encoding="utf-8")
    return path


# -- stages -------------------------------------------------------------------

def ingest_stage(cfg: RunConfig) -> Manifest:
    """Parse, filter to the three classified categories, derive the split."""
    manifest_path = Path(cfg.manifest)
    if not manifest_path.exists():
        raise StageError("ingest", f"manifest not found: {manifest_path}")
    manifest = parse_manifest(manifest_path, delimiter=cfg.delimiter)
    kept = filter_categories(manifest, CLASSIFIED_CATEGORIES)
    kept, _counts = effective_split(kept)
    return kept


def extract_stage(cfg: RunConfig, manifest: Manifest) -> None:
    """Produce and cache embeddings for every backend and slide."""
    for backend in cfg.backends:
        spec = backend.spec(cfg.seed)
        directory = Path(cfg.cache_dir) / backend.name
        if spec.kind == "precomputed":
            report = scan_cache(spec.source_dir, manifest)
            if report.missing:
                raise StageError(
                    "extract",
                    f"backend {backend.name!r}: {len(report.missing)} slide(s) missing "
                    f"from {spec.source_dir}: {', '.join(report.missing[:10])}",
                )
        for meta in manifest:
            assert meta.effective is not None
            m = patch_count(backend, spec.seed, meta.file)
            emb = extract(spec, meta.file, meta.category, meta.effective, patch_count=m)
            write_cache(emb, directory)


def patch_count(backend: BackendConfig, spec_seed: int, slide_id: str) -> int:
    """Deterministic per-slide synthetic patch count within the configured range."""
    lo, hi = backend.patch_count_min, backend.patch_count_max
    if lo == hi:
        return lo
    rng = slide_rng(spec_seed, f"m#{slide_id}")
    return int(rng.integers(lo, hi + 1))


def aggregate_stage(cfg: RunConfig, manifest: Manifest) -> dict[str, DesignMatrix]:
    """Mean-aggregate caches into one design matrix per backend."""
    designs: dict[str, DesignMatrix] = {}
    for backend in cfg.backends:
        dm = build_design(manifest, cfg.cache_dir, backend.name)
        save_design(dm, Path(cfg.out_dir) / backend.name / "design.dmat")
        designs[backend.name] = dm
    return designs


@dataclass
class FitResult:
    backend: str
    kind: str
    cv_grid: list[dict]
    best_params: dict
    best_cv_accuracy: float
    model: object
    proba: np.ndarray
    report: EvaluationReport
    test_slide_ids: list[str]
    test_labels: np.ndarray


def _classifier_grid(cfg: RunConfig, kind: str) -> list[ClassifierSpec]:
    seed = derive_seed(cfg.seed, f"train:{kind}")
    overrides = cfg.grids.get(kind)
    return default_grid(kind, seed=seed, overrides=overrides)


def _fit_one(args: tuple) -> FitResult:
    backend_name, kind, rows_tr, y_tr, rows_te, y_te, ids_te, grid, cv_folds, cv_seed = args
    plan = CvPlan(n_folds=cv_folds, stratified=True, seed=cv_seed)
    cv = cross_validate(grid, rows_tr, y_tr, plan)
    model = build_classifier(cv.best_spec).fit(rows_tr, y_tr)
    proba = model.predict_proba(rows_te)
    report = classification_report(
        y_te, proba, classifier_id=cv.best_spec.spec_id(), backend=backend_name
    )
    return FitResult(
        backend=backend_name,
        kind=kind,
        cv_grid=cv.summary(),
        best_params=dict(cv.best_spec.params),
        best_cv_accuracy=float(cv.mean_accuracy[cv.best_index]),
        model=model,
        proba=proba,
        report=report,
        test_slide_ids=ids_te,
        test_labels=y_te,
    )


def train_evaluate_stage(
    cfg: RunConfig, designs: dict[str, DesignMatrix], tracker: Tracker | None = None
) -> dict[tuple[str, str], FitResult]:
    """Cross-validate, fit, and evaluate every (backend, classifier) pair."""
    tasks = []
    for backend in cfg.backends:
        dm = designs[backend.name]
        train_dm, test_dm = split_design(dm)
        y_tr = train_dm.labels.astype(np.int64)
        y_te = test_dm.labels.astype(np.int64)
        for kind in cfg.classifiers:
            grid = _classifier_grid(cfg, kind)
            tasks.append(
                (
                    backend.name,
                    kind,
                    train_dm.rows.astype(np.float64),
                    y_tr,
                    test_dm.rows.astype(np.float64),
                    y_te,
                    list(test_dm.slide_ids),
                    grid,
                    cfg.cv_folds,
                    derive_seed(cfg.seed, "cv"),
                )
            )

    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            fitted = list(pool.map(_fit_one, tasks))
    else:
        fitted = [_fit_one(t) for t in tasks]

    results: dict[tuple[str, str], FitResult] = {}
    for res in fitted:
        results[(res.backend, res.kind)] = res
        base = Path(cfg.out_dir) / res.backend
        _write_json(
            base / "cv" / f"{res.kind}.json",
            {
                "kind": res.kind,
                "grid": res.cv_grid,
                "best": {
                    "params": res.best_params,
                    "seed": res.model.spec.seed,
                    "mean_accuracy": res.best_cv_accuracy,
                },
            },
        )
        save_model(res.model, base / "models" / f"{res.kind}.modl")
        _write_json(base / "reports" / f"{res.kind}.json", res.report.to_dict())
        _write_json(
            base / "predictions" / f"{res.kind}.json",
            {
                "backend": res.backend,
                "kind": res.kind,
                "slide_ids": res.test_slide_ids,
                "y_true": res.test_labels.tolist(),
                "proba": res.proba.tolist(),
            },
        )
        if tracker is not None:
            tracker.track("train", f"{res.backend}/{res.kind}/cv_accuracy", res.best_cv_accuracy)
            tracker.track("evaluate", f"{res.backend}/{res.kind}/test_accuracy", res.report.accuracy)
    return results


def accuracy_table(cfg: RunConfig, results: dict[tuple[str, str], FitResult]) -> dict:
    backends = [b.name for b in cfg.backends]
    rows = []
    for kind in TABLE_ORDER:
        if kind not in cfg.classifiers:
            continue
        rows.append(
            {
                "classifier": KIND_LABELS[kind],
                "kind": kind,
                "accuracy": {b: results[(b, kind)].report.accuracy for b in backends},
            }
        )
    return {"metric": "accuracy", "backends": backends, "rows": rows}


def f1_table(cfg: RunConfig, results: dict[tuple[str, str], FitResult]) -> dict:
    backends = [b.name for b in cfg.backends]
    rows = []
    for kind in TABLE_ORDER:
        if kind not in cfg.classifiers:
            continue
        for cat in CLASSIFIED_CATEGORIES:
            rows.append(
                {
                    "classifier": KIND_LABELS[kind],
                    "kind": kind,
                    "category": cat.to_text(),
                    "f1": {
                        b: results[(b, kind)].report.per_class[cat.to_text()].f1 for b in backends
                    },
                }
            )
    return {"metric": "f1", "backends": backends, "rows": rows}


# -- comparison ---------------------------------------------------------------

def _load_predictions(backend_dir: Path, kind: str) -> dict:
    path = backend_dir / "predictions" / f"{kind}.json"
    if not path.exists():
        raise FileNotFoundError(f"missing predictions file: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def compare_models(
    dir_a: str | Path,
    dir_b: str | Path,
    selected_classifier: str,
    classifiers: list[str],
    permutations: int = 2000,
    seed: int = 0,
) -> dict:
    """Paired DeLong + permutation tests per category, t-test over classifiers.

    `dir_a`/`dir_b` are per-backend output directories holding reports and
    predictions; both runs must have scored identical test slides in
    identical order.
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    pred_a = _load_predictions(dir_a, selected_classifier)
    pred_b = _load_predictions(dir_b, selected_classifier)
    if pred_a["slide_ids"] != pred_b["slide_ids"]:
        raise ValueError("unpaired test sets: slide ids differ between runs")
    if pred_a["y_true"] != pred_b["y_true"]:
        raise ValueError("unpaired test sets: labels differ between runs")

    y = np.asarray(pred_a["y_true"], dtype=np.int64)
    proba_a = np.asarray(pred_a["proba"], dtype=np.float64)
    proba_b = np.asarray(pred_b["proba"], dtype=np.float64)

    categories = []
    for cat in CLASSIFIED_CATEGORIES:
        ps = PairedScores(y == cat.value, proba_a[:, cat.value], proba_b[:, cat.value])
        dl = delong_test(ps)
        vk = venkatraman_test(ps, permutations=permutations, seed=derive_seed(seed, f"venkatraman:{cat.value}"))
        categories.append(
            {
                "category": cat.to_text(),
                "delong": {"auc_a": dl.auc_a, "auc_b": dl.auc_b, "z": dl.z, "p": dl.p},
                "venkatraman": {
                    "roc_difference": vk.roc_difference,
                    "p": vk.p,
                    "permutations": vk.permutations,
                },
            }
        )

    acc_a, acc_b = [], []
    for kind in TABLE_ORDER:
        if kind not in classifiers:
            continue
        ra = json.loads((dir_a / "reports" / f"{kind}.json").read_text(encoding="utf-8"))
        rb = json.loads((dir_b / "reports" / f"{kind}.json").read_text(encoding="utf-8"))
        acc_a.append(ra["accuracy"])
        acc_b.append(rb["accuracy"])
    tt = paired_ttest(np.asarray(acc_a), np.asarray(acc_b))

    return {
        "backend_a": dir_a.name,
        "backend_b": dir_b.name,
        "selected_classifier": selected_classifier,
        "categories": categories,
        "paired_ttest": {
            "t": tt.t,
            "df": tt.df,
            "p": tt.p,
            "n_pairs": len(acc_a),
            "accuracy_a": acc_a,
            "accuracy_b": acc_b,
        },
    }


def compare_stage(cfg: RunConfig) -> dict | None:
    if len(cfg.backends) != 2:
        return None
    out = Path(cfg.out_dir)
    doc = compare_models(
        out / cfg.backends[0].name,
        out / cfg.backends[1].name,
        cfg.selected_classifier,
        cfg.classifiers,
        permutations=cfg.venkatraman_permutations,
        seed=cfg.seed,
    )
    _write_json(out / "comparison.json", doc)
    return doc


# -- learning curve -----------------------------------------------------------

@dataclass
class LearningCurve:
    classifier_id: str
    sizes: list[int]
    train_accuracy: list[float]
    test_accuracy: list[float]
    repeats: int

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier_id,
            "sizes": self.sizes,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "repeats": self.repeats,
        }


def stratified_subsample(labels: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Subsample preserving class proportions; returns sorted row indices."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if size > n:
        raise ValueError(f"subsample size {size} exceeds available rows {n}")
    if size == n:
        return np.arange(n)
    classes = np.unique(labels)
    quotas = [size * (labels == c).sum() / n for c in classes]
    counts = _apportion(quotas, size)
    # Every class keeps at least one row.
    for i, c in enumerate(counts):
        if c == 0:
            counts[i] = 1
            counts[int(np.argmax(counts))] -= 1
    picked = []
    for c, k in zip(classes, counts):
        idx = np.flatnonzero(labels == c)
        picked.append(rng.choice(idx, size=k, replace=False))
    return np.sort(np.concatenate(picked))


def _apportion(quotas: list[float], total: int) -> list[int]:
    floors = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[: total - sum(floors)]:
        floors[i] += 1
    return floors


def default_curve_sizes(n_train: int, n_classes: int = 3) -> list[int]:
    anchors = [20, 40, 80, 140, 220, 320, 420]
    sizes = [s for s in anchors if n_classes <= s < n_train]
    sizes.append(n_train)
    return sizes


def learning_curve(
    cfg: RunConfig,
    backend_name: str,
    spec: ClassifierSpec,
    sizes: list[int] | None = None,
    repeats: int | None = None,
) -> LearningCurve:
    """Train/test accuracy versus stratified training-set size."""
    design_path = Path(cfg.out_dir) / backend_name / "design.dmat"
    if not design_path.exists():
        raise FileNotFoundError(f"design matrix not found: {design_path} (run aggregate first)")
    dm = load_design(design_path)
    train_dm, test_dm = split_design(dm)
    y_tr = train_dm.labels.astype(np.int64)
    y_te = test_dm.labels.astype(np.int64)
    n_train = train_dm.n
    n_classes = np.unique(y_tr).size

    if repeats is None:
        repeats = cfg.learning_curve_repeats
    if sizes is None:
        sizes = list(cfg.learning_curve_sizes) or default_curve_sizes(n_train, n_classes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    if sizes[0] < n_classes:
        raise ValueError(f"smallest size {sizes[0]} is below the class count {n_classes}")
    if sizes[-1] > n_train:
        raise ValueError(f"size {sizes[-1]} exceeds the training count {n_train}")
    if sizes[-1] < n_train:
        sizes = sizes + [n_train]

    X_tr = train_dm.rows.astype(np.float64)
    X_te = test_dm.rows.astype(np.float64)
    train_means, test_means = [], []
    for si, size in enumerate(sizes):
        tr_runs, te_runs = [], []
        n_effective = repeats if size < n_train else 1
        for r in range(n_effective):
            rng = np.random.default_rng(derive_seed(cfg.seed, f"curve:{si}:{r}"))
            idx = stratified_subsample(y_tr, size, rng)
            model = build_classifier(spec).fit(X_tr[idx], y_tr[idx])
            tr_runs.append(float(np.mean(model.predict(X_tr[idx]) == y_tr[idx])))
            te_runs.append(float(np.mean(model.predict(X_te) == y_te)))
        train_means.append(float(np.mean(tr_runs)))
        test_means.append(float(np.mean(te_runs)))
    return LearningCurve(
        classifier_id=spec.spec_id(),
        sizes=list(sizes),
        train_accuracy=train_means,
        test_accuracy=test_means,
        repeats=repeats,
    )


# -- plots ---------------------------------------------------------------------

def emit_report_plots(report: dict, out_dir: str | Path, stem: str) -> list[Path]:
    """ROC and PR SVGs from a serialized evaluation report."""
    out_dir = Path(out_dir)
    written = []
    roc_series = []
    for name, curve in sorted(report["roc_curves"].items()):
        auc = report["per_class"][name]["auroc"]
        label = f"{name} (AUROC={auc:.3f})" if auc is not None else name
        roc_series.append((label, np.asarray(curve["fpr"]), np.asarray(curve["tpr"])))
    if roc_series:
        svg = line_plot(
            roc_series,
            title=f"ROC curves: {stem}",
            x_label="False positive rate",
            y_label="True positive rate",
            x_range=(0.0, 1.0),
            y_range=(0.0, 1.0),
            diagonal=True,
        )
        written.append(write_svg(svg, out_dir / f"{stem}_roc.svg"))
    pr_series = []
    for name, curve in sorted(report["pr_curves"].items()):
        pr_series.append((name, np.asarray(curve["recall"]), np.asarray(curve["precision"])))
    if pr_series:
        svg = line_plot(
            pr_series,
            title=f"Precision-recall curves: {stem}",
            x_label="Recall",
            y_label="Precision",
            x_range=(0.0, 1.0),
            y_range=(0.0, 1.0),
        )
        written.append(write_svg(svg, out_dir / f"{stem}_pr.svg"))
    return written


def emit_curve_plot(curve: LearningCurve, out_dir: str | Path, stem: str) -> Path:
    sizes = np.asarray(curve.sizes, dtype=np.float64)
    svg = line_plot(
        [
            ("train accuracy", sizes, np.asarray(curve.train_accuracy)),
            ("test accuracy", sizes, np.asarray(curve.test_accuracy)),
        ],
        title=f"Learning curve: {stem}",
        x_label="Training set size",
        y_label="Accuracy",
        y_range=(0.0, 1.05),
    )
    return write_svg(svg, Path(out_dir) / f"{stem}_learning_curve.svg")


def plot_stage(cfg: RunConfig) -> list[Path]:
    written = []
    out = Path(cfg.out_dir)
    for backend in cfg.backends:
        report_dir = out / backend.name / "reports"
        for kind in cfg.classifiers:
            path = report_dir / f"{kind}.json"
            if path.exists():
                report = json.loads(path.read_text(encoding="utf-8"))
                written.extend(emit_report_plots(report, out / backend.name / "plots", kind))
    return written


# -- all-in-one ----------------------------------------------------------------

def run_pipeline(cfg: RunConfig) -> Path:
    """Execute every stage; returns the output directory."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_id = cfg.run_id()
    meta_path = out / "run_meta.json"
    _write_json(meta_path, {"run_id": run_id, "status": "running", "config": cfg.to_dict()})

    webhook = WebhookSink(cfg.webhook_url) if cfg.webhook_url else None
    tracker = Tracker(run_id, out / cfg.tracker_jsonl, webhook=webhook)

    try:
        manifest = _stage_guard("ingest", ingest_stage, cfg)
        counts = category_counts(manifest)
        tracker.track("ingest", "slides_total", len(manifest))
        for cat in CLASSIFIED_CATEGORIES:
            tracker.track("ingest", f"slides_{cat.to_text()}", counts[cat])

        _stage_guard("extract", extract_stage, cfg, manifest)
        tracker.track("extract", "backends_cached", len(cfg.backends))

        designs = _stage_guard("aggregate", aggregate_stage, cfg, manifest)
        for backend in cfg.backends:
            tracker.track("aggregate", f"{backend.name}/design_rows", designs[backend.name].n)

        results = _stage_guard("train", train_evaluate_stage, cfg, designs, tracker)

        _write_json(out / "accuracy_table.json", accuracy_table(cfg, results))
        _write_json(out / "f1_table.json", f1_table(cfg, results))

        comparison = _stage_guard("compare", compare_stage, cfg)
        if comparison is not None:
            tracker.track("compare", "paired_ttest_p", comparison["paired_ttest"]["p"])

        _stage_guard("plot", plot_stage, cfg)
    except StageError as exc:
        _write_json(
            meta_path,
            {"run_id": run_id, "status": "failed", "stage": exc.stage, "config": cfg.to_dict()},
        )
        raise

    _write_json(meta_path, {"run_id": run_id, "status": "complete", "config": cfg.to_dict()})
    return out
