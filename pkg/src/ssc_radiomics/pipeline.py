"""
Pipeline configuration and stage runners.

Every stage reads artifacts from earlier stages and writes into its own
subdirectory of ``out_dir`` together with a ``config.json`` snapshot::

    <data_dir>/            synth: volumes/ masks/ scans.csv patients.csv ground_truth.json
    <out_dir>/preprocess/  manifest.csv volumes/ masks/
    <out_dir>/features/    features.csv features.json
    <out_dir>/labels/      labels.csv
    <out_dir>/splits/      splits.json
    <out_dir>/tune/        best_<model>_<task>.json trials_<model>_<task>.csv
    <out_dir>/train/       <task>/<model>/fold<k>.json, controls.json
    <out_dir>/evaluate/    report.json roc_<task>.csv
    <out_dir>/report/      table1.csv summary_*.csv report.json

Randomness comes from one root seed; each stage derives its own via
``stage_seed``.  Outputs contain no timestamps and are written with sorted
keys, so rerunning a stage on unchanged inputs reproduces its files byte for
byte, independent of ``jobs``.
"""

from __future__ import annotations

import copy
import csv
import json
import zlib
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cohort as cohort_mod
from . import hpo
from .metrics import evaluate_predictions, roc_curve, write_report, write_roc_csv
from .models import (ClassWeights, GbtConfig, LogRegConfig, compute_class_weights, load_model,
                     log_loss, save_model, train_gbt, train_logreg)
from .radiomics import ExtractionConfig, extract_features, read_feature_table, write_feature_table
from .splits import grouped_kfold, read_splits, stratified_holdout, write_splits
from .synth import PhantomSpec, generate_cohort, write_cohort
from .volgrid import load_mask, load_volume, preprocess, save_mask, save_volume, threshold_segment_lungs

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


class MissingArtifactError(FileNotFoundError):
    def __init__(self, path: Path, stage: str):
        self.path = Path(path)
        self.stage = stage
        super().__init__(f"missing {self.path.name} ({self.path}); run the `{stage}` stage first")


STAGES = ("synth", "preprocess", "extract", "label", "split", "tune", "train", "evaluate", "report")
MODEL_NAMES = ("logreg", "gbt")

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "windows": [1, 3, 5],
    "censored_as_negative": False,
    "paths": {"data_dir": "data", "out_dir": "out"},
    "synth": {"n_patients": 60, "scans_min": 1, "scans_max": 4, "risk_model": "texture-linked",
              "texture_contrast": 200.0, "noise_sd": 10.0, "high_risk_fraction": 0.35,
              "dims": [64, 64, 40], "spacing_mm": [1.0, 1.0, 1.6]},
    "preprocess": {"target_mm": 1.0, "hu_window": [-1200.0, 600.0], "air_hu": -320.0},
    "extract": {"bin_width": 25.0},
    "split": {"k": 5, "val_frac_of_holdout": 0.5, "holdout_fracs": [0.64, 0.16, 0.20]},
    "tune": {"models": ["logreg", "gbt"], "n_trials": 24, "strategy": "random",
             "logreg_iters": 1000},
    "train": {"permutations": 5, "class_weighting": True},
    "evaluate": {"threshold": 0.5},
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"{name}: unknown configuration field")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{name}: expected a table")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config: file {path} does not exist")
    text = path.read_bytes()
    try:
        if path.suffix == ".toml":
            return tomllib.loads(text.decode("utf-8"))
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc


def _require(cond: bool, field: str, msg: str):
    if not cond:
        raise ConfigError(f"{field}: {msg}")


def _number(cfg, field, lo=None, hi=None, integer=False):
    section, _, key = field.rpartition(".")
    val = cfg[section][key] if section else cfg[key]
    ok_type = isinstance(val, int) if integer else isinstance(val, (int, float))
    _require(ok_type and not isinstance(val, bool), field,
             f"expected {'an integer' if integer else 'a number'}, got {val!r}")
    if lo is not None:
        _require(val >= lo, field, f"must be >= {lo}, got {val}")
    if hi is not None:
        _require(val <= hi, field, f"must be <= {hi}, got {val}")


def validate_config(cfg: dict) -> dict:
    _number(cfg, "seed", 0, integer=True)
    _number(cfg, "jobs", 1, integer=True)
    w = cfg["windows"]
    _require(isinstance(w, list) and w and all(x in cohort_mod.WINDOWS for x in w)
             and len(set(w)) == len(w), "windows", f"must be a subset of {list(cohort_mod.WINDOWS)}")
    _require(isinstance(cfg["censored_as_negative"], bool), "censored_as_negative", "expected a boolean")
    _number(cfg, "synth.n_patients", 1, integer=True)
    _number(cfg, "synth.scans_min", 1, integer=True)
    _number(cfg, "synth.scans_max", cfg["synth"]["scans_min"], integer=True)
    _require(cfg["synth"]["risk_model"] in ("none", "texture-linked"), "synth.risk_model",
             "must be 'none' or 'texture-linked'")
    _number(cfg, "synth.texture_contrast", 0)
    _number(cfg, "synth.noise_sd", 0)
    _number(cfg, "synth.high_risk_fraction", 0, 1)
    sd = cfg["synth"]["dims"]
    _require(isinstance(sd, list) and len(sd) == 3 and all(isinstance(n, int) and n >= 4 for n in sd),
             "synth.dims", "must be three integers >= 4")
    sp = cfg["synth"]["spacing_mm"]
    _require(isinstance(sp, list) and len(sp) == 3 and all(isinstance(x, (int, float)) and x > 0 for x in sp),
             "synth.spacing_mm", "must be three positive numbers")
    _number(cfg, "preprocess.target_mm", 0.05, 10)
    hw = cfg["preprocess"]["hu_window"]
    _require(isinstance(hw, list) and len(hw) == 2 and hw[0] < hw[1], "preprocess.hu_window",
             "must be [lo, hi] with lo < hi")
    _number(cfg, "preprocess.air_hu")
    _number(cfg, "extract.bin_width", 1e-6)
    _number(cfg, "split.k", 2, integer=True)
    _number(cfg, "split.val_frac_of_holdout", 0, 1)
    fr = cfg["split"]["holdout_fracs"]
    _require(isinstance(fr, list) and len(fr) == 3 and all(f >= 0 for f in fr)
             and abs(sum(fr) - 1) < 1e-9, "split.holdout_fracs", "must be three fractions summing to 1")
    models = cfg["tune"]["models"]
    _require(isinstance(models, list) and models and all(m in MODEL_NAMES for m in models),
             "tune.models", f"must be a non-empty subset of {list(MODEL_NAMES)}")
    _number(cfg, "tune.n_trials", 1, integer=True)
    _require(cfg["tune"]["strategy"] in ("random", "coarse-to-fine"), "tune.strategy",
             "must be 'random' or 'coarse-to-fine'")
    _number(cfg, "tune.logreg_iters", 1, integer=True)
    _number(cfg, "train.permutations", 0, integer=True)
    _require(isinstance(cfg["train"]["class_weighting"], bool), "train.class_weighting",
             "expected a boolean")
    _number(cfg, "evaluate.threshold", 0, 1)
    return cfg


def resolve_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the config file, then flag overrides (flags win)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        cfg = _merge(cfg, load_config_file(path))
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate_config(cfg)


def stage_seed(root: int, stage: str) -> int:
    return int(np.random.SeedSequence([root, zlib.crc32(stage.encode())]).generate_state(1)[0])


def _paths(cfg):
    return Path(cfg["paths"]["data_dir"]), Path(cfg["paths"]["out_dir"])


def _stage_dir(cfg, stage: str) -> Path:
    d = _paths(cfg)[1] / stage
    d.mkdir(parents=True, exist_ok=True)
    snapshot = {k: v for k, v in cfg.items() if k != "jobs"}
    (d / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")
    return d


def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, stage)
    return path


def _tasks(cfg):
    return [(f"mortality_{w}y", w) for w in cfg["windows"]]


def _json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def run_synth(cfg) -> Path:
    data_dir, _ = _paths(cfg)
    s = cfg["synth"]
    spec = PhantomSpec(n_patients=s["n_patients"], scans_per_patient=(s["scans_min"], s["scans_max"]),
                       risk_model=s["risk_model"], texture_contrast=float(s["texture_contrast"]),
                       noise_sd=float(s["noise_sd"]), seed=stage_seed(cfg["seed"], "synth"),
                       high_risk_fraction=float(s["high_risk_fraction"]),
                       dims=tuple(s["dims"]), spacing_mm=tuple(float(x) for x in s["spacing_mm"]))
    write_cohort(generate_cohort(spec), data_dir)
    _json(data_dir / "config.json", {k: v for k, v in cfg.items() if k != "jobs"})
    return data_dir


def _preprocess_one(args):
    sid, vol_path, mask_path, out, target_mm, window, air_hu = args
    v = load_volume(vol_path)
    if mask_path.exists():
        m, source = load_mask(mask_path), "provided"
    else:
        m, source = threshold_segment_lungs(v, air_hu), "threshold"
    pv, pm = preprocess(v, m, target_mm, window)
    save_volume(pv, out / "volumes" / f"{sid}.vgrid", dtype="f32")
    save_mask(pm, out / "masks" / f"{sid}.vgrid")
    return sid, source


def _map(fn, items, jobs, processes=True):
    if jobs <= 1 or len(items) <= 1:
        return [fn(a) for a in items]
    pool_cls = ProcessPoolExecutor if processes else ThreadPoolExecutor
    with pool_cls(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_preprocess(cfg) -> Path:
    data_dir, _ = _paths(cfg)
    scans = cohort_mod.read_scans(_need(data_dir / "scans.csv", "synth"))
    out = _stage_dir(cfg, "preprocess")
    (out / "volumes").mkdir(exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    p = cfg["preprocess"]
    jobs = []
    for s in scans:
        vol_path = data_dir / (s.volume_path or f"volumes/{s.scan_id}.vgrid")
        _need(vol_path, "synth")
        jobs.append((s.scan_id, vol_path, data_dir / "masks" / f"{s.scan_id}.vgrid", out,
                     float(p["target_mm"]), tuple(p["hu_window"]), float(p["air_hu"])))
    results = _map(_preprocess_one, jobs, cfg["jobs"])
    with (out / "manifest.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scan_id", "patient_id", "volume", "mask", "mask_source"])
        for s, (sid, source) in zip(scans, results):
            w.writerow([sid, s.patient_id, f"volumes/{sid}.vgrid", f"masks/{sid}.vgrid", source])
    return out


def _extract_one(args):
    sid, vol_path, mask_path, config = args
    return extract_features(load_volume(vol_path), load_mask(mask_path), config, scan_id=sid)


def run_extract(cfg) -> Path:
    _, out_dir = _paths(cfg)
    pre = out_dir / "preprocess"
    with _need(pre / "manifest.csv", "preprocess").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    config = ExtractionConfig(bin_width=float(cfg["extract"]["bin_width"]),
                              hu_window=tuple(cfg["preprocess"]["hu_window"]))
    jobs = [(r["scan_id"], _need(pre / r["volume"], "preprocess"),
             _need(pre / r["mask"], "preprocess"), config) for r in rows]
    vectors = _map(_extract_one, jobs, cfg["jobs"])
    out = _stage_dir(cfg, "features")
    write_feature_table(out / "features.csv", vectors, [r["patient_id"] for r in rows], config)
    return out


def run_label(cfg) -> Path:
    data_dir, _ = _paths(cfg)
    scans = cohort_mod.read_scans(_need(data_dir / "scans.csv", "synth"))
    patients = cohort_mod.read_patients(_need(data_dir / "patients.csv", "synth"))
    labeled = cohort_mod.assign_labels(scans, patients)
    out = _stage_dir(cfg, "labels")
    cohort_mod.write_labels(out / "labels.csv", labeled)
    return out


def _read_labels(cfg):
    _, out_dir = _paths(cfg)
    return cohort_mod.read_labels(_need(out_dir / "labels" / "labels.csv", "label"))


def run_split(cfg) -> Path:
    labeled = _read_labels(cfg)
    seed = stage_seed(cfg["seed"], "split")
    sp = cfg["split"]
    plans = {}
    for task, w in _tasks(cfg):
        plans[f"kfold_{task}"] = grouped_kfold(labeled, sp["k"], sp["val_frac_of_holdout"], seed, w,
                                               cfg["censored_as_negative"])
        plans[f"holdout_{task}"] = [stratified_holdout(labeled, tuple(sp["holdout_fracs"]), w, seed,
                                                       cfg["censored_as_negative"])]
    out = _stage_dir(cfg, "splits")
    write_splits(out / "splits.json", plans)
    return out


def _fit(model_name: str, params: dict, X, y, seed: int, cfg):
    weights = compute_class_weights(y) if cfg["train"]["class_weighting"] else ClassWeights.uniform()
    if model_name == "logreg":
        conf = LogRegConfig(learning_rate=float(params["learning_rate"]), l2=float(params["l2"]),
                            n_iter=int(cfg["tune"]["logreg_iters"]))
        return train_logreg(X, y, weights, conf)
    conf = GbtConfig(n_trees=int(params["n_trees"]), max_depth=int(params["max_depth"]),
                     learning_rate=float(params["learning_rate"]),
                     bag_fraction=float(params["bag_fraction"]), seed=seed % (2 ** 32))
    return train_gbt(X, y, weights, conf)


def _space(model_name):
    return hpo.logreg_space() if model_name == "logreg" else hpo.gbt_space()


def _upstream(cfg):
    _, out_dir = _paths(cfg)
    # features first: a clean output dir reports the earliest missing stage
    table = read_feature_table(_need(out_dir / "features" / "features.csv", "extract"))
    labeled = _read_labels(cfg)
    plans = read_splits(_need(out_dir / "splits" / "splits.json", "split"))
    return table, labeled, plans


def _xy(table, labels, ids):
    ids = [s for s in ids if s in labels]
    return table.rows(ids), np.array([labels[s] for s in ids], dtype=np.float64), ids


def run_tune(cfg) -> Path:
    table, labeled, plans = _upstream(cfg)
    out = _stage_dir(cfg, "tune")
    root = stage_seed(cfg["seed"], "tune")
    for task, w in _tasks(cfg):
        labels = cohort_mod.binary_labels(labeled, w, cfg["censored_as_negative"])
        plan = plans[f"holdout_{task}"][0]
        Xtr, ytr, _ = _xy(table, labels, plan.train)
        Xva, yva, _ = _xy(table, labels, plan.validation)
        for model_name in cfg["tune"]["models"]:
            def objective(params, tseed, _m=model_name):
                model = _fit(_m, params, Xtr, ytr, tseed, cfg)
                return log_loss(model.predict_proba(Xva), yva)

            space = _space(model_name)
            best, trials = hpo.run_search(space, objective, cfg["tune"]["n_trials"], root,
                                          cfg["tune"]["strategy"], cfg["jobs"])
            hpo.write_trials(out / f"trials_{model_name}_{task}.csv", trials, space)
            hpo.write_best(out / f"best_{model_name}_{task}.json", best,
                           {"model": model_name, "task": task, "objective": "validation log loss",
                            "search_space": space.to_dict()})
    return out


def _permuted_training(cfg, task, model_name, params, table, labels, folds, seed):
    """Pooled AUROC of models trained on shuffled training labels, one value per permutation."""
    vals = []
    for k in range(cfg["train"]["permutations"]):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        scores, truth = [], []
        for plan in folds:
            X, y, _ = _xy(table, labels, plan.train)
            Xte, yte, _ = _xy(table, labels, plan.test)
            if not len(yte):
                continue
            model = _fit(model_name, params, X, rng.permutation(y), seed + plan.fold_id, cfg)
            scores.append(model.predict_proba(Xte))
            truth.append(yte)
        rep = evaluate_predictions(task, model_name, scores, truth)
        vals.append(rep.auroc)
    return vals


def run_train(cfg) -> Path:
    table, labeled, plans = _upstream(cfg)
    _, out_dir = _paths(cfg)
    out = _stage_dir(cfg, "train")
    seed = stage_seed(cfg["seed"], "train")
    controls = {}
    for task, w in _tasks(cfg):
        labels = cohort_mod.binary_labels(labeled, w, cfg["censored_as_negative"])
        folds = plans[f"kfold_{task}"]
        for model_name in cfg["tune"]["models"]:
            best_path = _need(out_dir / "tune" / f"best_{model_name}_{task}.json", "tune")
            params = json.loads(best_path.read_text())["params"]
            for plan in folds:
                X, y, _ = _xy(table, labels, plan.train)
                model = _fit(model_name, params, X, y, seed + plan.fold_id, cfg)
                save_model(model, out / task / model_name / f"fold{plan.fold_id}.json")
            controls[f"{model_name}/{task}"] = _permuted_training(
                cfg, task, model_name, params, table, labels, folds, seed + 1000)
    _json(out / "controls.json", controls)
    return out


def run_evaluate(cfg) -> Path:
    table, labeled, plans = _upstream(cfg)
    _, out_dir = _paths(cfg)
    train_dir = out_dir / "train"
    controls = json.loads(_need(train_dir / "controls.json", "train").read_text())
    out = _stage_dir(cfg, "evaluate")
    reports, control_summary = [], {}
    for task, w in _tasks(cfg):
        labels = cohort_mod.binary_labels(labeled, w, cfg["censored_as_negative"])
        curves = {}
        for model_name in cfg["tune"]["models"]:
            scores, truth, ids = [], [], []
            for plan in plans[f"kfold_{task}"]:
                model = load_model(_need(train_dir / task / model_name / f"fold{plan.fold_id}.json", "train"))
                Xte, yte, _ = _xy(table, labels, plan.test)
                if not len(yte):
                    continue
                scores.append(model.predict_proba(Xte))
                truth.append(yte)
                ids.append(plan.fold_id)
            rep = evaluate_predictions(task, model_name, scores, truth, cfg["evaluate"]["threshold"], ids)
            reports.append(rep)
            curves[model_name] = roc_curve(np.concatenate(scores), np.concatenate(truth))
            vals = controls.get(f"{model_name}/{task}", [])
            control_summary[f"{model_name}/{task}"] = {
                "permuted_auroc": vals, "mean": float(np.mean(vals)) if vals else None}
        write_roc_csv(out / f"roc_{task}.csv", curves)
    write_report(out / "report.json", reports, {"permuted_label_control": control_summary})
    return out


TABLE1_COLUMNS = ("task", "model", "auroc", "sensitivity", "specificity", "precision", "f1")


def run_report(cfg) -> Path:
    data_dir, out_dir = _paths(cfg)
    evaluation = json.loads(_need(out_dir / "evaluate" / "report.json", "evaluate").read_text())
    scans = cohort_mod.read_scans(_need(data_dir / "scans.csv", "synth"))
    patients = cohort_mod.read_patients(_need(data_dir / "patients.csv", "synth"))
    labeled = cohort_mod.assign_labels(scans, patients)
    out = _stage_dir(cfg, "report")
    rows = [{k: r[k] for k in TABLE1_COLUMNS} for r in evaluation["reports"]]
    with (out / "table1.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE1_COLUMNS)
        for r in rows:
            w.writerow([r["task"], r["model"], *(format(r[k], ".4f") for k in TABLE1_COLUMNS[2:])])
    summary = cohort_mod.cohort_summary(scans, patients)
    written = cohort_mod.write_summary_tables(summary, out)
    prevalence = {}
    for task, win in _tasks(cfg):
        n, npos = cohort_mod.class_counts(labeled, win)
        prevalence[task] = {"n_scans": n, "n_positive": npos, "prevalence": npos / n if n else None}
    _json(out / "report.json", {
        "table1": rows,
        "permuted_label_control": evaluation.get("permuted_label_control", {}),
        "prevalence": prevalence,
        "n_scans": len(scans), "n_patients": len(patients),
        "summary_tables": sorted(Path(p).name for p in written),
    })
    return out


RUNNERS = {
    "synth": run_synth, "preprocess": run_preprocess, "extract": run_extract, "label": run_label,
    "split": run_split, "tune": run_tune, "train": run_train, "evaluate": run_evaluate,
    "report": run_report,
}


def run_all(cfg) -> Path:
    for stage in STAGES:
        RUNNERS[stage](cfg)
    return _paths(cfg)[1] / "report"
