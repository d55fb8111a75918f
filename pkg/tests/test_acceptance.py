"""Acceptance criteria 1-10, one test each.

Every test reports a ``criterion N: PASS|FAIL`` line as it finishes and the
collected verdicts are repeated in the pytest terminal summary.  Criterion 6
runs the full default pipeline and takes about two minutes.
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from helpers import random_labeled
from ssc_radiomics import cli
from ssc_radiomics.cohort import NEGATIVE, POSITIVE, LabeledScan, assign_labels, class_counts
from ssc_radiomics.hpo import Continuous, SearchSpace, best_so_far, run_search
from ssc_radiomics.metrics import auroc, mann_whitney_u
from ssc_radiomics.models import (GbtConfig, compute_class_weights, loss_and_grad,
                                  staged_training_loss, train_gbt)
from ssc_radiomics.radiomics import (discretize, glcm_features, glcm_matrices, glszm_features,
                                     glszm_matrix, shape_features)
from ssc_radiomics.radiomics.glcm import DIRECTIONS
from ssc_radiomics.splits import check_plan, grouped_kfold, stratified_holdout
from ssc_radiomics.synth import PhantomSpec, generate_cohort
from ssc_radiomics.volgrid import (MaskGrid, VolumeGrid, clip_normalize_hu, resample_isotropic,
                                   resample_mask)

RESULTS = {}


@pytest.fixture
def verdict(capsys):
    def record(n, checks, detail=""):
        failed = [name for name, ok in checks if not ok]
        RESULTS[n] = (not failed, detail if not failed else f"failed: {', '.join(failed)}; {detail}")
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if not failed else 'FAIL'}  {RESULTS[n][1]}")
        assert not failed, RESULTS[n][1]
    return record


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def test_criterion_01_texture_oracle(verdict):
    rng = np.random.default_rng(20240601)
    counts_ok = features_ok = True
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(200):
        dims = tuple(int(n) for n in rng.integers(1, 9, 3))
        data = rng.integers(0, int(rng.integers(1, 9)), dims).astype(float)
        mask = (rng.uniform(size=dims) < rng.uniform(0.3, 1.0)).astype(np.uint8)
        mask.flat[int(rng.integers(mask.size))] = 1
        d = discretize(VolumeGrid(data, (1, 1, 1)), MaskGrid(mask, (1, 1, 1)), 1.0)
        lv, ng = np.asarray(d.levels), d.num_levels
        ref = oracles.glcm_counts(lv, ng)
        got = glcm_matrices(d)
        for k, off in enumerate(DIRECTIONS):
            expect = np.zeros((ng, ng), int)
            for (i, j), c in ref[oracles.canonical(off)].items():
                expect[i - 1, j - 1] = c
            counts_ok &= bool(np.array_equal(got.counts[k], expect))
        gm = glszm_matrix(d)
        zones = {(g + 1, s + 1): int(gm.counts[g, s]) for g, s in zip(*np.nonzero(gm.counts))}
        counts_ok &= zones == oracles.glszm_counts(lv)
        pairs = []
        if any(ref.values()):
            a, b = glcm_features(d, got), oracles.glcm_features(lv, ng)
            pairs += [(a[n], b[n]) for n in b]
        a, b = glszm_features(d, gm), oracles.glszm_features(lv, ng)
        pairs += [(a[n], b[n]) for n in b]
        for x, y in pairs:
            features_ok &= close(x, y)
            worst = max(worst, abs(x - y) / max(1.0, abs(y)))
    elapsed = time.perf_counter() - t0
    verdict(1, [("exact counts", counts_ok), ("features within 1e-12", features_ok),
                ("runtime < 30 s", elapsed < 30)],
            f"200 volumes, worst relative feature error {worst:.1e}, {elapsed:.1f} s")


def test_criterion_02_auroc_oracle(verdict):
    rng = np.random.default_rng(7)
    exact = True
    tied_sets = 0
    t0 = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(2, 501))
        scores = rng.integers(0, int(rng.integers(2, 60)), n) / 7.0
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores[1] = scores[0]  # at least one positive-negative tie
        twice, n_pairs = oracles.pair_wins_broadcast(scores, labels)
        tied_sets += len(np.unique(scores)) < n
        exact &= mann_whitney_u(scores, labels) * 2 == twice
        exact &= auroc(scores, labels) == (twice / 2) / n_pairs
    elapsed = time.perf_counter() - t0
    verdict(2, [("rank AUROC equals pair count", exact), ("sets contain ties", tied_sets == 1000),
                ("runtime < 30 s", elapsed < 30)], f"1000 sets, {elapsed:.1f} s")


def test_criterion_03_leakage(verdict):
    rng = np.random.default_rng(3)
    no_leak = cover = disjoint = True
    n_plans = 0
    for trial in range(500):
        labeled = random_labeled(rng, int(rng.integers(10, 60)))
        owner = {s.scan_id: s.patient_id for s in labeled}
        window = [None, 1, 3, 5][trial % 4]
        seed = int(rng.integers(2 ** 31))
        plans = grouped_kfold(labeled, k=5, seed=seed, window=window)
        try:
            plans.append(stratified_holdout(labeled, window=window or 5, seed=seed))
        except Exception:
            pass  # no positive patient at that window
        for plan in plans:
            check_plan(plan, labeled)
            sets = [{owner[s] for s in ids} for ids in plan.partitions().values()]
            no_leak &= not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
            n_plans += 1
        held = [{owner[s] for s in p.validation + p.test} for p in plans[:5]]
        disjoint &= sum(map(len, held)) == len(set().union(*held))
        eligible = {owner[s] for p in plans[:5] for s in p.train + p.validation + p.test}
        if window is None:
            cover &= eligible == set(owner.values())
        cover &= set().union(*held) == eligible
    verdict(3, [("no patient in two partitions", no_leak), ("holdouts disjoint", disjoint),
                ("holdouts cover all patients", cover)], f"500 cohorts, {n_plans} plans")


def test_criterion_04_class_weights(verdict):
    checks = []
    got = []
    for n_pos, expect in ((181, 5.8702), (326, 3.2592), (428, 2.4825)):
        y = np.r_[np.ones(n_pos), np.zeros(2125 - n_pos)]
        w = compute_class_weights(y)
        checks.append((f"w_pos({n_pos}) rational", w.w_pos == Fraction(2125, 2 * n_pos)))
        checks.append((f"w_neg({n_pos}) rational", w.w_neg == Fraction(2125, 2 * (2125 - n_pos))))
        checks.append((f"w_pos({n_pos}) = {expect}", round(float(w.w_pos), 4) == expect))
        got.append(f"{float(w.w_pos):.4f}")
    verdict(4, checks, "w_pos " + " / ".join(got))


def test_criterion_05_gradients(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        n, d = int(rng.integers(10, 80)), int(rng.integers(1, 8))
        X = rng.normal(size=(n, d))
        y = (rng.uniform(size=n) < 0.4).astype(float)
        y[:2] = [0, 1]
        sw = compute_class_weights(y).sample_weights(y)
        params = rng.normal(size=d + 1)
        l2 = float(rng.uniform(0, 0.1))
        _, g = loss_and_grad(params, X, y, sw, l2)
        h = 1e-6
        num = np.array([(loss_and_grad(params + h * e, X, y, sw, l2)[0]
                         - loss_and_grad(params - h * e, X, y, sw, l2)[0]) / (2 * h)
                        for e in np.eye(d + 1)])
        worst = max(worst, np.linalg.norm(num - g) / max(1.0, np.linalg.norm(g)))
    monotone = True
    for seed in range(10):
        r = np.random.default_rng(100 + seed)
        X = r.normal(size=(80, 6))
        y = (X[:, 0] + r.normal(size=80) > 0.3).astype(float)
        w = compute_class_weights(y)
        m = train_gbt(X, y, w, GbtConfig(n_trees=50, max_depth=3, learning_rate=0.1, bag_fraction=1.0))
        trace = staged_training_loss(m, X, y, w)
        # a stage never raises the loss beyond float rounding of the sum
        monotone &= bool(np.all(np.diff(trace) <= 1e-12)) and trace[-1] < trace[0]
    verdict(5, [("finite differences <= 1e-6 relative", worst <= 1e-6),
                ("staged GBT loss non-increasing", monotone)],
            f"worst gradient error {worst:.1e}")


def test_criterion_06_end_to_end(verdict, tmp_path):
    t0 = time.perf_counter()
    code = cli.main(["all", "--data-dir", str(tmp_path / "data"), "--out-dir", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    report = json.loads((tmp_path / "out" / "report" / "report.json").read_text())
    best = max(r["auroc"] for r in report["table1"] if r["task"] == "mortality_5y")
    controls = {k: v["mean"] for k, v in report["permuted_label_control"].items()}
    in_band = all(0.40 <= v <= 0.60 for v in controls.values())
    shown = ", ".join(f"{k} {v:.3f}" for k, v in sorted(controls.items()))
    verdict(6, [("pipeline exit 0", code == 0), ("5y AUROC >= 0.85", best >= 0.85),
                ("permuted controls in [0.40, 0.60]", in_band), ("runtime < 600 s", elapsed < 600)],
            f"best 5y AUROC {best:.3f}; controls {shown}; {elapsed:.0f} s")


def test_criterion_07_hpo(verdict):
    space = SearchSpace(x=Continuous(0.0, 1.0))

    def f(params, seed):
        return (params["x"] - 0.3) ** 2

    best, trials = run_search(space, f, n_trials=500, seed=0)
    again = run_search(space, f, n_trials=500, seed=0)
    curve = best_so_far(trials)
    verdict(7, [("within 0.01 of optimum", abs(best.params["x"] - 0.3) <= 0.01),
                ("best-so-far non-increasing", bool(np.all(np.diff(curve) <= 0))),
                ("same seed same log", (best, trials) == again)],
            f"best x = {best.params['x']:.4f}")


def test_criterion_08_preprocessing(verdict):
    rng = np.random.default_rng(8)
    idem = bounds = binary = endpoints = True
    for _ in range(200):
        dims = tuple(int(n) for n in rng.integers(1, 10, 3))
        spacing = tuple(float(s) for s in rng.choice([0.5, 0.8, 1.0, 1.6, 2.5], 3))
        target = float(rng.choice([0.7, 1.0, 1.5]))
        data = rng.uniform(-3000, 3000, dims)
        v = resample_isotropic(VolumeGrid(data, spacing), target)
        bounds &= v.data.min() >= data.min() and v.data.max() <= data.max()
        idem &= np.array_equal(resample_isotropic(v, target).data, v.data)
        m = resample_mask(MaskGrid((rng.uniform(size=dims) < 0.5).astype(np.uint8), spacing), target)
        binary &= set(np.unique(m.labels)) <= {0, 1}
        hu = np.r_[-1200.0, 600.0, rng.uniform(-3000, 3000, 20)].reshape(-1, 1, 1)
        out = clip_normalize_hu(VolumeGrid(hu, (1, 1, 1))).data.ravel()
        endpoints &= out[0] == 0 and out[1] == 1 and out.min() >= 0 and out.max() <= 1
    verdict(8, [("resampling idempotent", idem), ("intensity bounds kept", bounds),
                ("mask binary", binary), ("-1200 -> 0 and 600 -> 1", endpoints)], "200 random volumes")


def test_criterion_09_shape(verdict):
    n = 45
    c = np.arange(n) - n // 2
    x, y, z = np.meshgrid(c, c, c, indexing="ij")
    ball = shape_features(MaskGrid((x ** 2 + y ** 2 + z ** 2 <= 400).astype(np.uint8), (1, 1, 1)))
    box = np.zeros((44, 24, 14), np.uint8)
    box[2:42, 2:22, 2:12] = 1
    boxf = shape_features(MaskGrid(box, (1, 1, 1)))
    verdict(9, [("ball sphericity", 0.85 <= ball["sphericity"] <= 1.0),
                ("ball elongation", 0.97 <= ball["elongation"] <= 1.03),
                ("ball flatness", 0.97 <= ball["flatness"] <= 1.03),
                ("box elongation 0.5 +- 5%", abs(boxf["elongation"] - 0.5) <= 0.025)],
            f"ball sphericity {ball['sphericity']:.3f}, elongation {ball['elongation']:.3f}, "
            f"flatness {ball['flatness']:.3f}; box elongation {boxf['elongation']:.3f}")


def test_criterion_10_cohort_arithmetic(verdict):
    checks = []
    shown = []
    for window, n_pos, pct in ((1, 181, 8.5), (3, 326, 15.3), (5, 428, 20.1)):
        labeled = [LabeledScan(f"s{k}", f"p{k}", (POSITIVE if k < n_pos else NEGATIVE,) * 3)
                   for k in range(2125)]
        n, pos = class_counts(labeled, window)
        got = 100 * pos / n
        checks.append((f"{window}y prevalence {pct}%", abs(got - pct) < 0.1))
        shown.append(f"{got:.2f}%")
    monotone = True
    n_scans = 0
    for seed in range(20):
        spec = PhantomSpec(n_patients=60, seed=seed, dims=(4, 4, 4),
                           risk_model=("texture-linked", "none")[seed % 2])
        cohort = generate_cohort(spec)
        for s in assign_labels(cohort.scans, cohort.patients):
            n_scans += 1
            if s.label_1y == POSITIVE:
                monotone &= s.label_3y == s.label_5y == POSITIVE
            if s.label_3y == POSITIVE:
                monotone &= s.label_5y == POSITIVE
            if s.label_5y == NEGATIVE:
                monotone &= s.label_1y == s.label_3y == NEGATIVE
            if s.label_3y == NEGATIVE:
                monotone &= s.label_1y == NEGATIVE
    checks.append(("labels monotone across windows", monotone))
    verdict(10, checks, f"prevalence {' / '.join(shown)}; {n_scans} generated scans checked")
