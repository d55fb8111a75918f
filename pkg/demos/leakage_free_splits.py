"""
Patient-grouped folds and class weights
=======================================

Labels a phantom cohort at 1, 3 and 5 years, deals patients into five folds
and shows that no patient's scans end up on both sides of a split.
"""

from ssc_radiomics.cohort import assign_labels, binary_labels, class_counts
from ssc_radiomics.models import compute_class_weights
from ssc_radiomics.splits import check_plan, grouped_kfold
from ssc_radiomics.synth import PhantomSpec, generate_cohort

cohort = generate_cohort(PhantomSpec(n_patients=80, dims=(4, 4, 4), seed=2))
labeled = assign_labels(cohort.scans, cohort.patients)

for w in (1, 3, 5):
    n, pos = class_counts(labeled, w)
    y = list(binary_labels(labeled, w).values())
    cw = compute_class_weights(y)
    print(f"{w}y: {pos}/{n} positive, w_pos = {cw.w_pos} ({float(cw.w_pos):.4f})")

owner = {s.scan_id: s.patient_id for s in labeled}
for plan in grouped_kfold(labeled, k=5, window=5, seed=0):
    check_plan(plan, labeled)  # raises on any leak
    train = {owner[s] for s in plan.train}
    held = {owner[s] for s in plan.validation + plan.test}
    print(f"fold {plan.fold_id}: {len(train)} train patients, {len(held)} held out, "
          f"shared = {len(train & held)}")
