"""Shared builders for randomized test cohorts."""

from ssc_radiomics.cohort import CENSORED, NEGATIVE, POSITIVE, LabeledScan

_LABEL_PATTERNS = [
    (POSITIVE, POSITIVE, POSITIVE), (NEGATIVE, POSITIVE, POSITIVE), (NEGATIVE, NEGATIVE, POSITIVE),
    (NEGATIVE, NEGATIVE, NEGATIVE), (NEGATIVE, NEGATIVE, CENSORED), (NEGATIVE, CENSORED, CENSORED),
    (CENSORED, CENSORED, CENSORED),
]


def random_labeled(rng, n_patients, max_scans=4):
    """Window-monotone labels for ``n_patients`` with 1..max_scans scans each."""
    out = []
    for p in range(n_patients):
        for s in range(int(rng.integers(1, max_scans + 1))):
            pattern = _LABEL_PATTERNS[int(rng.integers(len(_LABEL_PATTERNS)))]
            out.append(LabeledScan(f"P{p}_S{s}", f"P{p}", pattern))
    rng.shuffle(out)
    return out
