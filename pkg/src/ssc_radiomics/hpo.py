"""
Seeded hyperparameter search.

Trial ``i`` draws its parameters from a generator seeded with
``(seed, i)``, so a trial log does not depend on how trials are scheduled.
The ``coarse-to-fine`` strategy runs four phases; after each phase every
continuous range is halved (in log space for log-scaled parameters) and
re-centred on the incumbent.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np


class SearchFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.log and self.lo <= 0:
            raise ValueError("log-scaled range needs lo > 0")

    def sample(self, rng, lo=None, hi=None):
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        if self.log:
            return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        return float(rng.uniform(lo, hi))


@dataclass(frozen=True)
class Integer:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def __post_init__(self):
        if len(self.choices) < 1:
            raise ValueError("categorical parameter needs at least one choice")

    def sample(self, rng):
        return self.choices[int(rng.integers(len(self.choices)))]


class SearchSpace(dict):
    """Mapping of parameter name to Continuous / Integer / Categorical."""

    def to_dict(self) -> dict:
        out = {}
        for name, p in self.items():
            if isinstance(p, Continuous):
                out[name] = {"type": "continuous", "lo": p.lo, "hi": p.hi, "log": p.log}
            elif isinstance(p, Integer):
                out[name] = {"type": "integer", "lo": p.lo, "hi": p.hi}
            else:
                out[name] = {"type": "categorical", "choices": list(p.choices)}
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "SearchSpace":
        space = cls()
        for name, spec in d.items():
            kind = spec["type"]
            if kind == "continuous":
                space[name] = Continuous(float(spec["lo"]), float(spec["hi"]), bool(spec.get("log", False)))
            elif kind == "integer":
                space[name] = Integer(int(spec["lo"]), int(spec["hi"]))
            elif kind == "categorical":
                space[name] = Categorical(tuple(spec["choices"]))
            else:
                raise ValueError(f"unknown parameter type {kind!r} for {name}")
        return space


def logreg_space() -> SearchSpace:
    return SearchSpace(l2=Continuous(1e-6, 1.0, log=True),
                       learning_rate=Continuous(1e-4, 1e-1, log=True))


def gbt_space() -> SearchSpace:
    return SearchSpace(max_depth=Integer(2, 8), n_trees=Integer(50, 500),
                       learning_rate=Continuous(1e-2, 3e-1, log=True),
                       bag_fraction=Continuous(0.5, 1.0))


@dataclass
class TrialRecord:
    trial_id: int
    params: dict
    loss: float
    status: str = "ok"
    error: str = field(default="", compare=False)


def trial_seed(seed: int, trial_id: int) -> int:
    return int(np.random.SeedSequence([seed, trial_id]).generate_state(1)[0])


def _sample(space: SearchSpace, rng, ranges) -> dict:
    params = {}
    for name, p in space.items():
        if isinstance(p, Continuous):
            params[name] = p.sample(rng, *ranges[name])
        else:
            params[name] = p.sample(rng)
    return params


def _refine(space: SearchSpace, ranges: dict, incumbent: dict) -> dict:
    new = {}
    for name, (lo, hi) in ranges.items():
        p = space[name]
        x = incumbent[name]
        if p.log:
            lo_t, hi_t, x_t = math.log(lo), math.log(hi), math.log(x)
            bound_lo, bound_hi = math.log(p.lo), math.log(p.hi)
        else:
            lo_t, hi_t, x_t = lo, hi, x
            bound_lo, bound_hi = p.lo, p.hi
        half = (hi_t - lo_t) / 4.0
        a, b = max(bound_lo, x_t - half), min(bound_hi, x_t + half)
        new[name] = (math.exp(a), math.exp(b)) if p.log else (a, b)
    return new


def _run_one(objective, params, trial_id, seed) -> TrialRecord:
    try:
        loss = float(objective(params, trial_seed(seed, trial_id)))
    except Exception as exc:  # a failed trial is recorded, not fatal
        return TrialRecord(trial_id, params, math.nan, "failed", f"{type(exc).__name__}: {exc}")
    if not math.isfinite(loss):
        return TrialRecord(trial_id, params, math.nan, "failed", "non-finite loss")
    return TrialRecord(trial_id, params, loss)


def best_trial(trials: Sequence[TrialRecord]) -> TrialRecord:
    ok = [t for t in trials if t.status == "ok"]
    if not ok:
        raise SearchFailed(f"all {len(trials)} trials failed")
    return min(ok, key=lambda t: (t.loss, t.trial_id))


def run_search(space: SearchSpace, objective: Callable[[dict, int], float], n_trials: int = 500,
               seed: int = 0, strategy: str = "random", n_jobs: int = 1):
    """Minimize ``objective(params, trial_seed)`` over ``space``.

    Returns ``(best, trials)`` with trials in trial-id order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if strategy not in ("random", "coarse-to-fine"):
        raise ValueError(f"unknown strategy {strategy!r}")
    ranges = {n: (p.lo, p.hi) for n, p in space.items() if isinstance(p, Continuous)}
    if strategy == "random":
        phases = [range(n_trials)]
    else:
        step = max(1, math.ceil(n_trials / 4))
        phases = [range(a, min(a + step, n_trials)) for a in range(0, n_trials, step)]

    trials = []
    for phase in phases:
        batch = []
        for tid in phase:
            rng = np.random.default_rng(np.random.SeedSequence([seed, tid, 0x5EA]))
            batch.append((tid, _sample(space, rng, ranges)))
        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                trials.extend(pool.map(lambda a: _run_one(objective, a[1], a[0], seed), batch))
        else:
            trials.extend(_run_one(objective, params, tid, seed) for tid, params in batch)
        if strategy == "coarse-to-fine" and any(t.status == "ok" for t in trials):
            ranges = _refine(space, ranges, best_trial(trials).params)
    return best_trial(trials), trials


def best_so_far(trials: Sequence[TrialRecord]) -> np.ndarray:
    """Running minimum of the loss over ok trials (inf until the first success)."""
    losses = np.array([t.loss if t.status == "ok" else np.inf for t in trials])
    return np.minimum.accumulate(losses)


def write_trials(path, trials: Sequence[TrialRecord], space: SearchSpace) -> Path:
    path = Path(path)
    names = list(space)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_id", *names, "loss", "status"])
        for t in trials:
            w.writerow([t.trial_id, *(repr(t.params[n]) for n in names),
                        format(t.loss, ".17g"), t.status])
    return path


def write_best(path, best: TrialRecord, extra: Mapping | None = None) -> Path:
    payload = {"trial_id": best.trial_id, "loss": best.loss, "params": best.params}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return Path(path)
