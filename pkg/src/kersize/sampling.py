"""Feasible-set construction by sampling: grid enumeration, rejection
sampling, and a feasibility-constrained random walk.

Acceptance uses the forward model's exact closed-form feasibility predicate,
so a sample is kept iff some admissible noise maps it onto the measurement.
Sets for distinct measurements are built on independent RNG streams keyed by
(seed, k), which makes results identical across runs and thread counts.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DataError,
    FeasibleSet,
    FeasibleSetCollection,
    UsageError,
    as_vector,
    dataset_from_collection,
)
from .forward import ForwardModel

__all__ = ["SamplerSpec", "sample_feasible", "build_feasible_sets", "enforce_uniform"]

_CHUNK = 512


@dataclass(frozen=True, eq=False)
class SamplerSpec:
    """How to hunt for feasible signals.

    ``n_max`` caps the members kept per measurement, ``budget`` the proposals
    spent before giving up. ``step_scale`` is the per-coordinate proposal width
    of the random walk (None: a tenth of the signal box); ``grid_resolution``
    the per-coordinate point counts of the grid sampler.
    """

    kind: str = "rejection"
    n_max: int = 100
    seed: int = 0
    budget: int | None = None
    step_scale: float | Sequence | None = None
    grid_resolution: Sequence | None = None
    burn_in: int = 0
    thinning: int = 1

    def __post_init__(self):
        if self.kind not in ("grid", "rejection", "random_walk"):
            raise UsageError(f"unknown sampler kind {self.kind!r}")
        if self.n_max < 1:
            raise UsageError("n_max must be >= 1")
        if self.budget is not None and self.budget < self.n_max:
            raise UsageError("budget must be >= n_max")
        if self.burn_in < 0 or self.thinning < 1:
            raise UsageError("burn_in must be >= 0 and thinning >= 1")
        if self.kind == "grid" and self.grid_resolution is None:
            raise UsageError("grid sampler needs grid_resolution")

    @property
    def effective_budget(self) -> int:
        return self.budget if self.budget is not None else max(200 * self.n_max, 1000)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_max": self.n_max,
            "seed": self.seed,
            "budget": self.budget,
            "step_scale": (
                self.step_scale.tolist()
                if isinstance(self.step_scale, np.ndarray)
                else self.step_scale
            ),
            "grid_resolution": (
                list(self.grid_resolution) if self.grid_resolution is not None else None
            ),
            "burn_in": self.burn_in,
            "thinning": self.thinning,
        }

    @classmethod
    def from_dict(cls, d) -> "SamplerSpec":
        return cls(
            kind=d.get("kind", "rejection"),
            n_max=int(d.get("n_max", 100)),
            seed=int(d.get("seed", 0)),
            budget=None if d.get("budget") is None else int(d["budget"]),
            step_scale=d.get("step_scale"),
            grid_resolution=d.get("grid_resolution"),
            burn_in=int(d.get("burn_in", 0)),
            thinning=int(d.get("thinning", 1)),
        )


def _grid_points(model: ForwardModel, resolution) -> tuple:
    res = np.asarray(resolution, dtype=int)
    if res.shape != (model.d1,) or np.any(res < 1):
        raise UsageError("grid_resolution must give a positive count per coordinate")
    b = model.signal_bounds
    axes = [np.linspace(b[i, 0], b[i, 1], res[i]) for i in range(model.d1)]
    return axes, int(np.prod(res))


def _sample_grid(model, y, sampler, n_target):
    axes, total = _grid_points(model, sampler.grid_resolution)
    res = [len(a) for a in axes]
    budget = min(sampler.effective_budget, total)
    accepted = []
    n_found = 0
    for start in range(0, budget, _CHUNK):
        stop = min(start + _CHUNK, budget)
        idx = np.unravel_index(np.arange(start, stop), res)
        pts = np.stack([axes[i][idx[i]] for i in range(model.d1)], axis=1)
        ok = model.feasible_batch(pts, y)
        if ok.any():
            accepted.append(pts[ok])
            n_found += int(ok.sum())
            if n_found >= n_target:
                break
    if not accepted:
        return np.zeros((0, model.d1))
    return np.vstack(accepted)[:n_target]


def _sample_rejection(model, y, sampler, rng, n_target):
    b = model.signal_bounds
    budget = sampler.effective_budget
    accepted = []
    n_found = 0
    spent = 0
    while spent < budget and n_found < n_target:
        n = min(_CHUNK, budget - spent)
        pts = rng.uniform(b[:, 0], b[:, 1], size=(n, model.d1))
        spent += n
        ok = model.feasible_batch(pts, y)
        if ok.any():
            accepted.append(pts[ok])
            n_found += int(ok.sum())
    if not accepted:
        return np.zeros((0, model.d1))
    return np.vstack(accepted)[:n_target]


def _sample_random_walk(model, y, sampler, rng, n_target, anchor):
    b = model.signal_bounds
    budget = sampler.effective_budget
    spent = 0
    kept = []
    if anchor is not None:
        state = np.asarray(anchor, dtype=np.float64)
        if not model.feasibility(state, y):
            raise DataError("random-walk anchor is not feasible for the measurement")
        n_accepted = 0  # anchor was supplied by the caller, not recorded
    else:
        state = None
        while spent < budget:
            n = min(_CHUNK, budget - spent)
            pts = rng.uniform(b[:, 0], b[:, 1], size=(n, model.d1))
            ok = model.feasible_batch(pts, y)
            hit = np.flatnonzero(ok)
            if hit.size:
                spent += int(hit[0]) + 1
                state = pts[hit[0]]
                break
            spent += n
        if state is None:
            return np.zeros((0, model.d1))
        n_accepted = 1
        if n_accepted > sampler.burn_in and (n_accepted - sampler.burn_in) % sampler.thinning == 0:
            kept.append(state.copy())
    step = sampler.step_scale
    if step is None:
        step = 0.1 * (b[:, 1] - b[:, 0])
    half = 0.5 * np.broadcast_to(np.asarray(step, dtype=np.float64), (model.d1,))
    while spent < budget and len(kept) < n_target:
        prop = state + rng.uniform(-half, half)
        spent += 1
        if np.any(prop < b[:, 0]) or np.any(prop > b[:, 1]):
            continue  # leaving the signal box counts against the budget
        if model.feasibility(prop, y):
            state = prop
            n_accepted += 1
            if n_accepted > sampler.burn_in and (n_accepted - sampler.burn_in) % sampler.thinning == 0:
                kept.append(state.copy())
    if not kept:
        return np.zeros((0, model.d1))
    return np.vstack(kept)


def sample_feasible(model: ForwardModel, y, sampler: SamplerSpec,
                    rng: np.random.Generator | None = None,
                    anchor=None, n_target: int | None = None) -> np.ndarray:
    """Collect up to ``n_max`` signals whose feasible test against y passes.

    Deterministic given (model, y, sampler) including the seed. Returns an
    (n, d1) array, possibly empty; an empty result after exhausting the budget
    emits a warning (a zero-size feasible set is legal downstream).
    """
    y = as_vector(y, "measurement")
    if rng is None:
        rng = np.random.default_rng(sampler.seed)
    if n_target is None:
        n_target = sampler.n_max
    if sampler.kind == "grid":
        out = _sample_grid(model, y, sampler, n_target)
    elif sampler.kind == "rejection":
        out = _sample_rejection(model, y, sampler, rng, n_target)
    else:
        out = _sample_random_walk(model, y, sampler, rng, n_target, anchor)
    if out.shape[0] == 0 and n_target > 0:
        warnings.warn("sampling budget exhausted with zero feasible points", stacklevel=2)
    return out


def _entry_rngs(seed: int, k: int) -> tuple:
    return (
        np.random.default_rng([seed, k, 0]),  # proposal stream
        np.random.default_rng([seed, k, 1]),  # measurement-generation stream
    )


def _build_entry(model, sampler, k: int, ident: str, y, x_true):
    sample_rng, gen_rng = _entry_rngs(sampler.seed, k)
    anchor = None
    generate = y is None
    if generate:
        if x_true is None:
            b = model.signal_bounds
            x_true = gen_rng.uniform(b[:, 0], b[:, 1], size=model.d1)
        e = model.noise.sample(gen_rng, model.d2)
        y = model.apply(x_true, e)
        anchor = x_true
    members = sample_feasible(
        model, y, sampler, rng=sample_rng, anchor=anchor,
        n_target=sampler.n_max - 1 if generate else sampler.n_max,
    )
    if generate:
        members = np.vstack([x_true[None, :], members]) if members.size else x_true[None, :]
    return FeasibleSet(id=ident, measurement=y, members=members)


def build_feasible_sets(model: ForwardModel, measurements=None, *,
                        generate: int | None = None,
                        ground_truths=None,
                        sampler: SamplerSpec) -> tuple:
    """Build one feasible set per measurement and the paired dataset.

    Pass ``measurements`` explicitly, or ``generate=K`` to draw K ground-truth
    signals uniformly from the signal box, or ``ground_truths`` to measure a
    given list of signals; in the latter two modes the noise is drawn
    uniformly from the noise set and each ground truth is inserted as the
    first member of its own feasible set (and anchors the random walk).
    ``KERSIZE_THREADS`` caps the number of worker threads (sets are
    independent; results do not depend on scheduling).
    """
    modes = sum(arg is not None for arg in (measurements, generate, ground_truths))
    if modes != 1:
        raise UsageError("pass exactly one of measurements=, generate= or ground_truths=")
    truths = None
    if generate is not None:
        if generate < 1:
            raise UsageError("generate must request at least one measurement")
        ys = [None] * generate
    elif ground_truths is not None:
        truths = [as_vector(x, f"ground truth {k}") for k, x in enumerate(ground_truths)]
        if len(truths) == 0:
            raise UsageError("need at least one ground truth")
        ys = [None] * len(truths)
    else:
        ys = [as_vector(y, f"measurement {k}") for k, y in enumerate(measurements)]
        if len(ys) == 0:
            raise UsageError("need at least one measurement")
    k_total = len(ys)
    width = max(2, len(str(k_total - 1)))
    ids = [f"m{k:0{width}d}" for k in range(k_total)]
    args = [
        (k, ids[k], ys[k], None if truths is None else truths[k])
        for k in range(k_total)
    ]
    threads = max(1, int(os.environ.get("KERSIZE_THREADS", "1")))
    if threads > 1 and k_total > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(lambda a: _build_entry(model, sampler, *a), args))
    else:
        entries = [_build_entry(model, sampler, *a) for a in args]
    c = FeasibleSetCollection(d1=model.d1, d2=model.d2, entries=tuple(entries))
    return c, dataset_from_collection(c)


def enforce_uniform(c: FeasibleSetCollection, n: int) -> FeasibleSetCollection:
    """Truncate every feasible set to its first n members (uniform size)."""
    if n < 1:
        raise UsageError("n must be >= 1")
    for e in c.entries:
        if e.count < n:
            raise DataError(
                f"feasible set {e.id!r} has only {e.count} members, cannot keep {n}"
            )
    entries = tuple(
        FeasibleSet(id=e.id, measurement=e.measurement, members=e.members[:n])
        for e in c.entries
    )
    return FeasibleSetCollection(d1=c.d1, d2=c.d2, entries=entries)
