"""Domain types, the evaluation pseudo-norm, the empirical loss, and dataset containers.

Signals and measurements are plain 1-D float64 numpy arrays; the containers
below validate and freeze them. All types are immutable after construction and
all operations are pure functions, so everything here is safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "UsageError",
    "DataError",
    "NormSpec",
    "FeasibleSet",
    "FeasibleSetCollection",
    "PairedDataset",
    "as_vector",
    "p_dist",
    "loss",
    "dataset_from_collection",
    "collection_from_dataset",
]


class UsageError(ValueError):
    """A call violated an operation's contract (bad arguments, bad config)."""


class DataError(ValueError):
    """Input data violated an invariant (missing prediction, malformed file)."""


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, read-only."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise UsageError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} contains non-finite entries")
    v = v.copy()
    v.setflags(write=False)
    return v


def _empty_ok_matrix(values, name: str) -> np.ndarray:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim == 1 and m.size == 0:
        m = m.reshape(0, 0)
    if m.ndim != 2:
        raise UsageError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise DataError(f"{name} contains non-finite entries")
    m = m.copy()
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class NormSpec:
    """Evaluation pseudo-norm on signal space plus the loss exponent.

    ``q`` is the inner coordinate-norm exponent (1, 2 or inf), ``mask`` an
    optional 0/1 coordinate projection (None means all coordinates), and ``p``
    the loss exponent. With an all-ones mask and q = 2 this is the standard
    Euclidean norm.
    """

    p: float = 2.0
    q: float = 2.0
    mask: np.ndarray | None = None

    def __post_init__(self):
        if not (self.p > 0 and math.isfinite(self.p)):
            raise UsageError(f"p must be a positive real, got {self.p}")
        if self.q not in (1, 2, np.inf):
            raise UsageError(f"q must be 1, 2 or inf, got {self.q}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))
        if self.mask is not None:
            m = np.asarray(self.mask)
            if m.ndim != 1 or not np.all(np.isin(m, (0, 1))):
                raise UsageError("mask must be a 1-D 0/1 vector")
            if not m.any():
                raise UsageError("mask must select at least one coordinate")
            m = m.astype(bool)
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    def check_dim(self, d: int) -> None:
        if self.mask is not None and self.mask.shape[0] != d:
            raise UsageError(
                f"mask length {self.mask.shape[0]} does not match dimension {d}"
            )

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": "inf" if self.q == np.inf else self.q,
            "mask": None if self.mask is None else self.mask.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormSpec":
        q = d.get("q", 2)
        if q in ("inf", "Inf", "infinity"):
            q = np.inf
        return cls(p=float(d.get("p", 2)), q=q, mask=d.get("mask"))


def vector_norms(diffs: np.ndarray, norm: NormSpec) -> np.ndarray:
    """Masked q-norms of the rows of ``diffs`` (shape (n, d) -> (n,))."""
    d = np.atleast_2d(np.abs(diffs))
    if norm.mask is not None:
        norm.check_dim(d.shape[1])
        d = d[:, norm.mask]
    if norm.q == 2:
        return np.sqrt(np.einsum("ij,ij->i", d, d))
    if norm.q == 1:
        return d.sum(axis=1)
    return d.max(axis=1) if d.shape[1] else np.zeros(d.shape[0])


def p_dist(a, b, norm: NormSpec) -> float:
    """Pseudo-distance ``‖a - b‖`` under the masked inner q-norm.

    Symmetric and zero exactly when the masked coordinates agree; a
    pseudo-metric because unmasked coordinates are invisible to it.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise UsageError(f"p_dist needs equal-length vectors, got {a.shape} vs {b.shape}")
    return float(vector_norms((a - b)[None, :], norm)[0])


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """One measurement and the sampled signals mapping onto it."""

    id: str
    measurement: np.ndarray  # (d2,)
    members: np.ndarray  # (n, d1); n may be 0

    def __post_init__(self):
        object.__setattr__(self, "measurement", as_vector(self.measurement, "measurement"))
        m = np.asarray(self.members, dtype=np.float64)
        if m.ndim == 1:
            m = m.reshape(0, 0) if m.size == 0 else m[None, :]
        if m.ndim != 2:
            raise UsageError(f"members must be a 2-D array, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DataError(f"feasible set {self.id!r} has non-finite members")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    @property
    def count(self) -> int:
        return self.members.shape[0]


@dataclass(frozen=True, eq=False)
class FeasibleSetCollection:
    """K measurements with their sampled feasible sets (the output shape of
    the feasible-set approximation step)."""

    d1: int
    d2: int
    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if len(entries) == 0:
            raise UsageError("a collection needs at least one measurement")
        seen = set()
        for e in entries:
            if e.id in seen:
                raise DataError(f"duplicate feasible-set id {e.id!r}")
            seen.add(e.id)
            if e.measurement.shape[0] != self.d2:
                raise DataError(f"set {e.id!r}: measurement length != d2={self.d2}")
            if e.count > 0 and e.members.shape[1] != self.d1:
                raise DataError(f"set {e.id!r}: member length != d1={self.d1}")
        object.__setattr__(self, "entries", entries)

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def counts(self) -> tuple:
        return tuple(e.count for e in self.entries)

    @property
    def uniform(self) -> bool:
        """True iff every feasible set has the same number of members."""
        c = self.counts
        return len(set(c)) == 1

    @property
    def ids(self) -> tuple:
        return tuple(e.id for e in self.entries)


@dataclass(frozen=True, eq=False)
class PairedDataset:
    """Flat list of (x, y) pairs with the index of the originating set.

    ``group_ids[group[m]]`` names the measurement pair m came from; all pairs
    in one group carry the identical measurement vector.
    """

    x: np.ndarray  # (M, d1)
    y: np.ndarray  # (M, d2)
    group: np.ndarray  # (M,) int
    group_ids: tuple

    def __post_init__(self):
        x = _empty_ok_matrix(self.x, "x")
        y = _empty_ok_matrix(self.y, "y")
        g = np.asarray(self.group, dtype=np.intp).copy()
        if x.shape[0] != y.shape[0] or x.shape[0] != g.shape[0]:
            raise UsageError("x, y and group must have one row per pair")
        if g.size and (g.min() < 0 or g.max() >= len(self.group_ids)):
            raise DataError("group index out of range")
        if g.size > 1:
            # sort once; equal consecutive rows per group imply a constant group
            order = np.argsort(g, kind="stable")
            gs, ys = g[order], y[order]
            same_group = gs[1:] == gs[:-1]
            differs = np.any(ys[1:] != ys[:-1], axis=1)
            bad = np.flatnonzero(same_group & differs)
            if bad.size:
                k = int(gs[bad[0]])
                raise DataError(
                    f"pairs in group {self.group_ids[k]!r} disagree on the measurement"
                )
        g.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "group", g)
        object.__setattr__(self, "group_ids", tuple(self.group_ids))

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @property
    def d1(self) -> int:
        return self.x.shape[1]


def dataset_from_collection(c: FeasibleSetCollection) -> PairedDataset:
    """Flatten a collection into (x, y) pairs, set-major then member order."""
    xs, ys, gs = [], [], []
    for k, e in enumerate(c.entries):
        if e.count == 0:
            continue
        xs.append(e.members)
        ys.append(np.repeat(e.measurement[None, :], e.count, axis=0))
        gs.append(np.full(e.count, k, dtype=np.intp))
    if xs:
        x = np.vstack(xs)
        y = np.vstack(ys)
        g = np.concatenate(gs)
    else:
        x = np.zeros((0, c.d1))
        y = np.zeros((0, c.d2))
        g = np.zeros(0, dtype=np.intp)
    return PairedDataset(x=x, y=y, group=g, group_ids=c.ids)


def _group_rows(group: np.ndarray):
    """Yield (group index, row indices) in ascending group order."""
    if group.size == 0:
        return
    order = np.argsort(group, kind="stable")
    splits = np.flatnonzero(np.diff(group[order])) + 1
    for rows in np.split(order, splits):
        yield int(group[rows[0]]), rows


def collection_from_dataset(c: PairedDataset) -> FeasibleSetCollection:
    """Regroup a paired dataset into feasible sets, one per measurement id."""
    entries = []
    for k, rows in _group_rows(c.group):
        entries.append(
            FeasibleSet(id=c.group_ids[k], measurement=c.y[rows[0]], members=c.x[rows])
        )
    if not entries:
        raise DataError("dataset has no pairs to regroup")
    return FeasibleSetCollection(d1=c.x.shape[1], d2=c.y.shape[1], entries=tuple(entries))


def loss(dataset: PairedDataset, predictions: Mapping[str, Sequence], norm: NormSpec) -> float:
    """Empirical reconstruction loss ``((1/M) Σ ‖x_m - φ(y_m)‖^p)^(1/p)``.

    ``predictions`` assigns one signal estimate per measurement id present in
    the dataset. For p = 2 with the Euclidean norm this is the RMSE.
    """
    m_total = dataset.size
    if m_total == 0:
        raise DataError("loss is undefined on an empty dataset")
    powers = []
    for k, rows in _group_rows(dataset.group):
        gid = dataset.group_ids[k]
        if gid not in predictions:
            raise DataError(f"missing prediction for measurement {gid!r}")
        phi = np.asarray(predictions[gid], dtype=np.float64)
        if phi.shape != (dataset.d1,):
            raise UsageError(
                f"prediction for {gid!r} has shape {phi.shape}, expected ({dataset.d1},)"
            )
        res = dataset.x[rows] - phi[None, :]
        powers.append(vector_norms(res, norm) ** norm.p)
    total = math.fsum(float(v) for arr in powers for v in arr)
    return (total / m_total) ** (1.0 / norm.p)
