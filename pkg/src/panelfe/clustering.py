"""Hierarchical clustering into groups of two or three members.

Singletons are merged one at a time into the nearest cluster of size at most
three (single linkage); a cluster that reaches four members is immediately
split into the two pairs with the smallest summed within-pair distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Grouping:
    """A partition of ``range(M)``.

    ``labels[m]`` is the group (0-based) of index ``m``. Groups are numbered
    in order of their smallest member.
    """

    labels: np.ndarray
    n_groups: int
    sizes: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> "Grouping":
        raw = np.asarray(labels)
        if raw.ndim != 1 or raw.size == 0:
            raise DomainError("labels must be a non-empty 1-d array")
        _, first, inv = np.unique(raw, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        remap = np.empty_like(order)
        remap[order] = np.arange(order.size)
        lab = remap[inv].astype(np.intp)
        lab.setflags(write=False)
        sizes = np.bincount(lab)
        sizes.setflags(write=False)
        return cls(labels=lab, n_groups=int(sizes.size), sizes=sizes)

    def __len__(self) -> int:
        return int(self.labels.size)

    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == g) for g in range(self.n_groups)]

    def as_sets(self) -> set[frozenset]:
        return {frozenset(int(i) for i in m) for m in self.members()}

    def subset(self, idx) -> "Grouping":
        """Grouping restricted to the positions ``idx`` (relabelled)."""
        return Grouping.from_labels(self.labels[np.asarray(idx)])


def pairwise_distances(points) -> np.ndarray:
    """Euclidean distance matrix with ``inf`` on the diagonal.

    ``points`` is an (M, d) array or a sequence of M equal-length vectors;
    a 1-d array is read as M scalars.
    """
    try:
        p = np.asarray(points, dtype=np.float64)
    except ValueError:
        raise DomainError("points must all have the same length") from None
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2 or p.shape[0] < 1:
        raise DomainError("points must form a non-empty (M, d) array")
    if p.shape[0] ** 2 * p.shape[1] <= 4_000_000:
        diff = p[:, None, :] - p[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
    else:
        sq = np.sum(p * p, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (p @ p.T)
    a = np.sqrt(np.maximum(d2, 0.0))
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, np.inf)
    return a


def _count_four(label) -> int:
    return int(np.sum(np.unique(label, return_counts=True)[1] == 4))


_PAIRINGS = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


def pair_triple_partition(distances, trace: list | None = None) -> Grouping:
    """Partition indices into groups of size two or three.

    Parameters
    ----------
    distances : array_like, shape (M, M)
        Symmetric distance matrix; the diagonal is ignored.
    trace : list, optional
        When given, one tuple per step is appended:
        ``("merge", i, j, n_four)`` or ``("split", pair_a, pair_b, n_four)``
        where ``n_four`` counts clusters of size four after the step.

    Ties are resolved in favour of the lexicographically smallest index pair.
    For ``M <= 3`` all indices form one group.
    """
    a = np.array(distances, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DomainError("distances must be a non-empty square matrix")
    m = a.shape[0]
    np.fill_diagonal(a, np.inf)
    off = ~np.eye(m, dtype=bool)
    if np.isnan(a).any() or not np.allclose(a[off], a.T[off], rtol=1e-12, atol=0.0):
        raise DomainError("distance matrix must be symmetric")
    if m <= 3:
        return Grouping.from_labels(np.zeros(m, dtype=np.intp))

    label = np.arange(m)
    size = np.ones(m, dtype=np.intp)  # size of the cluster containing each index
    next_label = m
    four = None  # label of the (at most one) cluster of size four

    while True:
        if four is not None:
            mem = np.flatnonzero(label == four)
            costs = [a[mem[p[0]], mem[p[1]]] + a[mem[q[0]], mem[q[1]]] for p, q in _PAIRINGS]
            p, q = _PAIRINGS[int(np.argmin(costs))]
            moved = mem[list(q)]
            label[moved] = next_label
            next_label += 1
            size[mem] = 2
            four = None
            if trace is not None:
                trace.append(("split", (int(mem[p[0]]), int(mem[p[1]])),
                              (int(mem[q[0]]), int(mem[q[1]])), _count_four(label)))
            continue
        single = size == 1
        if not single.any():
            break
        eligible = size <= 3
        masked = np.where(single[:, None] & eligible[None, :], a, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, m)
        if not np.isfinite(masked[i, j]):
            # all remaining distances infinite: fall back to index order
            i = int(np.flatnonzero(single)[0])
            j = int(np.flatnonzero(eligible & (np.arange(m) != i))[0])
        li, lj = label[i], label[j]
        label[label == li] = lj
        members = label == lj
        new_size = int(members.sum())
        size[members] = new_size
        if new_size == 4:
            four = lj
        if trace is not None:
            trace.append(("merge", int(i), int(j), _count_four(label)))
    return Grouping.from_labels(label)


def cluster_points(points, trace: list | None = None) -> Grouping:
    """:func:`pair_triple_partition` applied to the rows of ``points``."""
    return pair_triple_partition(pairwise_distances(points), trace=trace)
