"""Spatial lattice: regions, neighbour relations, and validation.

Regions are 1-indexed in adjacency files and 0-indexed everywhere in code.
The graph carries no geometry; the neighbourhood structure is taken as given.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .exceptions import DataError


@dataclass(frozen=True, eq=False)
class SpatialGraph:
    """Undirected region adjacency over ``n_regions`` regions.

    ``edges`` holds unordered pairs as sorted 0-indexed tuples (a, b), a < b.
    ``degrees[k]`` is the neighbour count of region k (the diagonal of D).
    """

    n_regions: int
    edges: tuple[tuple[int, int], ...]
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_regions < 1:
            raise DataError(f"n_regions must be >= 1, got {self.n_regions}")
        deg = np.zeros(self.n_regions, dtype=np.int64)
        seen = set()
        for a, b in self.edges:
            if not (0 <= a < b < self.n_regions):
                raise DataError(f"edge ({a}, {b}) out of range for K={self.n_regions}")
            if (a, b) in seen:
                raise DataError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            deg[a] += 1
            deg[b] += 1
        object.__setattr__(self, "degrees", deg)
        if self.n_regions > 1 and (deg == 0).any():
            isolated = np.flatnonzero(deg == 0) + 1
            warnings.warn(
                f"regions {isolated.tolist()} (1-indexed) have no neighbours; "
                "they only receive the independent part of the Leroux precision",
                stacklevel=2,
            )

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix W with zero diagonal."""
        if not self.edges:
            return sparse.csr_matrix((self.n_regions, self.n_regions))
        a, b = np.array(self.edges).T
        rows = np.concatenate([a, b])
        cols = np.concatenate([b, a])
        data = np.ones(rows.size)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n_regions, self.n_regions))

    def laplacian(self) -> sparse.csr_matrix:
        """Graph Laplacian D - W."""
        return sparse.diags(self.degrees.astype(float)).tocsr() - self.adjacency()

    def neighbors(self, k: int) -> np.ndarray:
        """0-indexed neighbours of region k."""
        out = [b for a, b in self.edges if a == k] + [a for a, b in self.edges if b == k]
        return np.array(sorted(out), dtype=np.int64)


def load_adjacency(text: str, n_regions: int) -> SpatialGraph:
    """Parse an edge-list document into a validated SpatialGraph.

    Format: one ``k l`` pair of 1-indexed region ids per line, whitespace
    separated; ``#`` starts a comment; blank lines ignored. Duplicate edges
    collapse; self-loops are rejected.
    """
    if n_regions < 1:
        raise DataError(f"n_regions must be >= 1, got {n_regions}")
    edges = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"line {lineno}: expected two region indices, got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"line {lineno}: non-integer region index in {raw!r}") from None
        if a == b:
            raise DataError(f"line {lineno}: self-loop on region {a}")
        for idx in (a, b):
            if not (1 <= idx <= n_regions):
                raise DataError(
                    f"line {lineno}: region index {idx} out of range [1, {n_regions}]"
                )
        edges.add((min(a, b) - 1, max(a, b) - 1))
    return SpatialGraph(n_regions=n_regions, edges=tuple(sorted(edges)))


def is_connected(g: SpatialGraph) -> bool:
    """True iff all regions lie in one connected component."""
    if g.n_regions == 1:
        return True
    adj = [[] for _ in range(g.n_regions)]
    for a, b in g.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(g.n_regions, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        k = stack.pop()
        for nb in adj[k]:
            if not seen[nb]:
                seen[nb] = True
                stack.append(nb)
    return bool(seen.all())


def grid_graph(n_rows: int, n_cols: int) -> SpatialGraph:
    """Rook-neighbourhood rectangular lattice, a convenient synthetic map."""
    edges = []
    for r in range(n_rows):
        for c in range(n_cols):
            k = r * n_cols + c
            if c + 1 < n_cols:
                edges.append((k, k + 1))
            if r + 1 < n_rows:
                edges.append((k, k + n_cols))
    return SpatialGraph(n_regions=n_rows * n_cols, edges=tuple(sorted(edges)))
