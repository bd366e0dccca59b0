"""Candidate interference-pattern sets.

An interference pattern is one ON/OFF combination of the base stations; a
pattern set is the candidate list the optimizer may share spectrum over.
Rows are kept in canonical (lexicographic) order so every downstream
tie-break is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError

ENUMERATION_CAP = 15


@dataclass(frozen=True)
class PatternSet:
    """Binary activity matrix, one row per pattern, one column per cell.

    ``a[i, b] == 1`` means cell ``b`` transmits while pattern ``i`` is live.
    Rows must be distinct and non-zero; the all-off combination can never
    carry rate so it is excluded everywhere.
    """

    a: np.ndarray
    tag: str = "custom"

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.a, dtype=np.int8))
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError("pattern matrix must be 2-D with at least one row")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("pattern entries must be 0 or 1")
        if not a.any(axis=1).all():
            raise ValueError("all-off pattern rows are not allowed")
        rows = {tuple(row) for row in a}
        if len(rows) != a.shape[0]:
            raise ValueError("pattern rows must be distinct")
        object.__setattr__(self, "a", a)

    @property
    def n_patterns(self) -> int:
        return self.a.shape[0]

    @property
    def n_cells(self) -> int:
        return self.a.shape[1]

    def rows(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.a]


@dataclass(frozen=True)
class ClusterMap:
    """Assignment of every cell to exactly one activation cluster."""

    assignment: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.assignment:
            raise ValueError("cluster map must assign at least one cell")
        cells = sorted(self.assignment)
        if cells != list(range(len(cells))):
            raise ValueError("cluster map must cover cell ids 0..B-1 exactly once")

    @property
    def n_cells(self) -> int:
        return len(self.assignment)

    def clusters(self) -> list[list[int]]:
        """Member cells per cluster, clusters ordered by their id."""
        by_cluster: dict[int, list[int]] = {}
        for cell, cl in sorted(self.assignment.items()):
            by_cluster.setdefault(cl, []).append(cell)
        return [by_cluster[cl] for cl in sorted(by_cluster)]


def _canonical(rows: set[tuple[int, ...]], tag: str) -> PatternSet:
    return PatternSet(np.array(sorted(rows), dtype=np.int8), tag=tag)


def enumerate_all(n_cells: int, cap: int = ENUMERATION_CAP) -> PatternSet:
    """All 2^B - 1 non-empty activity vectors, lexicographically ordered."""
    if n_cells < 1:
        raise ValueError("need at least one cell")
    if n_cells > cap:
        raise CapacityError(
            f"full enumeration of {n_cells} cells needs {2 ** n_cells - 1} patterns "
            f"(cap {cap} cells)"
        )
    rows = {
        tuple((mask >> (n_cells - 1 - b)) & 1 for b in range(n_cells))
        for mask in range(1, 2 ** n_cells)
    }
    return _canonical(rows, "all")


def reuse1(n_cells: int) -> PatternSet:
    """The single all-on pattern: every cell transmits on the whole band."""
    if n_cells < 1:
        raise ValueError("need at least one cell")
    return PatternSet(np.ones((1, n_cells), dtype=np.int8), tag="reuse1")


def cluster_patterns(cmap: ClusterMap) -> PatternSet:
    """All on/off combinations of clusters, broadcast to member cells.

    Cells in one cluster toggle together, so C clusters give 2^C - 1
    patterns regardless of the cell count.
    """
    members = cmap.clusters()
    n_cl = len(members)
    if n_cl > ENUMERATION_CAP:
        raise CapacityError(f"{n_cl} clusters exceed enumeration cap {ENUMERATION_CAP}")
    rows = set()
    for mask in range(1, 2 ** n_cl):
        row = [0] * cmap.n_cells
        for c in range(n_cl):
            if (mask >> c) & 1:
                for cell in members[c]:
                    row[cell] = 1
        rows.add(tuple(row))
    return _canonical(rows, "cluster")


def feature_patterns(topo) -> PatternSet:
    """Hand-picked candidate set for the 3-macro / 4-picos-per-macro layout.

    Four structural patterns (all pico clusters on with zero or one macro)
    plus one single-cell pattern per cell: 19 rows total. The structural
    four keep the macro that is on geographically separated from the pico
    clusters it would interfere with most.
    """
    from .netmodel import CellKind

    macros = [c for c in topo.cells if c.kind is CellKind.MACRO]
    picos = [c for c in topo.cells if c.kind is CellKind.PICO]
    if len(macros) != 3 or len(picos) != 12:
        raise ConfigError(
            f"feature patterns need 3 macros and 12 picos, got "
            f"{len(macros)} and {len(picos)}"
        )
    index = {c.id: i for i, c in enumerate(topo.cells)}
    b_total = len(topo.cells)

    # Attach each pico to its nearest macro; the layout must split 4/4/4.
    groups: dict[int, list[int]] = {m.id: [] for m in macros}
    for p in picos:
        d2 = [float(np.sum((np.asarray(p.position) - np.asarray(m.position)) ** 2)) for m in macros]
        groups[macros[int(np.argmin(d2))].id].append(p.id)
    if sorted(len(g) for g in groups.values()) != [4, 4, 4]:
        raise ConfigError("picos do not split 4/4/4 across the macros by proximity")

    def row_for(cell_ids) -> tuple[int, ...]:
        row = [0] * b_total
        for cid in cell_ids:
            row[index[cid]] = 1
        return tuple(row)

    all_picos = [p.id for p in picos]
    rows = {row_for(all_picos)}
    for m in macros:
        others = [pid for pid in all_picos if pid not in groups[m.id]]
        rows.add(row_for([m.id] + others))
    for c in topo.cells:
        rows.add(row_for([c.id]))
    if len(rows) != 19:
        raise ConfigError(f"expected 19 distinct feature patterns, built {len(rows)}")
    return _canonical(rows, "feature")
