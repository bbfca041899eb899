"""Station placement, nearest-station patches, and volume aggregation.

Each station observes the total volume of the cells closer to it than to
any other station (Euclidean distance between cell centers). Cells exactly
equidistant from k stations are split fractionally, weight 1/k each; a
binary variant re-breaks those ties to the lowest station index so that
every cell belongs to exactly one patch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import GridDomain, SpatialField, _check_same_domain, _frozen
from .errors import (
    DegenerateField,
    InfeasibleVolume,
    InsufficientSupport,
    ShapeMismatch,
)

# Squared center distances within this absolute slack count as tied; grid
# symmetries produce exact ties that floating arithmetic can smear.
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StationSet:
    """Distinct active cells hosting one station each."""

    domain: GridDomain
    cells: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.cells, dtype=np.int64).ravel()
        if c.size < 1:
            raise ShapeMismatch("at least one station is required")
        if c.size > self.domain.n:
            raise ShapeMismatch("more stations than active cells")
        if c.min() < 0 or c.max() >= self.domain.n:
            raise ShapeMismatch("station cell index out of range")
        if np.unique(c).size != c.size:
            raise ShapeMismatch("station cells must be distinct")
        object.__setattr__(self, "cells", _frozen(c))

    @property
    def m(self) -> int:
        return self.cells.size

    @property
    def positions(self) -> np.ndarray:
        return self.domain.centers[self.cells]


def sample_stations(f: SpatialField, m: int, seed: int) -> StationSet:
    """Draw m station cells without replacement, Pr(cell) proportional to f.

    Sequential draws with renormalization: after each pick the chosen cell
    is removed and the remaining probabilities rescale. Deterministic for a
    fixed seed (PCG64).
    """
    v = f.values
    if v.size and v.min() < 0:
        raise ValueError("sampling weights must be nonnegative")
    total = v.sum()
    if not total > 0:
        raise DegenerateField("field has zero total mass; cannot place stations")
    positive = np.flatnonzero(v > 0)
    if m < 1:
        raise ShapeMismatch("station count must be at least 1")
    if m > positive.size:
        raise InsufficientSupport(
            f"{m} stations requested but only {positive.size} cells have positive mass"
        )
    rng = np.random.default_rng(seed)
    weights = v[positive].astype(float).copy()
    chosen = np.empty(m, dtype=np.int64)
    for k in range(m):
        cum = np.cumsum(weights)
        u = rng.random() * cum[-1]
        j = int(np.searchsorted(cum, u, side="right"))
        j = min(j, weights.size - 1)
        chosen[k] = positive[j]
        positive = np.delete(positive, j)
        weights = np.delete(weights, j)
    return StationSet(f.domain, np.sort(chosen))


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of cells to station patches.

    ``matrix`` holds the fractional weights (m x n, rows sum over each
    patch, columns sum to 1); ``matrix_binary`` the tie-re-broken variant.
    ``patch_sizes`` are fractional cell counts, sum(patch_sizes) = n.
    """

    stations: StationSet
    matrix: sp.csr_matrix
    matrix_binary: sp.csr_matrix
    patch_sizes: np.ndarray
    station_of_cell: np.ndarray
    has_ties: bool
    binary_patches: tuple = field(repr=False, default=())

    @property
    def domain(self) -> GridDomain:
        return self.stations.domain

    @property
    def m(self) -> int:
        return self.stations.m


def build_partition(domain: GridDomain, stations: StationSet) -> Partition:
    _check_same_domain(domain, stations.domain, "station set")
    centers = domain.centers
    spos = stations.positions
    d2 = ((centers[:, None, :] - spos[None, :, :]) ** 2).sum(axis=2)
    d2min = d2.min(axis=1)
    tied = d2 <= (d2min + TIE_TOL)[:, None]
    k = tied.sum(axis=1)

    cell_idx, stat_idx = np.nonzero(tied)
    weights = 1.0 / k[cell_idx]
    n, m = domain.n, stations.m
    matrix = sp.csr_matrix((weights, (stat_idx, cell_idx)), shape=(m, n))

    station_of_cell = np.argmax(tied, axis=1).astype(np.int64)
    matrix_binary = sp.csr_matrix(
        (np.ones(n), (station_of_cell, np.arange(n))), shape=(m, n)
    )
    patch_sizes = np.asarray(matrix.sum(axis=1)).ravel()
    patches = tuple(
        np.flatnonzero(station_of_cell == i) for i in range(m)
    )
    return Partition(
        stations=stations,
        matrix=matrix,
        matrix_binary=matrix_binary,
        patch_sizes=_frozen(patch_sizes),
        station_of_cell=_frozen(station_of_cell),
        has_ties=bool((k > 1).any()),
        binary_patches=patches,
    )


@dataclass(frozen=True, eq=False)
class AggregateObservations:
    """One observed volume per station."""

    values: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.values, dtype=float).ravel()
        if not np.isfinite(z).all():
            raise ValueError("volumes must be finite")
        if z.size and z.min() < 0:
            raise InfeasibleVolume(f"negative volume {z.min()} observed")
        object.__setattr__(self, "values", _frozen(z))

    @property
    def m(self) -> int:
        return self.values.size


def aggregate(partition: Partition, f: SpatialField) -> AggregateObservations:
    """Per-station volumes z = A f * cell_area, fractional tie weights."""
    _check_same_domain(partition.domain, f.domain, "field")
    z = partition.matrix @ f.values * f.domain.cell_area
    return AggregateObservations(z)


def patched_estimate(partition: Partition, z: AggregateObservations) -> SpatialField:
    """Spread each station volume uniformly over its patch.

    Cell j gets sum_i A_ij * z_i / (|patch_i| * cell_area). Aggregating the
    result returns z exactly only when no cell is tied between stations;
    tied cells mix their patches' densities, so per-station volumes shift
    while the overall total is always conserved (columns of A sum to 1).
    """
    if z.m != partition.m:
        raise ShapeMismatch(f"{z.m} volumes for {partition.m} stations")
    area = partition.domain.cell_area
    density = z.values / (partition.patch_sizes * area)
    values = partition.matrix.T @ density
    return SpatialField(partition.domain, values, nonnegative=True)
