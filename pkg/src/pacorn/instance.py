"""TSP instances: TSPLIB parsing, the EUC_2D metric and candidate lists.

Coordinates are the single source of truth; rounded distances are computed
from them on demand, so a later coordinate change (see :mod:`pacorn.dynamics`)
costs a candidate-list repair instead of an n x n matrix rebuild. A cached
matrix mode exists for small-instance testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

DEFAULT_CANDIDATES = 20


class ParseError(ValueError):
    """Malformed TSPLIB input. Carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedMetric(ValueError):
    """EDGE_WEIGHT_TYPE other than EUC_2D."""


class NotAPermutation(ValueError):
    """A tour order that repeats or misses a city."""


def euc2d_distance(p, q) -> int:
    """Rounded Euclidean distance between two points (half-up rounding).

    Half-up is spelled out because library rounding defaults differ
    (banker's rounding would map 1.5 to 2 but 2.5 to 2).
    """
    return int(math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2) + 0.5)


@dataclass
class Tour:
    """A closed tour: a permutation of the cities plus its cached length."""

    order: np.ndarray
    length: int

    def copy(self) -> "Tour":
        return Tour(self.order.copy(), self.length)

    def canonical_key(self) -> bytes:
        """Representation-independent identity of the cyclic tour.

        Rotated to start at city 0, direction chosen so the sequence is
        lexicographically smallest; rotations and reflections of one tour
        map to the same key.
        """
        order = self.order
        fwd = np.roll(order, -int(np.argmin(order)))
        rev = order[::-1]
        bwd = np.roll(rev, -int(np.argmin(rev)))
        a = fwd.astype(">i8").tobytes()
        b = bwd.astype(">i8").tobytes()
        return a if a <= b else b


class Instance:
    """A 2D Euclidean TSP instance with nearest-neighbor candidate lists.

    Immutable after construction except through the dynamics module, which
    moves one city at a time and repairs the candidate lists. `bbox` always
    refers to the coordinates the instance was built with.
    """

    def __init__(self, name, coords, candidate_k=DEFAULT_CANDIDATES, cache_matrix=False):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must be an (n, 2) array")
        n = coords.shape[0]
        if n < 3:
            raise ValueError(f"need at least 3 cities, got {n}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        if cache_matrix and n > 1000:
            raise ValueError("cached-matrix mode is limited to n <= 1000")
        self.name = name
        self.metric = "EUC2D"
        self.coords = coords
        self.n = n
        self.bbox = (
            float(coords[:, 0].min()),
            float(coords[:, 0].max()),
            float(coords[:, 1].min()),
            float(coords[:, 1].max()),
        )
        self.candidate_k = min(candidate_k, n - 1)
        self.nn_lists = build_neighbor_lists(self, self.candidate_k)
        self.last_move_cycle = 0
        self.last_move_affected = None
        self._dist_matrix = None
        if cache_matrix:
            self._dist_matrix = self._full_matrix()

    def _full_matrix(self) -> np.ndarray:
        dx = self.coords[:, 0][:, None] - self.coords[:, 0][None, :]
        dy = self.coords[:, 1][:, None] - self.coords[:, 1][None, :]
        return np.floor(np.sqrt(dx * dx + dy * dy) + 0.5).astype(np.int64)

    def distance(self, i, j) -> int:
        if self._dist_matrix is not None:
            return int(self._dist_matrix[i, j])
        return int(_kernels.dist(self.coords, i, j))

    def distance_row(self, i) -> np.ndarray:
        """Rounded distances from city i to all cities."""
        return _kernels.distances_from(self.coords, i)

    def copy(self) -> "Instance":
        dup = object.__new__(Instance)
        dup.name = self.name
        dup.metric = self.metric
        dup.coords = self.coords.copy()
        dup.n = self.n
        dup.bbox = self.bbox
        dup.candidate_k = self.candidate_k
        dup.nn_lists = self.nn_lists.copy()
        dup.last_move_cycle = self.last_move_cycle
        dup.last_move_affected = self.last_move_affected
        dup._dist_matrix = None if self._dist_matrix is None else self._dist_matrix.copy()
        return dup

    def _nn_of(self, i) -> np.ndarray:
        """Candidate list of one city: k nearest, ties to the lower index."""
        d = self.distance_row(i)
        d[i] = np.iinfo(np.int64).max
        idx = np.lexsort((np.arange(self.n), d))
        return idx[: self.candidate_k].astype(np.int64)

    def _move_city(self, city, x, y):
        """Coordinate overwrite plus candidate-list repair (dynamics only).

        Records every city whose candidate neighborhood the move touched in
        ``last_move_affected`` (the moved city, its former and current
        candidates, and lists the city left or entered).
        """
        affected = {int(city)}
        affected.update(int(c) for c in self.nn_lists[city])
        self.coords[city, 0] = x
        self.coords[city, 1] = y
        if self._dist_matrix is not None:
            row = self.distance_row(city)
            self._dist_matrix[city, :] = row
            self._dist_matrix[:, city] = row
        self.nn_lists[city] = self._nn_of(city)
        affected.update(int(c) for c in self.nn_lists[city])
        k = self.candidate_k
        for i in range(self.n):
            if i == city:
                continue
            row = self.nn_lists[i]
            if city in row:
                # the old (k+1)-th nearest is unknown, so rebuild this list
                self.nn_lists[i] = self._nn_of(i)
                affected.add(i)
                continue
            d_new = self.distance(i, city)
            tail = row[k - 1]
            d_tail = self.distance(i, tail)
            if (d_new, city) < (d_tail, int(tail)):
                # splice the moved city into its sorted slot, drop the tail
                keys = [(self.distance(i, c), int(c)) for c in row[: k - 1]]
                slot = 0
                while slot < k - 1 and keys[slot] < (d_new, city):
                    slot += 1
                self.nn_lists[i] = np.concatenate(
                    [row[:slot], np.array([city], dtype=np.int64), row[slot : k - 1]]
                )
                affected.add(i)
        self.last_move_affected = np.array(sorted(affected), dtype=np.int64)

    def to_tsplib(self) -> str:
        lines = [
            f"NAME : {self.name}",
            "TYPE : TSP",
            f"DIMENSION : {self.n}",
            "EDGE_WEIGHT_TYPE : EUC_2D",
            "NODE_COORD_SECTION",
        ]
        for i in range(self.n):
            lines.append(f"{i + 1} {float(self.coords[i, 0])!r} {float(self.coords[i, 1])!r}")
        lines.append("EOF")
        return "\n".join(lines) + "\n"


def build_neighbor_lists(inst: Instance, k: int) -> np.ndarray:
    """(n, k) array of each city's k nearest others, ties to the lower index."""
    if not 1 <= k <= inst.n - 1:
        raise ValueError(f"candidate list size {k} out of range [1, {inst.n - 1}]")
    n = inst.n
    coords = inst.coords
    out = np.empty((n, k), dtype=np.int64)
    idx = np.arange(n)
    for i in range(n):
        d = _kernels.distances_from(coords, i)
        d[i] = np.iinfo(np.int64).max
        out[i] = np.lexsort((idx, d))[:k]
    return out


def tour_length(inst: Instance, order) -> int:
    order = np.asarray(order, dtype=np.int64)
    if order.shape[0] != inst.n or not np.array_equal(np.sort(order), np.arange(inst.n)):
        raise NotAPermutation("order is not a permutation of the cities")
    return int(_kernels.tour_length(inst.coords, order))


def make_tour(inst: Instance, order) -> Tour:
    return Tour(np.asarray(order, dtype=np.int64).copy(), tour_length(inst, order))


def parse_tsplib(source, candidate_k=DEFAULT_CANDIDATES, cache_matrix=False) -> Instance:
    """Parse the EUC_2D subset of the TSPLIB format.

    ``source`` may be the file text or an open file object. Node indices are
    1-based in the file and re-based to 0.
    """
    if hasattr(source, "read"):
        source = source.read()
    name = None
    dimension = None
    metric = None
    coords = None
    seen = None
    in_coords = False
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.upper() == "EOF":
            break
        if not in_coords:
            key, _, value = line.partition(":")
            key = key.strip().upper()
            value = value.strip()
            if key == "NAME":
                name = value
            elif key == "DIMENSION":
                try:
                    dimension = int(value)
                except ValueError:
                    raise ParseError(f"bad DIMENSION {value!r}", lineno) from None
                if dimension < 3:
                    raise ParseError(f"DIMENSION must be >= 3, got {dimension}", lineno)
            elif key == "EDGE_WEIGHT_TYPE":
                metric = value.upper()
                if metric != "EUC_2D":
                    raise UnsupportedMetric(f"unsupported EDGE_WEIGHT_TYPE {value!r}")
            elif key == "NODE_COORD_SECTION":
                if dimension is None:
                    raise ParseError("NODE_COORD_SECTION before DIMENSION", lineno)
                coords = np.zeros((dimension, 2), dtype=np.float64)
                seen = np.zeros(dimension, dtype=bool)
                in_coords = True
            # TYPE / COMMENT / unknown headers are ignored
        else:
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'index x y', got {line!r}", lineno)
            try:
                node = int(parts[0])
                x = float(parts[1])
                y = float(parts[2])
            except ValueError:
                raise ParseError(f"bad coordinate line {line!r}", lineno) from None
            if not 1 <= node <= dimension:
                raise ParseError(f"node index {node} outside 1..{dimension}", lineno)
            if seen[node - 1]:
                raise ParseError(f"duplicate node index {node}", lineno)
            seen[node - 1] = True
            coords[node - 1, 0] = x
            coords[node - 1, 1] = y
    if dimension is None:
        raise ParseError("missing DIMENSION header")
    if metric is None:
        raise ParseError("missing EDGE_WEIGHT_TYPE header")
    if coords is None:
        raise ParseError("missing NODE_COORD_SECTION")
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0]) + 1
        raise ParseError(f"missing node index {missing}")
    return Instance(
        name or "unnamed", coords, candidate_k=candidate_k, cache_matrix=cache_matrix
    )


def load_instance(path, candidate_k=DEFAULT_CANDIDATES, cache_matrix=False) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tsplib(fh, candidate_k=candidate_k, cache_matrix=cache_matrix)
