"""Base graphs, vertex codecs and the lazy step rule.

Vertices are canonical integer ids in ``[0, |G|)``.  Torus-like families use a
mixed-radix codec with coordinate 0 as the least significant digit, so
``id = sum_j c_j * n**j``.  The hypercube is the torus with ``n = 2``; there the
``+1`` and ``-1`` moves coincide and a step flips one coordinate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from mixlab.errors import PreconditionError, UnsupportedOperationError
from mixlab.validation import check_int

FAMILIES = ("torus", "hypercube", "cycle", "complete", "explicit")

# Above this many (vertex, neighbour) entries the neighbour table is not
# materialised and torus steps use coordinate arithmetic instead.
TABLE_LIMIT = 1 << 22


@dataclass(frozen=True)
class GraphSpec:
    """An undirected connected base graph with canonical integer vertex ids.

    Use the constructors :func:`torus`, :func:`hypercube`, :func:`cycle`,
    :func:`complete`, :func:`explicit` or :func:`parse_graph` rather than
    building instances directly.
    """

    family: str
    n: int = 0
    d: int = 1
    adjacency: tuple = field(default=(), repr=False)
    transitive: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PreconditionError(f"unknown graph family {self.family!r}", field="family")

    # -- sizes -----------------------------------------------------------
    @property
    def is_torus_like(self):
        return self.family in ("torus", "hypercube", "cycle")

    @property
    def radix(self):
        """Coordinate modulus for torus-like families."""
        if self.family == "hypercube":
            return 2
        return self.n

    @property
    def dim(self):
        return self.d if self.family in ("torus", "hypercube") else 1

    @cached_property
    def vertex_count(self):
        if self.is_torus_like:
            return int(self.radix) ** int(self.dim)
        if self.family == "complete":
            return self.n
        return len(self.adjacency)

    def __len__(self):
        return self.vertex_count

    @cached_property
    def degrees(self):
        """Degree of every vertex (length ``|G|`` array)."""
        if self.family == "explicit":
            return np.array([len(a) for a in self.adjacency], dtype=np.int64)
        return np.full(self.vertex_count, self.degree, dtype=np.int64)

    @cached_property
    def degree(self):
        """Common degree for regular graphs; ``None`` when degrees differ."""
        if self.is_torus_like:
            return self.dim if self.radix == 2 else 2 * self.dim
        if self.family == "complete":
            return self.n - 1
        degs = {len(a) for a in self.adjacency}
        return degs.pop() if len(degs) == 1 else None

    @property
    def is_regular(self):
        return self.degree is not None

    @cached_property
    def max_degree(self):
        return int(self.degrees.max()) if self.family == "explicit" else int(self.degree)

    @cached_property
    def _strides(self):
        return np.array([self.radix**j for j in range(self.dim)], dtype=np.int64)

    def label(self):
        if self.family == "torus":
            return f"torus:n={self.n},d={self.d}"
        if self.family == "hypercube":
            return f"hypercube:d={self.d}"
        if self.family in ("cycle", "complete"):
            return f"{self.family}:n={self.n}"
        return f"explicit:|G|={self.vertex_count}"

    # -- codec -----------------------------------------------------------
    def check_vertex(self, v):
        return check_int(v, "vertex", min_value=0, max_value=self.vertex_count - 1)

    def decode(self, v):
        """Vertex id to coordinates (a tuple for tori/hypercubes, an int otherwise)."""
        v = self.check_vertex(v)
        if self.family in ("torus", "hypercube"):
            return tuple(int(c) for c in (v // self._strides) % self.radix)
        return v

    def encode(self, coords):
        if self.family in ("torus", "hypercube"):
            coords = tuple(int(c) % self.radix for c in coords)
            if len(coords) != self.dim:
                raise PreconditionError(f"expected {self.dim} coordinates", field="vertex")
            return int(np.dot(coords, self._strides))
        return self.check_vertex(int(coords))

    def coordinates(self, ids):
        """Vectorised decode: ``(len(ids), dim)`` coordinate array."""
        ids = np.asarray(ids, dtype=np.int64)
        return (ids[..., None] // self._strides) % self.radix

    # -- adjacency -------------------------------------------------------
    def neighbors(self, v):
        v = self.check_vertex(v)
        if self.family == "explicit":
            return list(self.adjacency[v])
        return [int(u) for u in self.step(np.array([v]), np.arange(self.degree)[:, None])[:, 0]]

    @cached_property
    def neighbor_table(self):
        """``(|G|, max_degree)`` array of neighbour ids, padded with -1 for explicit graphs."""
        if self.vertex_count * self.max_degree > TABLE_LIMIT:
            raise UnsupportedOperationError("graph too large for a materialised neighbour table")
        if self.family == "explicit":
            table = np.full((self.vertex_count, self.max_degree), -1, dtype=np.int64)
            for v, adj in enumerate(self.adjacency):
                table[v, : len(adj)] = adj
            return table
        ids = np.arange(self.vertex_count, dtype=np.int64)
        choices = np.arange(self.degree, dtype=np.int64)
        return self.step(ids[:, None], choices[None, :])

    def step(self, pos, choice):
        """Neighbour number ``choice`` of each vertex in ``pos`` (broadcasting).

        ``choice`` must lie in ``[0, degree(pos))``.
        """
        pos = np.asarray(pos, dtype=np.int64)
        choice = np.asarray(choice, dtype=np.int64)
        if self.family == "complete":
            return (pos + 1 + choice) % self.n
        if self.family == "explicit":
            return self.neighbor_table[pos, choice]
        n = self.radix
        if n == 2:
            stride = self._strides[choice]
            bit = (pos // stride) % 2
            return pos + stride * (1 - 2 * bit)
        j = choice // 2
        stride = self._strides[j]
        coord = (pos // stride) % n
        up = (choice % 2) == 0
        delta = np.where(up, np.where(coord == n - 1, 1 - n, 1), np.where(coord == 0, n - 1, -1))
        return pos + stride * delta

    def lazy_step_distribution(self, v):
        """List of ``(vertex, probability)`` for one lazy step from ``v``."""
        v = self.check_vertex(v)
        nbrs = self.neighbors(v)
        p = 1.0 / (2 * len(nbrs))
        return [(v, 0.5)] + [(u, p) for u in nbrs]

    def l1_distance(self, u, v):
        if not self.is_torus_like:
            raise UnsupportedOperationError(f"L1 distance undefined for family {self.family!r}")
        u, v = self.check_vertex(u), self.check_vertex(v)
        return int(torus_distance(self.coordinates(u) - self.coordinates(v), self.radix).sum())

    def distance_from_origin(self, ids):
        """Vectorised L1 distance from vertex 0 (torus-like families)."""
        return torus_distance(self.coordinates(ids), self.radix).sum(axis=-1)


def torus_distance(delta, n):
    delta = np.abs(np.asarray(delta)) % n
    return np.minimum(delta, n - delta)


# -- constructors ----------------------------------------------------------


def torus(n, d):
    n = check_int(n, "n", min_value=2)
    d = check_int(d, "d", min_value=1)
    if n == 2:
        return GraphSpec("hypercube", n=2, d=d)
    return GraphSpec("torus", n=n, d=d)


def hypercube(d):
    return GraphSpec("hypercube", n=2, d=check_int(d, "d", min_value=1))


def cycle(n):
    return GraphSpec("cycle", n=check_int(n, "n", min_value=3), d=1)


def complete(n):
    return GraphSpec("complete", n=check_int(n, "n", min_value=2))


def explicit(adjacency, transitive=False):
    """Graph from adjacency lists; validated for symmetry and connectivity.

    ``transitive`` is a user assertion.  It is spot-checked by
    :func:`mixlab.exact.check_transitivity`, never trusted for free.
    """
    adj = tuple(tuple(sorted({int(u) for u in nbrs})) for nbrs in adjacency)
    size = len(adj)
    if size < 2:
        raise PreconditionError("explicit graph needs at least two vertices", field="adjacency")
    for v, nbrs in enumerate(adj):
        for u in nbrs:
            if not 0 <= u < size or u == v:
                raise PreconditionError(f"bad neighbour {u} of vertex {v}", field="adjacency")
            if v not in adj[u]:
                raise PreconditionError(f"edge {v}-{u} is not symmetric", field="adjacency")
    seen = {0}
    stack = [0]
    while stack:
        for u in adj[stack.pop()]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    if len(seen) != size:
        raise PreconditionError("explicit graph is not connected", field="adjacency")
    return GraphSpec("explicit", n=size, adjacency=adj, transitive=bool(transitive))


def read_adjacency(path):
    """Parse an adjacency file with lines of the form ``id: id id id``."""
    rows = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise PreconditionError(f"{path}:{lineno}: expected 'id: neighbours'", field="graph")
        try:
            rows[int(head)] = [int(tok) for tok in rest.split()]
        except ValueError as exc:
            raise PreconditionError(f"{path}:{lineno}: {exc}", field="graph") from None
    if sorted(rows) != list(range(len(rows))):
        raise PreconditionError(f"{path}: vertex ids must be 0..|G|-1", field="graph")
    return [rows[i] for i in range(len(rows))]


_GRAPH_RE = re.compile(r"^\s*(\w+)\s*:\s*(.*?)\s*$")


def parse_graph(text, *, base_dir=None):
    """Parse a CLI graph string such as ``"torus:n=5,d=3"`` or ``"explicit:@file"``."""
    if isinstance(text, GraphSpec):
        return text
    m = _GRAPH_RE.match(str(text))
    if not m:
        raise PreconditionError(f"malformed graph string {text!r}", field="graph")
    family, body = m.group(1).lower(), m.group(2)
    if family == "explicit":
        transitive = False
        if body.endswith(",transitive"):
            body, transitive = body[: -len(",transitive")], True
        if not body.startswith("@"):
            raise PreconditionError("explicit graphs need '@file'", field="graph")
        path = Path(body[1:])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return explicit(read_adjacency(path), transitive=transitive)
    params = {}
    for part in filter(None, (p.strip() for p in body.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise PreconditionError(f"malformed graph parameter {part!r}", field="graph")
        try:
            params[key.strip()] = int(value)
        except ValueError:
            raise PreconditionError(f"graph parameter {key!r} must be an integer", field="graph") from None
    builders = {"torus": (torus, {"n", "d"}), "hypercube": (hypercube, {"d"}),
                "cycle": (cycle, {"n"}), "complete": (complete, {"n"})}
    if family not in builders:
        raise PreconditionError(f"unknown graph family {family!r}", field="graph")
    builder, keys = builders[family]
    if set(params) != keys:
        raise PreconditionError(f"{family} needs parameters {sorted(keys)}, got {sorted(params)}", field="graph")
    return builder(**params)


# -- module-level operations -----------------------------------------------


def neighbors(g, v):
    return g.neighbors(v)


def lazy_step_distribution(g, v):
    return g.lazy_step_distribution(v)


def l1_distance(g, u, v):
    return g.l1_distance(u, v)
