"""Noisy circuit model: lattice geometry, layered gates, per-site noise rates,
and the spacetime interaction graph with its distances and boundaries.

A circuit acts on ``n`` qudits of local dimension ``h`` arranged on a
D-dimensional grid.  Each of the ``d`` layers is a set of disjoint
nearest-neighbor gates; after every gate layer a depolarizing channel with
rate ``p[site, layer]`` hits every site, and the final state is measured in
the computational basis.

All types in this module are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import CircuitFormatError

#: gate kinds whose unitary is generated from a position-keyed seed
SEEDED_KINDS = ("haar", "clifford")

#: named generators; "hadamard" is the h-dimensional Fourier gate (the two
#: coincide at h=2)
NAMED_KINDS = ("identity", "shift", "fourier", "hadamard", "cshift", "swap", "cz", "s")

UNITARY_ATOL = 1e-10


# ---------------------------------------------------------------------------
# geometry helpers


def site_coords(geometry: Sequence[int], site: int) -> tuple[int, ...]:
    """Grid coordinates of a flat (row-major) site index."""
    coords = []
    for extent in reversed(geometry):
        coords.append(site % extent)
        site //= extent
    return tuple(reversed(coords))


def coords_site(geometry: Sequence[int], coords: Sequence[int]) -> int:
    """Flat site index of grid coordinates."""
    site = 0
    for extent, c in zip(geometry, coords):
        if not 0 <= c < extent:
            raise ValueError(f"coordinate {c} out of range for extent {extent}")
        site = site * extent + c
    return site


def lattice_distance(
    geometry: Sequence[int], a: int, b: int, metric: str = "manhattan"
) -> int:
    """Distance between two sites on the grid (open boundaries)."""
    ca, cb = site_coords(geometry, a), site_coords(geometry, b)
    deltas = [abs(x - y) for x, y in zip(ca, cb)]
    if metric == "manhattan":
        return sum(deltas)
    if metric == "chebyshev":
        return max(deltas) if deltas else 0
    raise ValueError(f"unknown lattice metric {metric!r}")


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True)
class Gate:
    """A gate acting on an ordered tuple of sites.

    ``kind`` is a named generator, ``"unitary"`` (explicit matrix), or a
    seeded random kind (``"haar"``, ``"clifford"``).  Seeded kinds carry a
    seed key from which the unitary is reproducibly generated; the key is a
    tuple of ints so factories can derive it from (master seed, position).
    """

    sites: tuple[int, ...]
    kind: str
    matrix: np.ndarray | None = None
    seed: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        if len(set(self.sites)) != len(self.sites):
            raise CircuitFormatError(f"gate sites {self.sites} contain duplicates")
        if self.kind not in NAMED_KINDS + SEEDED_KINDS + ("unitary",):
            raise CircuitFormatError(f"unknown gate kind {self.kind!r}")
        if self.kind == "unitary":
            if self.matrix is None:
                raise CircuitFormatError("kind 'unitary' requires an explicit matrix")
            m = np.asarray(self.matrix, dtype=complex)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        if self.kind in SEEDED_KINDS:
            if self.seed is None:
                raise CircuitFormatError(
                    f"seeded gate kind {self.kind!r} requires a seed key"
                )
            object.__setattr__(self, "seed", tuple(int(s) for s in self.seed))

    @property
    def arity(self) -> int:
        return len(self.sites)


def _fourier_matrix(h: int) -> np.ndarray:
    omega = np.exp(2j * np.pi / h)
    j, k = np.meshgrid(np.arange(h), np.arange(h), indexing="ij")
    return omega ** (j * k) / np.sqrt(h)


def _shift_matrix(h: int) -> np.ndarray:
    return np.eye(h, dtype=complex)[:, np.arange(-1, h - 1)]


def named_gate_matrix(kind: str, h: int, arity: int) -> np.ndarray:
    """Unitary matrix of a named generator at local dimension ``h``."""
    if kind == "identity":
        return np.eye(h**arity, dtype=complex)
    if kind == "shift":
        return _shift_matrix(h)
    if kind in ("fourier", "hadamard"):
        return _fourier_matrix(h)
    if kind == "s":
        if h != 2:
            raise CircuitFormatError("named gate 's' is defined for h=2 only")
        return np.diag([1.0, 1.0j])
    if kind == "cshift":
        # |a,b> -> |a, b+a mod h>
        u = np.zeros((h * h, h * h), dtype=complex)
        for a in range(h):
            for b in range(h):
                u[a * h + (a + b) % h, a * h + b] = 1.0
        return u
    if kind == "swap":
        u = np.zeros((h * h, h * h), dtype=complex)
        for a in range(h):
            for b in range(h):
                u[b * h + a, a * h + b] = 1.0
        return u
    if kind == "cz":
        omega = np.exp(2j * np.pi / h)
        diag = [omega ** (a * b) for a in range(h) for b in range(h)]
        return np.diag(diag)
    raise CircuitFormatError(f"unknown named gate kind {kind!r}")


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def gate_matrix(gate: Gate, h: int) -> np.ndarray:
    """Materialize the unitary of ``gate`` at local dimension ``h``.

    Seeded kinds are deterministic functions of ``gate.seed``; explicit
    matrices are checked for unitarity to 1e-10.
    """
    dim = h**gate.arity
    if gate.kind == "unitary":
        u = np.asarray(gate.matrix, dtype=complex)
        if u.shape != (dim, dim):
            raise CircuitFormatError(
                f"explicit matrix has shape {u.shape}, expected {(dim, dim)}"
            )
        if not np.allclose(u @ u.conj().T, np.eye(dim), atol=UNITARY_ATOL):
            raise CircuitFormatError("explicit gate matrix is not unitary to 1e-10")
        return u
    if gate.kind == "haar":
        rng = np.random.default_rng(np.random.SeedSequence(list(gate.seed)))
        return haar_unitary(dim, rng)
    if gate.kind == "clifford":
        if h != 2 or gate.arity != 2:
            raise CircuitFormatError("random Clifford gates require h=2, two sites")
        from . import clifford as _clifford  # deferred: avoids an import cycle

        rng = np.random.default_rng(np.random.SeedSequence(list(gate.seed)))
        return _clifford.random_clifford_gate(rng).unitary()
    return named_gate_matrix(gate.kind, h, gate.arity)


# ---------------------------------------------------------------------------
# circuit spec


def _as_noise_array(
    noise: float | np.ndarray | Mapping | None, d: int, n: int
) -> np.ndarray:
    if noise is None:
        arr = np.zeros((d, n))
    elif isinstance(noise, Mapping):
        if "uniform" in noise:
            arr = np.full((d, n), float(noise["uniform"]))
        elif "table" in noise:
            arr = np.asarray(noise["table"], dtype=float)
        else:
            raise CircuitFormatError("noise mapping needs 'uniform' or 'table'")
    elif np.isscalar(noise):
        arr = np.full((d, n), float(noise))
    else:
        arr = np.asarray(noise, dtype=float)
    if arr.shape != (d, n):
        raise CircuitFormatError(
            f"noise table has shape {arr.shape}, expected {(d, n)} (layers x sites)"
        )
    if np.any(arr < 0) or np.any(arr > 1):
        raise CircuitFormatError("noise rates must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class CircuitSpec:
    """A layered noisy circuit on a D-dimensional grid.

    Attributes:
        h: local dimension (>= 2).
        geometry: grid extents; ``n = prod(geometry)``.
        layers: tuple of layers, each a tuple of disjoint-support gates.
        noise: (d, n) array of depolarizing rates; ``noise[j, i]`` acts on
            site ``i`` right after gate layer ``j``.
    """

    h: int
    geometry: tuple[int, ...]
    layers: tuple[tuple[Gate, ...], ...]
    noise: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "geometry", tuple(int(g) for g in self.geometry))
        if self.h < 2:
            raise CircuitFormatError(f"local dimension h={self.h} must be >= 2")
        if any(g < 1 for g in self.geometry) or not self.geometry:
            raise CircuitFormatError(f"bad geometry {self.geometry}")
        layers = tuple(tuple(layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        n = self.n
        for j, layer in enumerate(layers):
            used: dict[int, tuple[int, ...]] = {}
            for gate in layer:
                for s in gate.sites:
                    if not 0 <= s < n:
                        raise CircuitFormatError(
                            f"layer {j}: gate site {s} outside [0, {n})"
                        )
                    if s in used:
                        raise CircuitFormatError(
                            f"layer {j}: gates {used[s]} and {gate.sites} overlap "
                            f"on site {s}"
                        )
                    used[s] = gate.sites
                self._check_nearest_neighbor(j, gate)
        noise = _as_noise_array(self.noise, self.depth, n)
        noise.setflags(write=False)
        object.__setattr__(self, "noise", noise)

    def _check_nearest_neighbor(self, j: int, gate: Gate) -> None:
        # gate support must be connected under lattice adjacency
        if gate.arity == 1:
            return
        remaining = set(gate.sites[1:])
        frontier = [gate.sites[0]]
        while frontier and remaining:
            cur = frontier.pop()
            near = {
                s
                for s in remaining
                if lattice_distance(self.geometry, cur, s) == 1
            }
            remaining -= near
            frontier.extend(near)
        if remaining:
            raise CircuitFormatError(
                f"layer {j}: gate sites {gate.sites} are not nearest-neighbor "
                f"connected on the grid"
            )

    @property
    def n(self) -> int:
        return int(np.prod(self.geometry))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return len(self.geometry)

    @property
    def max_gate_size(self) -> int:
        return max((g.arity for layer in self.layers for g in layer), default=2)

    @property
    def diameter(self) -> int:
        """Largest Manhattan distance between two sites of the grid."""
        return sum(e - 1 for e in self.geometry)

    def coords(self, site: int) -> tuple[int, ...]:
        return site_coords(self.geometry, site)

    def site(self, coords: Sequence[int]) -> int:
        return coords_site(self.geometry, coords)


def ball(
    spec: CircuitSpec, center: int, radius: int, metric: str = "manhattan"
) -> frozenset[int]:
    """Sites within lattice distance ``radius`` of ``center`` (clipped to the
    grid).  The default metric is Manhattan; Chebyshev is available for
    experimentation."""
    if not 0 <= center < spec.n:
        raise ValueError(f"center {center} outside [0, {spec.n})")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius >= spec.diameter:
        return frozenset(range(spec.n))
    return frozenset(
        s
        for s in range(spec.n)
        if lattice_distance(spec.geometry, center, s, metric) <= radius
    )


# ---------------------------------------------------------------------------
# interaction graph

Vertex = tuple[int, int]  # (site, layer)


@dataclass(frozen=True)
class InteractionGraph:
    """Spacetime graph of noise locations.

    Vertices are pairs ``(site, layer)`` for every site and every noise layer;
    two vertices are adjacent iff distinct sites share a gate in the layer
    just before or just after their (equal) noise layers, or in the single
    gate layer between their adjacent noise layers.
    """

    n: int
    depth: int
    adjacency: Mapping[Vertex, tuple[Vertex, ...]]

    @property
    def vertices(self) -> list[Vertex]:
        return [(i, j) for j in range(self.depth) for i in range(self.n)]

    def edges(self) -> set[frozenset[Vertex]]:
        return {
            frozenset((v, w))
            for v, nbrs in self.adjacency.items()
            for w in nbrs
        }

    def degree(self, v: Vertex) -> int:
        return len(self.adjacency.get(v, ()))

    def max_degree(self) -> int:
        return max((len(nb) for nb in self.adjacency.values()), default=0)


def build_interaction_graph(spec: CircuitSpec) -> InteractionGraph:
    """Interaction graph of a circuit.

    Noise layer ``m`` sits right after gate layer ``m``, so a gate in gate
    layer ``m`` on distinct sites ``i, i'`` induces the edges
    ``(i,m)-(i',m)``, ``(i,m-1)-(i',m-1)``, ``(i,m-1)-(i',m)`` and
    ``(i',m-1)-(i,m)`` (the latter three only for ``m >= 1``).
    """
    adj: dict[Vertex, set[Vertex]] = {}

    def add(u: Vertex, v: Vertex) -> None:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)

    for m, layer in enumerate(spec.layers):
        for gate in layer:
            for i, i2 in combinations(gate.sites, 2):
                add((i, m), (i2, m))
                if m >= 1:
                    add((i, m - 1), (i2, m - 1))
                    add((i, m - 1), (i2, m))
                    add((i2, m - 1), (i, m))
    frozen = {v: tuple(sorted(nbrs)) for v, nbrs in adj.items()}
    return InteractionGraph(n=spec.n, depth=spec.depth, adjacency=frozen)


def graph_distance(
    g: InteractionGraph, a_sites: Iterable[int], c_sites: Iterable[int]
) -> float:
    """Shortest-path distance between the spacetime vertex columns of two
    site sets; ``math.inf`` if disconnected."""
    a_set, c_set = frozenset(a_sites), frozenset(c_sites)
    if not a_set or not c_set:
        raise ValueError("site sets must be nonempty")
    if a_set & c_set:
        raise ValueError("site sets must be disjoint")
    targets = {(i, j) for i in c_set for j in range(g.depth)}
    frontier = [(i, j) for i in a_set for j in range(g.depth)]
    if not targets or not frontier:
        return math.inf
    seen = set(frontier)
    dist = 0
    while frontier:
        if any(v in targets for v in frontier):
            return dist
        nxt = []
        for v in frontier:
            for w in g.adjacency.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
        dist += 1
    return math.inf


def boundary_size(g: InteractionGraph, l_sites: Iterable[int]) -> int:
    """Number of graph edges leaving the vertex column of ``l_sites``
    (0 for the empty set by convention)."""
    l_set = frozenset(l_sites)
    count = 0
    for v, nbrs in g.adjacency.items():
        if v[0] in l_set:
            count += sum(1 for w in nbrs if w[0] not in l_set)
    return count


# ---------------------------------------------------------------------------
# brickwork factory


def brickwork_pairs(
    geometry: Sequence[int], layer: int
) -> list[tuple[int, int]]:
    """Nearest-neighbor pairs of one brickwork layer.

    Gate orientation cycles through the grid axes (starting from the last,
    i.e. horizontal on a (rows, cols) grid).  In one dimension the brick
    offset alternates between layers; in higher dimensions each layer is a
    brick wall (adjacent lines staggered by one), with the global offset
    flipping every full orientation cycle.  Open boundaries: leftover sites
    idle.
    """
    ndim = len(geometry)
    axis = (ndim - 1) - (layer % ndim)
    cycle_offset = (layer // ndim) % 2
    pairs = []
    for site in range(int(np.prod(geometry))):
        coords = site_coords(geometry, site)
        stagger = sum(coords[ax] for ax in range(ndim) if ax != axis)
        if coords[axis] % 2 == (cycle_offset + stagger) % 2 and coords[axis] + 1 < geometry[axis]:
            partner = list(coords)
            partner[axis] += 1
            pairs.append((site, coords_site(geometry, partner)))
    return pairs


def brickwork_circuit(
    geometry: Sequence[int],
    h: int,
    depth: int,
    p: float,
    kind: str = "haar",
    seed: int = 0,
) -> CircuitSpec:
    """Random brickwork circuit with uniform depolarizing rate ``p``.

    Seeded gate kinds get position-keyed seeds ``(seed, layer, first_site)``
    so every gate is reproducible in isolation.
    """
    layers = []
    for j in range(depth):
        gates = []
        for a, b in brickwork_pairs(geometry, j):
            if kind in SEEDED_KINDS:
                gates.append(Gate(sites=(a, b), kind=kind, seed=(seed, j, a)))
            else:
                gates.append(Gate(sites=(a, b), kind=kind))
        layers.append(tuple(gates))
    return CircuitSpec(h=h, geometry=tuple(geometry), layers=tuple(layers), noise=p)


def reseed_circuit(spec: CircuitSpec, key: Sequence[int]) -> CircuitSpec:
    """Copy of ``spec`` with every seeded gate re-keyed to
    ``(*key, layer, first_site)``; used to draw independent circuit instances
    in Monte-Carlo averages over random gates."""
    layers = []
    for j, layer in enumerate(spec.layers):
        gates = []
        for g in layer:
            if g.kind in SEEDED_KINDS:
                g = Gate(sites=g.sites, kind=g.kind, seed=(*key, j, g.sites[0]))
            gates.append(g)
        layers.append(tuple(gates))
    return CircuitSpec(
        h=spec.h, geometry=spec.geometry, layers=tuple(layers), noise=spec.noise
    )


# ---------------------------------------------------------------------------
# circuit description files


def circuit_to_dict(spec: CircuitSpec) -> dict:
    """Plain-data form of a circuit, suitable for YAML round-tripping."""
    layers = []
    for layer in spec.layers:
        entry = []
        for g in layer:
            gd: dict = {"sites": list(g.sites), "kind": g.kind}
            if g.seed is not None:
                gd["seed"] = list(g.seed)
            if g.matrix is not None:
                gd["matrix"] = [
                    [[float(x.real), float(x.imag)] for x in row]
                    for row in np.asarray(g.matrix)
                ]
            entry.append(gd)
        layers.append(entry)
    noise = np.asarray(spec.noise)
    if noise.size and np.all(noise == noise.flat[0]):
        noise_entry: dict = {"uniform": float(noise.flat[0]) if noise.size else 0.0}
    else:
        noise_entry = {"table": noise.tolist()}
    return {
        "n": spec.n,
        "h": spec.h,
        "geometry": list(spec.geometry),
        "layers": layers,
        "noise": noise_entry,
    }


def circuit_from_dict(data: Mapping) -> CircuitSpec:
    """Build a circuit from plain data (parsed YAML).

    Seeded gates without an explicit ``seed`` get one derived from the
    file-level ``seed`` (default 0) and their position.
    """
    if not isinstance(data, Mapping):
        raise CircuitFormatError("circuit description must be a mapping")
    try:
        geometry = tuple(int(x) for x in data["geometry"])
        h = int(data["h"])
    except KeyError as exc:
        raise CircuitFormatError(f"circuit description missing field {exc}") from exc
    base_seed = int(data.get("seed", 0))
    if "n" in data and int(data["n"]) != int(np.prod(geometry)):
        raise CircuitFormatError(
            f"n={data['n']} inconsistent with geometry {list(geometry)}"
        )
    layers = []
    for j, layer in enumerate(data.get("layers", [])):
        gates = []
        for gd in layer:
            kind = str(gd.get("kind", "unitary"))
            sites = tuple(int(s) for s in gd["sites"])
            seed = None
            if kind in SEEDED_KINDS:
                if "seed" in gd:
                    raw = gd["seed"]
                    seed = tuple(raw) if isinstance(raw, (list, tuple)) else (int(raw),)
                else:
                    seed = (base_seed, j, sites[0])
            matrix = None
            if "matrix" in gd:
                rows = [
                    [complex(re, im) for re, im in row] for row in gd["matrix"]
                ]
                matrix = np.array(rows, dtype=complex)
                kind = "unitary"
            gates.append(Gate(sites=sites, kind=kind, matrix=matrix, seed=seed))
        layers.append(tuple(gates))
    d = len(layers)
    noise = data.get("noise", {"uniform": 0.0})
    n = int(np.prod(geometry))
    return CircuitSpec(
        h=h,
        geometry=geometry,
        layers=tuple(layers),
        noise=_as_noise_array(noise, d, n),
    )


def load_circuit(path) -> CircuitSpec:
    """Parse a circuit description file (YAML)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise CircuitFormatError(f"cannot parse circuit file {path}: {exc}")
    return circuit_from_dict(data)


def save_circuit(spec: CircuitSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(circuit_to_dict(spec), fh, sort_keys=True)


def circuit_content_hash(path) -> str:
    """Content hash of a circuit file, embedded in result headers."""
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
