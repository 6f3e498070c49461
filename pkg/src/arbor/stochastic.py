"""Simple random walk with absorption at the root vertex and at leaf ends.

Harmonic measure is computed exactly by a two-pass elimination of the
expected-visits system (reversibility turns column Green values into row
ones), and independently by Monte Carlo with a counter-based generator
keyed per walk, so serial and parallel runs agree bit for bit.  The
p = 2 capacity, the exact escape probability, and the simulation give
three separate routes to the same number.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .tree_core import ParameterError, Tree, BoundarySet
from .capacity import capacity_recursive

__all__ = [
    "HarmonicMeasure",
    "WalkEstimate",
    "harmonic_measure_exact",
    "simulate_escape",
    "capacity_escape_identity",
    "resolve_threads",
]

_BLOCK = 64          # uniform draws fetched per walk at a time
_CHUNK = 4096        # walks advanced in lockstep


@dataclass(frozen=True)
class HarmonicMeasure:
    """Absorption distribution of the walk started at one vertex."""

    at_vertex: int
    boundary_mass: np.ndarray   # aligned with tree.leaf_edges
    root_mass: float

    @property
    def boundary_total(self) -> float:
        return float(self.boundary_mass.sum())


@dataclass(frozen=True)
class WalkEstimate:
    """Monte Carlo escape probability with its Bernoulli standard error."""

    value: float
    std_error: float
    n_walks: int
    seed: int


def _check_vertex(tree: Tree, x: int) -> int:
    x = int(x)
    if x < 0 or x >= tree.vertex_count:
        raise ParameterError(f"vertex {x} outside 0..{tree.vertex_count - 1}")
    return x


def harmonic_measure_exact(tree: Tree, x: int) -> HarmonicMeasure:
    """Absorption probabilities from vertex x, by two tree passes.

    Solves v(y) = expected visits to x from y over the interior vertices
    (upward elimination, downward substitution); by reversibility the
    absorption probability at an absorbing state is the sum of v over its
    interior neighbors divided by the degree of x.  Exact up to the
    elimination roundoff, with no iteration.
    """
    x = _check_vertex(tree, x)
    leaf_pos = tree.leaf_edges
    masses = np.zeros(leaf_pos.size)
    if x == tree.root_vertex:
        return HarmonicMeasure(x, masses, 1.0)
    x_edge = x - 1
    if tree.is_leaf[x_edge]:
        masses[np.searchsorted(leaf_pos, x_edge)] = 1.0
        return HarmonicMeasure(x, masses, 0.0)

    deg_e = 1.0 + tree.n_sons          # degree of each edge's end vertex
    A = np.zeros(tree.edge_count)
    D = np.zeros(tree.edge_count)
    accA = np.zeros(tree.edge_count)
    accD = np.zeros(tree.edge_count)
    for ids in reversed(tree.edges_by_level):
        inner = ids[~tree.is_leaf[ids]]
        if inner.size:
            A[inner] = 1.0 / (deg_e[inner] - accA[inner])
            D[inner] = A[inner] * (accD[inner]
                                   + deg_e[inner] * (inner == x_edge))
            body = inner[inner != tree.root_edge]
            np.add.at(accA, tree.parent[body], A[body])
            np.add.at(accD, tree.parent[body], D[body])

    v = np.zeros(tree.edge_count)
    v[tree.root_edge] = D[tree.root_edge]
    for ids in tree.edges_by_level[1:]:
        inner = ids[~tree.is_leaf[ids]]
        if inner.size:
            v[inner] = A[inner] * v[tree.parent[inner]] + D[inner]

    deg_x = deg_e[x_edge]
    masses = v[tree.parent[leaf_pos]] / deg_x
    root_mass = float(v[tree.root_edge] / deg_x)
    return HarmonicMeasure(x, masses, root_mass)


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument wins; otherwise the ARBOR_THREADS variable; else 1."""
    if threads is None:
        threads = int(os.environ.get("ARBOR_THREADS", "1") or "1")
    if threads < 1:
        raise ParameterError("thread count must be >= 1")
    return threads


def _uniform_block(seed: int, walk_index: int, block_index: int) -> np.ndarray:
    bg = np.random.Philox(key=np.array([seed, walk_index], dtype=np.uint64))
    if block_index:
        bg.advance(block_index * _BLOCK)
    return np.random.Generator(bg).random(_BLOCK)


def _walk_chunk(nbr: np.ndarray, deg: np.ndarray, absorbing: np.ndarray,
                escaped_state: np.ndarray, x: int, seed: int,
                lo: int, hi: int) -> int:
    """Advance walks lo..hi-1 to absorption; return the escape count.

    Walk i consumes draws from the stream keyed (seed, i) in step order,
    in blocks of _BLOCK, so the outcome never depends on chunking or on
    the thread that ran it.
    """
    n = hi - lo
    pos = np.full(n, x, dtype=np.int64)
    if absorbing[x]:
        return int(np.count_nonzero(escaped_state[pos]))
    alive = np.arange(n)
    block_index = 0
    while alive.size:
        U = np.empty((alive.size, _BLOCK))
        for r, w in enumerate(alive):
            U[r] = _uniform_block(seed, lo + int(w), block_index)
        lpos = pos[alive].copy()
        live = np.ones(alive.size, dtype=bool)
        for t in range(_BLOCK):
            w = np.flatnonzero(live)
            if w.size == 0:
                break
            v = lpos[w]
            d = deg[v]
            idx = np.minimum((U[w, t] * d).astype(np.int64), d - 1)
            nv = nbr[v, idx]
            lpos[w] = nv
            live[w] = ~absorbing[nv]
        pos[alive] = lpos
        alive = alive[live]
        block_index += 1
    return int(np.count_nonzero(escaped_state[pos]))


def _neighbor_table(tree: Tree) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    V = tree.vertex_count
    n_sons = tree.n_sons
    width = max(2, int(n_sons.max()) + 1)
    nbr = np.zeros((V, width), dtype=np.int64)
    deg = np.ones(V, dtype=np.int64)
    ends = np.arange(1, V)
    nbr[ends, 0] = tree.begin[ends - 1]        # parent end vertex (o for ω)
    deg[ends] = 1 + n_sons
    body = np.arange(1, tree.edge_count)
    slot = body - tree.child_start[tree.parent[body]] + 1
    nbr[tree.parent[body] + 1, slot] = body + 1
    if tree.edge_count >= 1:
        nbr[tree.root_vertex, 0] = 1           # unused: o is absorbing
    absorbing = np.zeros(V, dtype=bool)
    absorbing[tree.root_vertex] = True
    absorbing[tree.leaf_edges + 1] = True
    escaped_state = np.zeros(V, dtype=bool)
    escaped_state[tree.leaf_edges + 1] = True
    return nbr, deg, absorbing, escaped_state


def simulate_escape(tree: Tree, x: int, n_walks: int, seed: int,
                    threads: int | None = None) -> WalkEstimate:
    """Monte Carlo escape probability from x, reproducible by seed.

    Uniform steps to every graph neighbor; absorption at the root vertex
    and at leaf ends.  Each walk owns the counter-based stream keyed
    (seed, walk index), so estimates are bit-identical across chunk
    sizes and thread counts.
    """
    x = _check_vertex(tree, x)
    if n_walks < 1:
        raise ParameterError("n_walks must be >= 1")
    if seed < 0 or seed > np.iinfo(np.uint64).max:
        raise ParameterError("seed must fit in an unsigned 64-bit integer")
    threads = resolve_threads(threads)
    nbr, deg, absorbing, escaped_state = _neighbor_table(tree)
    spans = [(lo, min(lo + _CHUNK, n_walks))
             for lo in range(0, n_walks, _CHUNK)]
    if threads == 1 or len(spans) == 1:
        counts = [_walk_chunk(nbr, deg, absorbing, escaped_state,
                              x, seed, lo, hi) for lo, hi in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(
                lambda s: _walk_chunk(nbr, deg, absorbing, escaped_state,
                                      x, seed, s[0], s[1]), spans))
    escaped = sum(counts)
    value = escaped / n_walks
    std_error = float(np.sqrt(value * (1.0 - value) / n_walks))
    return WalkEstimate(value=value, std_error=std_error,
                        n_walks=n_walks, seed=seed)


def capacity_escape_identity(tree: Tree, n_walks: int, seed: int,
                             threads: int | None = None) -> tuple[float, float, float]:
    """(2-capacity of the full boundary, exact escape, Monte Carlo estimate).

    The first two agree to linear-solve accuracy; the third is subject to
    Bernoulli noise with standard error sqrt(v(1-v)/n_walks).
    """
    c2 = capacity_recursive(tree, BoundarySet.full(tree), 2.0).capacity
    start = tree.root_edge + 1          # end vertex of the root edge
    exact = harmonic_measure_exact(tree, start).boundary_total
    mc = simulate_escape(tree, start, n_walks, seed, threads).value
    return c2, exact, mc
