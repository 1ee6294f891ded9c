"""Candidate retrieval: exact flat search and a random-projection forest.

Both index kinds store float32 vectors (what caches hold) and do similarity
math in float64. Both count every query-vs-reference similarity they compute,
so evaluation can report comparison counts instead of guessing at them.
Neighbor lists are ordered by similarity descending, then ref id ascending;
that tie rule is relied on everywhere downstream.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _binio
from .counters import OpCounter
from .embedding import EmbeddingBatch
from .errors import CorruptCache, DimensionMismatch, EmptyBatch

FLAT_MAGIC = b"ERIX1"
FOREST_MAGIC = b"ERRF1"

_NO_CHILD = 0xFFFFFFFF

_GATHER_BLOCK = 128


@dataclass
class CandidateSet:
    """Retrieval output for one query: (ref_id, cosine) pairs, best first."""

    query_id: str
    neighbors: list[tuple[str, float]]

    def ids(self) -> list[str]:
        return [ref_id for ref_id, _ in self.neighbors]


def _top_rows(sims: np.ndarray, id_keys: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k best rows by (similarity desc, id asc), exactly."""
    m = sims.shape[0]
    if k >= m:
        return np.lexsort((id_keys, -sims))
    kth = np.partition(sims, m - k)[m - k]
    above = np.flatnonzero(sims > kth)
    at = np.flatnonzero(sims == kth)
    need = k - above.size
    ties = at[np.argsort(id_keys[at], kind="stable")][:need]
    chosen = np.concatenate([above, ties])
    return chosen[np.lexsort((id_keys[chosen], -sims[chosen]))]


def _as_query_vector(vector: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(vector, dtype=np.float64)
    if q.shape != (dim,):
        raise DimensionMismatch(f"query shape {q.shape}, index dim {dim}")
    return q


@dataclass
class FlatIndex:
    """Exact search over every stored vector."""

    ids: list[str]
    vectors: np.ndarray
    provider_tag: str
    comparisons: OpCounter = field(default_factory=OpCounter)

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self._matrix = self.vectors.astype(np.float64)
        self._id_keys = np.asarray(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def build_flat(batch: EmbeddingBatch) -> FlatIndex:
    if len(batch) == 0:
        raise EmptyBatch("cannot build an index from zero vectors")
    return FlatIndex(
        ids=list(batch.record_ids),
        vectors=batch.vectors.copy(),
        provider_tag=batch.provider_tag,
    )


def query_topk(
    index: FlatIndex, vector: np.ndarray, k: int, query_id: str = ""
) -> CandidateSet:
    """Exact top-k neighbors; k beyond the index size returns everything."""
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    q = _as_query_vector(vector, index.dim)
    sims = index._matrix @ q
    index.comparisons.add(len(index))
    rows = _top_rows(sims, index._id_keys, min(k, len(index)))
    return CandidateSet(
        query_id=query_id,
        neighbors=[(index.ids[r], float(sims[r])) for r in rows],
    )


@dataclass
class _Node:
    direction: np.ndarray | None  # float32, None on leaves
    offset: float
    left: int
    right: int
    leaf_rows: np.ndarray | None  # int row indices, None on interior nodes

    @property
    def is_leaf(self) -> bool:
        return self.leaf_rows is not None


@dataclass
class _Tree:
    nodes: list[_Node]

    def route(self, q: np.ndarray) -> np.ndarray:
        node = self.nodes[0]
        while not node.is_leaf:
            proj = float(q @ node.direction.astype(np.float64))
            node = self.nodes[node.left if proj <= node.offset else node.right]
        return node.leaf_rows


@dataclass
class RPForestIndex:
    """Forest of random-hyperplane trees; approximate but budget-bounded.

    Tree t is seeded by (seed, t), so the first trees of a larger forest are
    identical to a smaller one. Candidate pools therefore only grow with
    n_trees, which keeps recall non-decreasing as trees are added.
    """

    ids: list[str]
    vectors: np.ndarray
    provider_tag: str
    n_trees: int
    leaf_size: int
    seed: int
    trees: list[_Tree]
    comparisons: OpCounter = field(default_factory=OpCounter)

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self._matrix = self.vectors.astype(np.float64)
        self._id_keys = np.asarray(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def default_budget(self, k: int) -> int:
        return max(10 * k, self.n_trees * self.leaf_size)


def _grow_tree(
    matrix: np.ndarray, rng: np.random.Generator, leaf_size: int, max_depth: int
) -> _Tree:
    dim = matrix.shape[1]
    nodes: list[_Node] = []

    def leaf(rows: np.ndarray) -> _Node:
        return _Node(direction=None, offset=0.0, left=_NO_CHILD, right=_NO_CHILD, leaf_rows=rows)

    def grow(rows: np.ndarray, depth: int) -> int:
        idx = len(nodes)
        nodes.append(leaf(rows))
        if rows.size <= leaf_size or depth >= max_depth:
            return idx
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            return idx
        # Quantize to f32 before projecting so the stored tree routes queries
        # exactly the way rows were assigned during the build.
        direction32 = (direction / norm).astype(np.float32)
        proj = matrix[rows] @ direction32.astype(np.float64)
        offset = float(np.float32(np.median(proj)))
        mask = proj <= offset
        left_rows, right_rows = rows[mask], rows[~mask]
        if left_rows.size == 0 or right_rows.size == 0:
            return idx
        nodes[idx] = _Node(
            direction=direction32, offset=offset, left=_NO_CHILD, right=_NO_CHILD,
            leaf_rows=None,
        )
        nodes[idx].left = grow(left_rows, depth + 1)
        nodes[idx].right = grow(right_rows, depth + 1)
        return idx

    grow(np.arange(matrix.shape[0]), 0)
    return _Tree(nodes=nodes)


def build_rpforest(
    batch: EmbeddingBatch, n_trees: int = 8, leaf_size: int = 32, seed: int = 42
) -> RPForestIndex:
    if len(batch) == 0:
        raise EmptyBatch("cannot build an index from zero vectors")
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1 (got {n_trees})")
    if leaf_size < 2:
        raise ValueError(f"leaf_size must be >= 2 (got {leaf_size})")
    if seed < 0:
        raise ValueError(f"seed must be non-negative (got {seed})")
    index = RPForestIndex(
        ids=list(batch.record_ids),
        vectors=batch.vectors.copy(),
        provider_tag=batch.provider_tag,
        n_trees=n_trees,
        leaf_size=leaf_size,
        seed=seed,
        trees=[],
    )
    m = len(batch)
    max_depth = math.ceil(math.log2(max(1.0, m / leaf_size))) + 8
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        index.trees.append(_grow_tree(index._matrix, rng, leaf_size, max_depth))
    return index


def query_rpforest(
    index: RPForestIndex,
    vector: np.ndarray,
    k: int,
    budget: int | None = None,
    query_id: str = "",
) -> CandidateSet:
    """Approximate top-k: pool one leaf per tree (capped at budget), score exactly."""
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    if budget is None:
        budget = index.default_budget(k)
    if budget < k:
        raise ValueError(f"budget must be >= k ({k}) (got {budget})")
    q = _as_query_vector(vector, index.dim)
    pool: list[int] = []
    seen: set[int] = set()
    for tree in index.trees:
        for row in tree.route(q):
            row = int(row)
            if row not in seen:
                seen.add(row)
                pool.append(row)
                if len(pool) == budget:
                    break
        if len(pool) == budget:
            break
    rows = np.asarray(pool, dtype=np.intp)
    sims = index._matrix[rows] @ q
    index.comparisons.add(rows.size)
    pick = _top_rows(sims, index._id_keys[rows], min(k, rows.size))
    return CandidateSet(
        query_id=query_id,
        neighbors=[(index.ids[rows[r]], float(sims[r])) for r in pick],
    )


def batch_gather(
    index: FlatIndex | RPForestIndex,
    queries: EmbeddingBatch,
    k: int,
    threads: int = 1,
    budget: int | None = None,
) -> list[CandidateSet]:
    """Retrieve candidates for every query in the batch, in batch order.

    Results are identical for any thread count; threads only split the work.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    if threads < 1:
        raise ValueError(f"threads must be >= 1 (got {threads})")
    if queries.dim != index.dim:
        raise DimensionMismatch(
            f"query dim {queries.dim} does not match index dim {index.dim}"
        )
    n = len(queries)
    if n == 0:
        return []
    qmatrix = queries.vectors.astype(np.float64)

    if isinstance(index, FlatIndex):
        def run_block(start: int) -> list[CandidateSet]:
            stop = min(start + _GATHER_BLOCK, n)
            sims_block = qmatrix[start:stop] @ index._matrix.T
            index.comparisons.add((stop - start) * len(index))
            out = []
            for i in range(stop - start):
                sims = sims_block[i]
                rows = _top_rows(sims, index._id_keys, min(k, len(index)))
                out.append(
                    CandidateSet(
                        query_id=queries.record_ids[start + i],
                        neighbors=[(index.ids[r], float(sims[r])) for r in rows],
                    )
                )
            return out

        starts = range(0, n, _GATHER_BLOCK)
        if threads == 1:
            blocks = [run_block(s) for s in starts]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                blocks = list(pool.map(run_block, starts))
        return [cs for block in blocks for cs in block]

    def run_one(i: int) -> CandidateSet:
        return query_rpforest(
            index, qmatrix[i], k, budget=budget, query_id=queries.record_ids[i]
        )

    if threads == 1:
        return [run_one(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_one, range(n)))


def save_index(index: FlatIndex | RPForestIndex, path) -> None:
    """Snapshot an index; loading gives identical query results."""
    parts = [
        struct.pack("<I", index.dim),
        struct.pack("<Q", len(index)),
        _binio.pack_u16_str(index.provider_tag),
    ]
    vectors = np.ascontiguousarray(index.vectors, dtype="<f4")
    for i, record_id in enumerate(index.ids):
        parts.append(_binio.pack_u16_str(record_id))
        parts.append(vectors[i].tobytes())
    if isinstance(index, FlatIndex):
        magic = FLAT_MAGIC
    else:
        magic = FOREST_MAGIC
        parts.append(
            struct.pack("<IIQ", index.n_trees, index.leaf_size, index.seed)
        )
        zero_direction = np.zeros(index.dim, dtype="<f4").tobytes()
        for tree in index.trees:
            parts.append(struct.pack("<I", len(tree.nodes)))
            for node in tree.nodes:
                if node.is_leaf:
                    parts.append(zero_direction)
                    parts.append(struct.pack("<fII", 0.0, _NO_CHILD, _NO_CHILD))
                else:
                    parts.append(node.direction.astype("<f4").tobytes())
                    parts.append(struct.pack("<fII", node.offset, node.left, node.right))
            for node in tree.nodes:
                if node.is_leaf:
                    parts.append(struct.pack("<H", node.leaf_rows.size))
                    for row in node.leaf_rows:
                        parts.append(_binio.pack_u16_str(index.ids[int(row)]))
    with open(path, "wb") as fh:
        fh.write(_binio.seal_frame(magic, b"".join(parts)))


def _read_header(reader: _binio.PayloadReader) -> tuple[int, int, str, list[str], np.ndarray]:
    dim = reader.u32()
    count = reader.u64()
    tag = reader.string()
    ids: list[str] = []
    vectors = np.zeros((count, dim), dtype=np.float32)
    for i in range(count):
        ids.append(reader.string())
        vectors[i] = reader.f32_array(dim)
    return dim, count, tag, ids, vectors


def load_index(path) -> FlatIndex | RPForestIndex:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) >= 4 and data[:4] == FOREST_MAGIC[:4]:
        magic = FOREST_MAGIC
    elif len(data) >= 4 and data[:4] == FLAT_MAGIC[:4]:
        magic = FLAT_MAGIC
    else:
        raise CorruptCache(f"{path}: bad magic {data[:5]!r}")
    payload = _binio.open_frame(data, magic, str(path))
    reader = _binio.PayloadReader(payload, str(path))
    dim, count, tag, ids, vectors = _read_header(reader)

    if magic == FLAT_MAGIC:
        reader.expect_end()
        return FlatIndex(ids=ids, vectors=vectors, provider_tag=tag)

    n_trees = reader.u32()
    leaf_size = reader.u32()
    seed = reader.u64()
    row_of = {record_id: i for i, record_id in enumerate(ids)}
    trees: list[_Tree] = []
    for _ in range(n_trees):
        node_count = reader.u32()
        nodes: list[_Node] = []
        for _ in range(node_count):
            direction = reader.f32_array(dim)
            offset = reader.f32()
            left = reader.u32()
            right = reader.u32()
            if left == _NO_CHILD and right == _NO_CHILD:
                nodes.append(_Node(None, 0.0, _NO_CHILD, _NO_CHILD, None))
            else:
                if left >= node_count or right >= node_count:
                    raise CorruptCache(f"{path}: child index out of range")
                nodes.append(_Node(direction, float(offset), left, right, None))
        for node in nodes:
            if node.left == _NO_CHILD:
                rows = []
                for _ in range(reader.u16()):
                    leaf_id = reader.string()
                    if leaf_id not in row_of:
                        raise CorruptCache(f"{path}: leaf id {leaf_id!r} not in index")
                    rows.append(row_of[leaf_id])
                node.leaf_rows = np.asarray(rows, dtype=np.intp)
        trees.append(_Tree(nodes=nodes))
    reader.expect_end()
    return RPForestIndex(
        ids=ids,
        vectors=vectors,
        provider_tag=tag,
        n_trees=n_trees,
        leaf_size=leaf_size,
        seed=seed,
        trees=trees,
    )
