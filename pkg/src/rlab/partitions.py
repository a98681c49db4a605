"""Product partitions: code hierarchy and bipartite modularity maximization.

BRIM alternates optimal label reassignment between the actor side and the
product side of the bipartite graph induced by a binary specialization
matrix, maximizing

    Q = (1/m) sum_{c,p} (M[c,p] - d_c u_p / m) [g_c == g_p]

over joint block assignments.  Running it a second time inside each block
refines the partition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .core_data import BinaryMatrix, ProductHierarchy, _open_text
from .errors import DegenerateInputError, SchemaError, ValidationError


class PartitionMethod(Enum):
    SECTION = "section"
    CHAPTER = "chapter"
    BRIM = "brim"
    BRIM2 = "brim2"
    NONE = "none"
    EXTERNAL = "external"


class HierarchyLevel(Enum):
    SECTION = "section"
    CHAPTER = "chapter"


@dataclass(frozen=True)
class Partition:
    """Product -> block assignment with contiguous block ids from 0."""

    products: tuple[str, ...]
    blocks: np.ndarray
    method: PartitionMethod
    modularity: float | None = None
    actor_blocks: Mapping[str, int] | None = None

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=np.int32)
        if len(b) != len(self.products):
            raise ValidationError("one block id per product required")
        if len(b):
            present = np.unique(b)
            if present[0] != 0 or present[-1] != len(present) - 1:
                raise ValidationError("block ids must be contiguous from 0")
        if self.method is PartitionMethod.NONE and self.n_blocks > 1:
            raise ValidationError("method 'none' implies a single block")
        object.__setattr__(self, "blocks", b)

    @property
    def n_blocks(self) -> int:
        return int(self.blocks.max()) + 1 if len(self.blocks) else 0

    def block_of(self) -> dict[str, int]:
        return {p: int(b) for p, b in zip(self.products, self.blocks)}

    def members(self, block: int) -> tuple[str, ...]:
        return tuple(p for p, b in zip(self.products, self.blocks) if b == block)

    @classmethod
    def single_block(cls, products: Sequence[str]) -> "Partition":
        return cls(tuple(products), np.zeros(len(products), dtype=np.int32),
                   PartitionMethod.NONE)

    def to_csv(self, dest) -> None:
        close, out = _open_text(dest, "w")
        try:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["product", "block"])
            for p, b in zip(self.products, self.blocks):
                w.writerow([p, int(b)])
        finally:
            if close:
                out.close()

    @classmethod
    def from_csv(cls, source) -> "Partition":
        close, inp = _open_text(source, "r")
        try:
            r = csv.reader(inp)
            header = next(r, None)
            if header is None or [h.strip() for h in header[:2]] != ["product", "block"]:
                raise SchemaError("partition file must start with 'product,block'")
            products, raw = [], []
            for line in r:
                if not line:
                    continue
                products.append(line[0])
                raw.append(int(line[1]))
        finally:
            if close:
                inp.close()
        return cls(tuple(products), _relabel(np.array(raw, dtype=np.int64)),
                   PartitionMethod.EXTERNAL)


@dataclass(frozen=True)
class BipartiteGraph:
    """Unweighted bipartite graph induced by the 1-entries of M."""

    actors: tuple[str, ...]
    products: tuple[str, ...]
    adjacency: np.ndarray
    n_edges: int = field(init=False)
    actor_degree: np.ndarray = field(init=False)
    product_degree: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.float64)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "n_edges", int(a.sum()))
        object.__setattr__(self, "actor_degree", a.sum(axis=1))
        object.__setattr__(self, "product_degree", a.sum(axis=0))

    @classmethod
    def from_binary(cls, M: BinaryMatrix) -> "BipartiteGraph":
        return cls(M.row_labels, M.col_labels, M.values)


def _relabel(raw: np.ndarray) -> np.ndarray:
    """Relabel block ids contiguously from 0 by order of first appearance."""
    mapping: dict[int, int] = {}
    out = np.empty(len(raw), dtype=np.int32)
    for i, b in enumerate(raw):
        out[i] = mapping.setdefault(int(b), len(mapping))
    return out


def hs_partition(
    hierarchy: ProductHierarchy,
    level: HierarchyLevel,
    products: Sequence[str],
) -> Partition:
    """Partition by HS section (<=21 blocks) or chapter (<=96 blocks)."""
    if level is HierarchyLevel.CHAPTER:
        raw = np.array([int(hierarchy.chapter(p)) for p in products])
        method = PartitionMethod.CHAPTER
    else:
        raw = np.array([hierarchy.section(p) for p in products])
        method = PartitionMethod.SECTION
    return Partition(tuple(products), _relabel(raw), method)


def bipartite_modularity(
    M: BinaryMatrix,
    actor_blocks: np.ndarray,
    product_blocks: np.ndarray,
) -> float:
    """Direct evaluation of Q for a joint actor/product assignment."""
    m = M.values
    total = m.sum()
    if total == 0:
        raise DegenerateInputError("modularity of an edgeless graph is undefined")
    d = m.sum(axis=1)
    u = m.sum(axis=0)
    same = actor_blocks[:, None] == product_blocks[None, :]
    null = np.outer(d, u) / total
    return float(((m - null) * same).sum() / total)


def _brim_single(
    m: np.ndarray,
    k_max: int,
    rng: np.random.Generator,
    max_sweeps: int = 200,
):
    """One BRIM restart; returns (actor labels, product labels, Q, Q history)."""
    n_actors, n_products = m.shape
    total = m.sum()
    d = m.sum(axis=1)
    u = m.sum(axis=0)
    gp = rng.integers(0, k_max, size=n_products)
    history = []
    q_prev = -np.inf
    ga = np.zeros(n_actors, dtype=np.int64)
    for _ in range(max_sweeps):
        # optimal actor labels given product labels
        Rp = np.zeros((n_products, k_max))
        Rp[np.arange(n_products), gp] = 1.0
        score_a = m @ Rp - np.outer(d, u @ Rp) / total
        ga = np.argmax(score_a, axis=1)
        # optimal product labels given actor labels
        Ra = np.zeros((n_actors, k_max))
        Ra[np.arange(n_actors), ga] = 1.0
        score_p = m.T @ Ra - np.outer(u, d @ Ra) / total
        gp = np.argmax(score_p, axis=1)
        q = float(score_p[np.arange(n_products), gp].sum() / total)
        history.append(q)
        if q <= q_prev + 1e-12:
            break
        q_prev = q
    return ga, gp, history[-1], history


def brim(
    M: BinaryMatrix,
    k_max: int = 50,
    restarts: int = 10,
    seed: int = 0,
) -> Partition:
    """Bipartite modularity maximization; best of `restarts` random starts.

    Deterministic given (seed, restarts, k_max): restart r draws its labels
    from an independent stream, and ties in Q break toward the lowest
    restart index.
    """
    m = M.values
    if m.sum() == 0:
        raise DegenerateInputError("BRIM requires at least one edge")
    k_max = max(1, min(k_max, len(M.col_labels)))
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        ga, gp, q, _ = _brim_single(m, k_max, rng)
        if best is None or q > best[2]:
            best = (ga, gp, q)
    ga, gp, q = best
    joint = _relabel(np.concatenate([gp, ga]))  # products first so their ids lead
    gp_new = joint[:len(gp)]
    ga_new = joint[len(gp):]
    return Partition(
        M.col_labels, gp_new, PartitionMethod.BRIM, modularity=q,
        actor_blocks={a: int(b) for a, b in zip(M.row_labels, ga_new)},
    )


def brim_squared(
    M: BinaryMatrix,
    k_max: int = 50,
    restarts: int = 10,
    seed: int = 0,
) -> Partition:
    """BRIM, then BRIM again inside each block; blocks = union of sub-blocks."""
    top = brim(M, k_max=k_max, restarts=restarts, seed=seed)
    col_ix = M.col_index()
    final = np.empty(len(M.col_labels), dtype=np.int64)
    next_id = 0
    actor_final: dict[str, int] = {}
    top_actor = top.actor_blocks or {}
    for b in range(top.n_blocks):
        prods = top.members(b)
        cols = np.array([col_ix[p] for p in prods], dtype=np.intp)
        sub = M.values[:, cols]
        active = sub.sum(axis=1) > 0
        sub = sub[active]
        if len(prods) == 1 or sub.sum() == 0:
            sub_blocks = {p: 0 for p in prods}
            n_sub = 1
            sub_actor: dict[str, int] = {}
        else:
            sub_M = BinaryMatrix(
                tuple(a for a, keep in zip(M.row_labels, active) if keep),
                prods, sub)
            sub_part = brim(sub_M, k_max=k_max, restarts=restarts,
                            seed=_derive_seed(seed, b))
            sub_blocks = sub_part.block_of()
            n_sub = sub_part.n_blocks
            sub_actor = dict(sub_part.actor_blocks or {})
        for p in prods:
            final[col_ix[p]] = next_id + sub_blocks[p]
        for a in M.row_labels:
            if top_actor.get(a) == b:
                actor_final[a] = next_id + sub_actor.get(a, 0)
        next_id += n_sub
    blocks = _relabel(final)
    ga = np.array([actor_final.get(a, 0) for a in M.row_labels])
    q = bipartite_modularity(M, ga, blocks.astype(np.int64))
    return Partition(M.col_labels, blocks, PartitionMethod.BRIM2,
                     modularity=q, actor_blocks=actor_final)


def _derive_seed(seed: int, block: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(1, block)).generate_state(1)[0])


def restrict_features(design, partition: Partition) -> dict[str, object]:
    """Per-product designs whose feature products are the product's block."""
    from dataclasses import replace

    block_of = partition.block_of()
    members = {b: partition.members(b) for b in range(partition.n_blocks)}
    out = {}
    for p in partition.products:
        if p not in block_of:
            raise SchemaError(f"product {p} not covered by partition")
        out[p] = replace(design, feature_products=members[block_of[p]])
    return out


def matrix_ordering(M: BinaryMatrix, partition: Partition) -> tuple[list[str], list[str]]:
    """Row/column orders for block-structured matrix displays.

    Products sort by (block, ubiquity desc); actors by (block when the
    partition carries actor labels, diversification desc).
    """
    u = M.values.sum(axis=0)
    col_ix = M.col_index()
    prods = sorted(partition.products,
                   key=lambda p: (partition.block_of()[p], -u[col_ix[p]], p))
    d = M.values.sum(axis=1)
    a_block = partition.actor_blocks or {}
    actors = sorted(M.row_labels,
                    key=lambda a: (a_block.get(a, 0), -d[M.row_index()[a]], a))
    return actors, prods


def write_matrix_ordering(M: BinaryMatrix, partition: Partition, dest) -> None:
    actors, prods = matrix_ordering(M, partition)
    close, out = _open_text(dest, "w")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["axis", "position", "label"])
        for i, a in enumerate(actors):
            w.writerow(["row", i, a])
        for j, p in enumerate(prods):
            w.writerow(["col", j, p])
    finally:
        if close:
            out.close()
