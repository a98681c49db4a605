import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from rlab import (
    DegenerateInputError,
    Partition,
    PartitionMethod,
    Representation,
    SchemaError,
    TrainingDesign,
    bipartite_modularity,
    brim,
    brim_squared,
    hs_partition,
    restrict_features,
)
from rlab.core_data import BinaryMatrix, ProductHierarchy
from rlab.partitions import BipartiteGraph, HierarchyLevel, _brim_single, matrix_ordering

from oracles import modularity_loops


def bm(values, prods=None):
    values = np.asarray(values, dtype=float)
    rows = tuple(f"f{i:03d}" for i in range(values.shape[0]))
    cols = prods or tuple(f"{j + 1:04d}" for j in range(values.shape[1]))
    return BinaryMatrix(rows, cols, values)


def two_bicliques():
    return bm(np.array([
        [1, 1, 0, 0],
        [1, 1, 0, 0],
        [0, 0, 1, 1],
        [0, 0, 1, 1],
    ], dtype=float))


def all_set_partitions(n):
    """Every assignment of n items to blocks, canonical labels."""
    def rec(i, max_label, current):
        if i == n:
            yield tuple(current)
            return
        for lab in range(max_label + 2):
            current.append(lab)
            yield from rec(i + 1, max(max_label, lab), current)
            current.pop()
    yield from rec(0, -1, [])


def exhaustive_best_q(M):
    """Max bipartite modularity over all joint partitions of the 8 nodes."""
    n, m = M.values.shape
    best_q, best_assign = -np.inf, None
    for assign in all_set_partitions(n + m):
        ga = np.array(assign[:n])
        gp = np.array(assign[n:])
        q = modularity_loops(M.values, ga, gp)
        if q > best_q:
            best_q, best_assign = q, (ga, gp)
    return best_q, best_assign


def agreement(found, truth):
    C = np.zeros((int(found.max()) + 1, int(truth.max()) + 1))
    for a, b in zip(found, truth):
        C[a, b] += 1
    r, c = linear_sum_assignment(-C)
    return C[r, c].sum() / len(found)


# --- hierarchy partitions ------------------------------------------------------

def test_hs_chapter_partition_separates_codes():
    h = ProductHierarchy.hs1992()
    part = hs_partition(h, HierarchyLevel.CHAPTER, ["0508", "9601"])
    assert part.n_blocks == 2
    assert part.method is PartitionMethod.CHAPTER


def test_hs_single_chapter_single_block():
    h = ProductHierarchy.hs1992()
    part = hs_partition(h, HierarchyLevel.CHAPTER, ["0508", "0509", "0510"])
    assert part.n_blocks == 1


def test_hs_sections_for_jewelry_firm_codes():
    h = ProductHierarchy.hs1992()
    part = hs_partition(h, HierarchyLevel.SECTION,
                        ["0508", "7103", "7117", "9601"])
    assert part.n_blocks == 3
    b = part.block_of()
    assert b["7103"] == b["7117"]
    assert len({b["0508"], b["7103"], b["9601"]}) == 3


def test_hs_partition_bad_code():
    h = ProductHierarchy.hs1992()
    with pytest.raises(SchemaError):
        hs_partition(h, HierarchyLevel.CHAPTER, ["05x8"])


# --- BRIM -----------------------------------------------------------------------

def test_brim_two_bicliques_matches_exhaustive_search():
    M = two_bicliques()
    best_q, (ga, gp) = exhaustive_best_q(M)
    assert best_q == pytest.approx(0.5, abs=1e-12)
    part = brim(M, k_max=4, restarts=6, seed=0)
    assert part.modularity == pytest.approx(best_q, abs=1e-12)
    assert part.n_blocks == 2
    assert part.blocks[0] == part.blocks[1] != part.blocks[2] == part.blocks[3]


def test_brim_single_biclique_q_zero():
    M = bm(np.ones((2, 2)))
    part = brim(M, k_max=2, restarts=4, seed=0)
    assert part.n_blocks == 1
    assert part.modularity == pytest.approx(0.0, abs=1e-12)


def test_brim_edgeless_degenerate():
    with pytest.raises(DegenerateInputError):
        brim(bm(np.zeros((2, 2))), k_max=2, restarts=1, seed=0)


def planted_matrix(n_blocks, firms_per_block, prods_per_block, p_in, p_noise, seed):
    rng = np.random.default_rng(seed)
    n_f, n_p = n_blocks * firms_per_block, n_blocks * prods_per_block
    m = (rng.random((n_f, n_p)) < p_noise).astype(float)
    for b in range(n_blocks):
        rows = slice(b * firms_per_block, (b + 1) * firms_per_block)
        cols = slice(b * prods_per_block, (b + 1) * prods_per_block)
        m[rows, cols] = (rng.random((firms_per_block, prods_per_block)) < p_in)
    truth = np.repeat(np.arange(n_blocks), prods_per_block)
    return bm(m), truth


def test_brim_recovers_planted_blocks_with_noise():
    M, truth = planted_matrix(8, 30, 12, 0.5, 0.01, seed=7)
    part = brim(M, k_max=12, restarts=8, seed=3)
    assert agreement(part.blocks, truth) >= 0.95


def test_brim_q_matches_direct_evaluation():
    rng = np.random.default_rng(9)
    for trial in range(10):
        m = (rng.random((10, 12)) < 0.3).astype(float)
        if m.sum() == 0:
            continue
        M = bm(m)
        part = brim(M, k_max=6, restarts=3, seed=trial)
        ga = np.array([part.actor_blocks[a] for a in M.row_labels])
        direct = bipartite_modularity(M, ga, part.blocks.astype(np.int64))
        loops = modularity_loops(m, ga, part.blocks)
        assert part.modularity == pytest.approx(direct, abs=1e-12)
        assert direct == pytest.approx(loops, abs=1e-12)


def test_brim_sweeps_nondecreasing():
    rng_data = np.random.default_rng(10)
    m = (rng_data.random((15, 18)) < 0.25).astype(float)
    for r in range(5):
        rng = np.random.default_rng(np.random.SeedSequence(3, spawn_key=(r,)))
        _, _, _, history = _brim_single(m, 6, rng)
        assert all(b >= a - 1e-12 for a, b in zip(history, history[1:]))


def test_brim_relabeling_invariance():
    M, _ = planted_matrix(3, 10, 5, 0.7, 0.02, seed=2)
    part = brim(M, k_max=5, restarts=4, seed=1)
    ga = np.array([part.actor_blocks[a] for a in M.row_labels])
    gp = part.blocks.astype(np.int64)
    q0 = bipartite_modularity(M, ga, gp)
    perm = np.random.default_rng(0).permutation(max(gp.max(), ga.max()) + 1)
    assert bipartite_modularity(M, perm[ga], perm[gp]) == pytest.approx(q0, abs=1e-15)


def test_brim_deterministic():
    M, _ = planted_matrix(4, 12, 6, 0.6, 0.02, seed=5)
    p1 = brim(M, k_max=8, restarts=5, seed=42)
    p2 = brim(M, k_max=8, restarts=5, seed=42)
    np.testing.assert_array_equal(p1.blocks, p2.blocks)
    assert p1.modularity == p2.modularity


# --- BRIM^2 -----------------------------------------------------------------------

def test_brim_squared_no_substructure_keeps_block_count():
    M = two_bicliques()
    top = brim(M, k_max=4, restarts=6, seed=0)
    sq = brim_squared(M, k_max=4, restarts=6, seed=0)
    assert sq.n_blocks == top.n_blocks
    assert sq.method is PartitionMethod.BRIM2


def nested_matrix(seed=1, sub_density=0.85, super_noise=0.4, fpb=20, ppb=6):
    rng = np.random.default_rng(seed)
    n_sub = 6
    m = np.zeros((n_sub * fpb, n_sub * ppb))
    for sup in range(2):
        rows = slice(sup * 3 * fpb, (sup + 1) * 3 * fpb)
        cols = slice(sup * 3 * ppb, (sup + 1) * 3 * ppb)
        m[rows, cols] = (rng.random((3 * fpb, 3 * ppb)) < super_noise)
    for s in range(n_sub):
        m[s * fpb:(s + 1) * fpb, s * ppb:(s + 1) * ppb] = \
            (rng.random((fpb, ppb)) < sub_density)
    truth = np.repeat(np.arange(n_sub), ppb)
    return bm(m), truth


def test_brim_squared_nested_super_blocks():
    M, truth6 = nested_matrix(seed=1)
    top = brim(M, k_max=10, restarts=8, seed=1)
    sq = brim_squared(M, k_max=10, restarts=8, seed=1)
    assert top.n_blocks == 2
    assert sq.n_blocks == 6
    assert agreement(sq.blocks, truth6) == 1.0


def test_brim_squared_more_blocks_at_scale(tiny_world):
    from rlab import binarize, rca, year_slice

    panel = tiny_world.firm_panel
    M = binarize(rca(year_slice(panel, panel.years[-1])))
    top = brim(M, k_max=12, restarts=4, seed=2)
    sq = brim_squared(M, k_max=12, restarts=4, seed=2)
    assert sq.n_blocks >= top.n_blocks


# --- partitions as feature restriction ---------------------------------------------

def base_design():
    return TrainingDesign((2000,), 1, Representation.RCA, ("A",))


def test_restrict_features_none_keeps_full_set():
    part = Partition.single_block(("0001", "0002", "0003"))
    designs = restrict_features(base_design(), part)
    for p in part.products:
        assert designs[p].feature_products == part.products


def test_restrict_features_two_blocks_counts():
    part = Partition(("0001", "0002", "0003"), np.array([0, 1, 0]),
                     PartitionMethod.EXTERNAL)
    designs = restrict_features(base_design(), part)
    total = sum(len(d.feature_products) for d in designs.values())
    assert total == 2 * 2 + 1 * 1  # block sizes 2 and 1


def test_restrict_features_chapter_membership():
    prods = ("0501", "0502", "9601", "9602")
    part = hs_partition(ProductHierarchy.hs1992(), HierarchyLevel.CHAPTER, prods)
    designs = restrict_features(base_design(), part)
    assert designs["0501"].feature_products == ("0501", "0502")
    assert designs["9601"].feature_products == ("9601", "9602")


# --- files and ordering ---------------------------------------------------------

def test_partition_csv_round_trip(tmp_path):
    part = Partition(("0001", "0002", "0003"), np.array([0, 1, 0]),
                     PartitionMethod.EXTERNAL)
    path = tmp_path / "part.csv"
    part.to_csv(str(path))
    again = Partition.from_csv(str(path))
    assert again.products == part.products
    np.testing.assert_array_equal(again.blocks, part.blocks)


def test_matrix_ordering_groups_blocks():
    M = two_bicliques()
    part = brim(M, k_max=4, restarts=4, seed=0)
    actors, prods = matrix_ordering(M, part)
    block_of = part.block_of()
    seq = [block_of[p] for p in prods]
    assert seq == sorted(seq) or seq == sorted(seq, reverse=True)


def test_bipartite_graph_degrees():
    M = two_bicliques()
    g = BipartiteGraph.from_binary(M)
    assert g.n_edges == 8
    np.testing.assert_array_equal(g.actor_degree, [2, 2, 2, 2])
    np.testing.assert_array_equal(g.product_degree, [2, 2, 2, 2])
