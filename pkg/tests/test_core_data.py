import io

import numpy as np
import pytest

from rlab import (
    ExportPanel,
    ParseError,
    RangeError,
    SchemaError,
    SizeError,
    ValidationError,
    aggregate_years,
    emit_csv,
    filter_actors,
    ingest_csv,
    read_cache,
    restrict_products,
    split_actors,
    write_cache,
    year_slice,
)
from rlab.core_data import ProductHierarchy, ValueMatrix


def test_ingest_empty_stream():
    panel = ingest_csv(io.StringIO("actor,product,year,value\n"))
    assert panel.n_entries == 0
    assert panel.actors == ()


def test_ingest_sums_duplicate_triples():
    csv_text = "actor,product,year,value\nA,0101,2000,3\nA,0101,2000,4\n"
    panel = ingest_csv(io.StringIO(csv_text))
    assert panel.n_entries == 1
    assert panel.value[0] == 7.0


def test_ingest_hand_written_rows():
    csv_text = (
        "actor,product,year,value\n"
        "B,0202,2001,5.5\n"
        "A,0101,2000,1\n"
        "A,0202,2001,2\n"
        "B,0101,2000,3\n"
        "A,0101,2001,4\n"
        "B,0202,2000,6\n"
    )
    panel = ingest_csv(io.StringIO(csv_text))
    expected = ExportPanel.from_triples([
        ("A", "0101", 2000, 1.0), ("A", "0101", 2001, 4.0),
        ("A", "0202", 2001, 2.0), ("B", "0101", 2000, 3.0),
        ("B", "0202", 2000, 6.0), ("B", "0202", 2001, 5.5),
    ])
    assert panel.actors == expected.actors
    assert panel.products == expected.products
    assert panel.to_triples() == expected.to_triples()


def test_ingest_schema_remap():
    csv_text = "firm,hs4,yr,euros\nA,0101,2000,1\n"
    panel = ingest_csv(io.StringIO(csv_text),
                       schema={"actor": "firm", "product": "hs4",
                               "year": "yr", "value": "euros"})
    assert panel.actors == ("A",)


@pytest.mark.parametrize("row, err", [
    ("A,01,2000,1", ParseError),          # bad code
    ("A,0101,2000,abc", ParseError),      # non-numeric value
    ("A,0101,xx,1", ParseError),          # non-numeric year
    ("A,0101,2000", ParseError),          # wrong column count
    ("A,0101,2000,-5", ValidationError),  # negative value
])
def test_ingest_malformed_rows(row, err):
    with pytest.raises(err):
        ingest_csv(io.StringIO(f"actor,product,year,value\n{row}\n"))


def test_parse_error_carries_row_number():
    with pytest.raises(ParseError, match="row 3"):
        ingest_csv(io.StringIO("actor,product,year,value\nA,0101,2000,1\nA,01,2000,1\n"))


def test_csv_round_trip(hand_panel):
    buf = io.StringIO()
    emit_csv(hand_panel, buf)
    again = ingest_csv(io.StringIO(buf.getvalue()))
    assert again.to_triples() == hand_panel.to_triples()
    assert again.years == hand_panel.years


def test_cache_round_trip_bit_exact(hand_panel, tmp_path):
    p1 = tmp_path / "panel.rlab"
    p2 = tmp_path / "panel2.rlab"
    write_cache(hand_panel, str(p1))
    again = read_cache(str(p1))
    assert again.to_triples() == hand_panel.to_triples()
    write_cache(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_panel_rejects_duplicates_when_not_summed():
    with pytest.raises(ValidationError):
        ExportPanel.from_triples(
            [("A", "0101", 2000, 1.0), ("A", "0101", 2000, 2.0)],
            sum_duplicates=False)


def test_years_contiguous_even_with_gap_entries():
    panel = ExportPanel.from_triples(
        [("A", "0101", 2000, 1.0), ("A", "0101", 2003, 1.0)])
    assert panel.years == (2000, 2001, 2002, 2003)


# --- filter_actors ----------------------------------------------------------

def test_filter_removes_single_product_actor():
    panel = ExportPanel.from_triples([
        ("A", "0101", 2000, 1.0), ("A", "0202", 2000, 1.0),
        ("B", "0101", 2000, 1.0),
    ])
    out = filter_actors(panel, min_distinct_products=2)
    assert out.actors == ("A",)


def test_filter_identity_when_disabled(hand_panel):
    out = filter_actors(hand_panel, min_distinct_products=0, continuity=False)
    assert out.to_triples() == hand_panel.to_triples()


def test_filter_continuity_gap_removes_actor():
    panel = ExportPanel.from_triples([
        ("A", "0101", 2000, 1.0), ("A", "0202", 2002, 1.0),
        ("B", "0101", 2000, 1.0), ("B", "0101", 2001, 1.0),
        ("B", "0202", 2002, 1.0),
    ])
    out = filter_actors(panel, min_distinct_products=2, continuity=True)
    assert out.actors == ("B",)


# --- aggregation and slicing ------------------------------------------------

def test_aggregate_single_year_equals_slice(hand_panel):
    agg = aggregate_years(hand_panel, 2000, 2000)
    sliced = year_slice(hand_panel, 2000)
    np.testing.assert_array_equal(agg.values, sliced.values)


def test_aggregate_disjoint_supports_union():
    panel = ExportPanel.from_triples([
        ("A", "0101", 2000, 2.0), ("A", "0202", 2001, 3.0)])
    agg = aggregate_years(panel, 2000, 2001)
    np.testing.assert_array_equal(agg.values, [[2.0, 3.0]])


def test_aggregate_matches_brute_force():
    rng = np.random.default_rng(4)
    actors = [f"a{i}" for i in range(5)]
    products = [f"{j:04d}" for j in range(1, 8)]
    triples = []
    for a in actors:
        for p in products:
            for y in (2000, 2001, 2002):
                if rng.random() < 0.5:
                    triples.append((a, p, y, float(rng.integers(1, 10))))
    panel = ExportPanel.from_triples(triples)
    agg = aggregate_years(panel, 2000, 2002)
    expect = np.zeros((5, 7))
    for a, p, y, v in triples:
        expect[actors.index(a), products.index(p)] += v
    np.testing.assert_allclose(agg.values, expect)


def test_aggregate_full_range_equals_sum_of_slices(hand_panel):
    full = aggregate_years(hand_panel, 2000, 2003)
    total = np.zeros_like(full.values)
    for y in hand_panel.years:
        total += year_slice(hand_panel, y).values
    np.testing.assert_array_equal(full.values, total)


def test_year_slice_empty_year_is_zero(hand_panel):
    assert not year_slice(hand_panel, 2002).values.any()


def test_year_slice_matches_triple_filter(hand_panel):
    sliced = year_slice(hand_panel, 2001)
    expect = np.zeros((3, 2))
    for a, p, y, v in hand_panel.to_triples():
        if y == 2001:
            expect[hand_panel.actors.index(a), hand_panel.products.index(p)] += v
    np.testing.assert_array_equal(sliced.values, expect)


def test_window_out_of_range(hand_panel):
    with pytest.raises(RangeError):
        aggregate_years(hand_panel, 1999, 2001)
    with pytest.raises(RangeError):
        year_slice(hand_panel, 2004)


# --- split_actors -------------------------------------------------------------

def test_split_all_in_train():
    s = split_actors(["a", "b", "c"], (3, 0, 0), seed=1)
    assert set(s.train) == {"a", "b", "c"}
    assert s.validation == () and s.test == ()


def test_split_deterministic():
    actors = [f"f{i}" for i in range(50)]
    assert split_actors(actors, (20, 15, 10), 7) == split_actors(actors, (20, 15, 10), 7)


def test_split_is_partition_paper_sizes():
    # scaled-down version of the 20000/20000/31826 split
    actors = [f"f{i:05d}" for i in range(719)]
    s = split_actors(actors, (200, 200, 319), seed=3)
    assert len(s.train) == 200 and len(s.validation) == 200 and len(s.test) == 319
    assert not (set(s.train) & set(s.validation))
    assert not (set(s.train) & set(s.test))
    assert not (set(s.validation) & set(s.test))
    assert set(s.train) | set(s.validation) | set(s.test) <= set(actors)


def test_split_size_error():
    with pytest.raises(SizeError):
        split_actors(["a", "b"], (2, 1, 0), seed=0)


# --- hierarchy and misc -------------------------------------------------------

def test_chapter_extraction():
    h = ProductHierarchy.hs1992()
    assert h.chapter("0508") == "05"
    assert h.chapter("9601") == "96"
    assert h.chapter("0508") != h.chapter("9601")


def test_sections_for_known_codes():
    h = ProductHierarchy.hs1992()
    assert h.section("0508") == 1
    assert h.section("7103") == 14
    assert h.section("7117") == 14
    assert h.section("9601") == 20


def test_unknown_chapter_warns_and_maps_to_sentinel():
    h = ProductHierarchy.hs1992()
    with pytest.warns(UserWarning):
        assert h.section("9901") == 0


def test_restrict_products(hand_panel):
    sub = restrict_products(hand_panel, ["0101"])
    assert sub.products == ("0101",)
    with pytest.raises(SchemaError):
        restrict_products(hand_panel, ["9999"])


def test_value_matrix_csv_round_trip(tmp_path):
    vm = ValueMatrix(("a", "b"), ("0101", "0202"),
                     np.array([[1.25, 0.0], [3.5, 7.125]]))
    path = tmp_path / "m.csv"
    vm.to_csv(str(path))
    again = ValueMatrix.from_csv(str(path))
    assert again.row_labels == vm.row_labels
    assert again.col_labels == vm.col_labels
    np.testing.assert_array_equal(again.values, vm.values)
