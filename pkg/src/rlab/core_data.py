"""Data model and ingestion for actor-product-year export panels.

The central type is :class:`ExportPanel`, a sparse collection of
(actor, product, year, value) entries with lexicographically ordered
actor/product label axes and a contiguous year range.  Ingestion sums
duplicate triples; all downstream indices are reproducible because the
label ordering is canonical.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import (
    ParseError,
    RangeError,
    SchemaError,
    SizeError,
    ValidationError,
)

CACHE_MAGIC = b"RLAB1"

# Harmonized System (1992): chapter ranges -> section id (1..21).
_HS_SECTION_RANGES: tuple[tuple[int, int, int], ...] = (
    (1, 5, 1),     # live animals; animal products
    (6, 14, 2),    # vegetable products
    (15, 15, 3),   # animal or vegetable fats and oils
    (16, 24, 4),   # prepared foodstuffs; beverages; tobacco
    (25, 27, 5),   # mineral products
    (28, 38, 6),   # chemical products
    (39, 40, 7),   # plastics and rubber
    (41, 43, 8),   # hides, skins, leather, furskins
    (44, 46, 9),   # wood, cork, straw
    (47, 49, 10),  # pulp, paper, printed books
    (50, 63, 11),  # textiles
    (64, 67, 12),  # footwear, headgear, umbrellas
    (68, 70, 13),  # stone, ceramic, glass
    (71, 71, 14),  # precious stones and metals
    (72, 83, 15),  # base metals
    (84, 85, 16),  # machinery; electrical equipment
    (86, 89, 17),  # vehicles and transport equipment
    (90, 92, 18),  # optical, measuring, musical instruments
    (93, 93, 19),  # arms and ammunition
    (94, 96, 20),  # miscellaneous manufactured articles
    (97, 97, 21),  # works of art
)

UNKNOWN_SECTION = 0


class ActorLevel(Enum):
    FIRM = "firm"
    COUNTRY = "country"


@dataclass(frozen=True)
class ValueMatrix:
    """Dense labeled actor x product matrix of nonnegative reals."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValidationError(
                f"matrix shape {v.shape} does not match labels "
                f"({len(self.row_labels)}, {len(self.col_labels)})"
            )
        if len(set(self.row_labels)) != len(self.row_labels):
            raise ValidationError("duplicate row labels")
        if len(set(self.col_labels)) != len(self.col_labels):
            raise ValidationError("duplicate column labels")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def row_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.row_labels)}

    def col_index(self) -> dict[str, int]:
        return {p: j for j, p in enumerate(self.col_labels)}

    def restrict_rows(self, labels: Iterable[str]) -> "ValueMatrix":
        labels = tuple(labels)
        idx = self.row_index()
        missing = [a for a in labels if a not in idx]
        if missing:
            raise SchemaError(f"unknown row labels: {missing[:5]}")
        rows = np.array([idx[a] for a in labels], dtype=np.intp)
        return type(self)(labels, self.col_labels, self.values[rows])

    def restrict_cols(self, labels: Iterable[str]) -> "ValueMatrix":
        labels = tuple(labels)
        idx = self.col_index()
        missing = [p for p in labels if p not in idx]
        if missing:
            raise SchemaError(f"unknown column labels: {missing[:5]}")
        cols = np.array([idx[p] for p in labels], dtype=np.intp)
        return type(self)(self.row_labels, labels, self.values[:, cols])

    def to_csv(self, dest: str | TextIO, sparse: bool = False) -> None:
        """Write the matrix as labeled CSV; `sparse` emits triplets instead."""
        close, out = _open_text(dest, "w")
        try:
            w = csv.writer(out, lineterminator="\n")
            if sparse:
                w.writerow(["row", "col", "value"])
                rr, cc = np.nonzero(self.values)
                for i, j in zip(rr, cc):
                    w.writerow([self.row_labels[i], self.col_labels[j],
                                repr(float(self.values[i, j]))])
            else:
                w.writerow([""] + list(self.col_labels))
                for i, a in enumerate(self.row_labels):
                    w.writerow([a] + [repr(float(x)) for x in self.values[i]])
        finally:
            if close:
                out.close()

    @classmethod
    def from_csv(cls, source: str | TextIO) -> "ValueMatrix":
        close, inp = _open_text(source, "r")
        try:
            r = csv.reader(inp)
            header = next(r, None)
            if header is None:
                raise ParseError("empty matrix file", row=1)
            cols = tuple(header[1:])
            rows, data = [], []
            for n, line in enumerate(r, start=2):
                if not line:
                    continue
                if len(line) != len(cols) + 1:
                    raise ParseError(
                        f"expected {len(cols) + 1} columns, got {len(line)}", row=n)
                rows.append(line[0])
                try:
                    data.append([float(x) for x in line[1:]])
                except ValueError as e:
                    raise ParseError(str(e), row=n) from e
            values = np.array(data, dtype=np.float64) if data else np.zeros((0, len(cols)))
            return cls(tuple(rows), cols, values)
        finally:
            if close:
                inp.close()


@dataclass(frozen=True)
class BinaryMatrix(ValueMatrix):
    """ValueMatrix restricted to {0, 1} entries."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if v.size and not np.all((v == 0) | (v == 1)):
            raise ValidationError("binary matrix entries must be 0 or 1")


@dataclass(frozen=True)
class ExportPanel:
    """Sparse actor x product x year panel of nonnegative export volumes.

    Entries are kept canonically sorted by (actor, product, year); actors and
    products are lexicographically ordered; years are the full contiguous
    range spanned by the data.
    """

    years: tuple[int, ...]
    actors: tuple[str, ...]
    products: tuple[str, ...]
    actor_idx: np.ndarray
    product_idx: np.ndarray
    year: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name in ("actor_idx", "product_idx", "year", "value"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        _validate_panel(self)

    @property
    def n_entries(self) -> int:
        return len(self.value)

    def actor_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.actors)}

    def product_index(self) -> dict[str, int]:
        return {p: j for j, p in enumerate(self.products)}

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[tuple[str, str, int, float]],
        sum_duplicates: bool = True,
    ) -> "ExportPanel":
        """Build a panel from (actor, product, year, value) tuples."""
        recs = list(triples)
        if not recs:
            return cls((), (), (),
                       np.empty(0, np.int32), np.empty(0, np.int32),
                       np.empty(0, np.int32), np.empty(0, np.float64))
        actors = tuple(sorted({a for a, _, _, _ in recs}))
        products = tuple(sorted({p for _, p, _, _ in recs}))
        a_ix = {a: i for i, a in enumerate(actors)}
        p_ix = {p: j for j, p in enumerate(products)}
        ai = np.array([a_ix[a] for a, _, _, _ in recs], dtype=np.int32)
        pi = np.array([p_ix[p] for _, p, _, _ in recs], dtype=np.int32)
        yy = np.array([y for _, _, y, _ in recs], dtype=np.int32)
        vv = np.array([v for _, _, _, v in recs], dtype=np.float64)

        order = np.lexsort((yy, pi, ai))
        ai, pi, yy, vv = ai[order], pi[order], yy[order], vv[order]
        if sum_duplicates and len(ai) > 1:
            same = (np.diff(ai) == 0) & (np.diff(pi) == 0) & (np.diff(yy) == 0)
            if same.any():
                group = np.concatenate([[0], np.cumsum(~same)])
                n_groups = group[-1] + 1
                sums = np.zeros(n_groups)
                np.add.at(sums, group, vv)
                first = np.concatenate([[0], np.nonzero(~same)[0] + 1])
                ai, pi, yy, vv = ai[first], pi[first], yy[first], sums

        years = tuple(range(int(yy.min()), int(yy.max()) + 1))
        return cls(years, actors, products, ai, pi, yy, vv)

    def to_triples(self) -> list[tuple[str, str, int, float]]:
        return [
            (self.actors[a], self.products[p], int(y), float(v))
            for a, p, y, v in zip(self.actor_idx, self.product_idx, self.year, self.value)
        ]


def _validate_panel(panel: ExportPanel) -> None:
    v = panel.value
    if v.size:
        if not np.all(np.isfinite(v)):
            raise ValidationError("panel values must be finite")
        if np.any(v < 0):
            raise ValidationError("panel values must be >= 0")
    for code in panel.products:
        if len(code) != 4 or not code.isdigit():
            raise ValidationError(f"product code {code!r} is not 4 decimal digits")
    if panel.years:
        lo, hi = panel.years[0], panel.years[-1]
        if panel.years != tuple(range(lo, hi + 1)):
            raise ValidationError("panel years must form a contiguous range")
        if v.size and (panel.year.min() < lo or panel.year.max() > hi):
            raise ValidationError("entry year outside panel range")
    elif v.size:
        raise ValidationError("panel with entries must declare years")
    if v.size > 1:
        ai, pi, yy = panel.actor_idx, panel.product_idx, panel.year
        dup = (np.diff(ai) == 0) & (np.diff(pi) == 0) & (np.diff(yy) == 0)
        if dup.any():
            k = int(np.nonzero(dup)[0][0])
            raise ValidationError(
                f"duplicate entry for ({panel.actors[ai[k]]}, "
                f"{panel.products[pi[k]]}, {yy[k]})")


# ---------------------------------------------------------------------------
# CSV ingestion / emission

DEFAULT_SCHEMA = {"actor": "actor", "product": "product", "year": "year", "value": "value"}


def _open_text(source, mode):
    if isinstance(source, (str, bytes)):
        return True, open(source, mode, encoding="utf-8", newline="")
    return False, source


def ingest_csv(
    source: str | TextIO,
    schema: Mapping[str, str] | None = None,
) -> ExportPanel:
    """Read a panel from CSV with header `actor,product,year,value`.

    `schema` remaps the logical fields to differently named columns.
    Duplicate (actor, product, year) rows are summed.  Raises ParseError
    with the offending row number on malformed rows and ValidationError
    on negative values.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    close, inp = _open_text(source, "r")
    try:
        reader = csv.reader(inp)
        header = next(reader, None)
        if header is None:
            return ExportPanel.from_triples([])
        header = [h.strip() for h in header]
        try:
            cols = {k: header.index(schema[k]) for k in ("actor", "product", "year", "value")}
        except ValueError as e:
            raise SchemaError(f"missing column in header {header}: {e}") from e
        need = max(cols.values()) + 1
        triples = []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < need:
                raise ParseError(f"expected at least {need} columns, got {len(row)}", row=n)
            actor = row[cols["actor"]].strip()
            code = row[cols["product"]].strip()
            if not actor:
                raise ParseError("empty actor id", row=n)
            if len(code) != 4 or not code.isdigit():
                raise ParseError(f"bad product code {code!r}", row=n)
            try:
                year = int(row[cols["year"]])
                value = float(row[cols["value"]])
            except ValueError as e:
                raise ParseError(str(e), row=n) from e
            if not np.isfinite(value):
                raise ParseError(f"non-finite value {value!r}", row=n)
            if value < 0:
                raise ValidationError(f"row {n}: negative value {value}")
            triples.append((actor, code, year, value))
        return ExportPanel.from_triples(triples)
    finally:
        if close:
            inp.close()


def emit_csv(panel: ExportPanel, dest: str | TextIO) -> None:
    """Write the panel in the standard `actor,product,year,value` format."""
    close, out = _open_text(dest, "w")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["actor", "product", "year", "value"])
        for a, p, y, v in panel.to_triples():
            w.writerow([a, p, y, repr(v)])
    finally:
        if close:
            out.close()


# ---------------------------------------------------------------------------
# Columnar binary cache (magic RLAB1, little-endian)

def write_cache(panel: ExportPanel, dest: str) -> None:
    """Write the panel to the columnar binary cache format (bit-exact)."""
    with open(dest, "wb") as f:
        f.write(CACHE_MAGIC)
        y0 = panel.years[0] if panel.years else 0
        y1 = panel.years[-1] if panel.years else -1
        f.write(struct.pack("<IIiiQ", len(panel.actors), len(panel.products),
                            y0, y1, panel.n_entries))
        for label in panel.actors + panel.products:
            raw = label.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(panel.actor_idx.astype("<i4").tobytes())
        f.write(panel.product_idx.astype("<i4").tobytes())
        f.write(panel.year.astype("<i4").tobytes())
        f.write(panel.value.astype("<f8").tobytes())


def read_cache(source: str) -> ExportPanel:
    with open(source, "rb") as f:
        magic = f.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise ParseError(f"bad cache magic {magic!r}")
        n_actors, n_products, y0, y1, n = struct.unpack("<IIiiQ", f.read(24))
        labels = []
        for _ in range(n_actors + n_products):
            (ln,) = struct.unpack("<I", f.read(4))
            labels.append(f.read(ln).decode("utf-8"))
        actors = tuple(labels[:n_actors])
        products = tuple(labels[n_actors:])
        ai = np.frombuffer(f.read(4 * n), dtype="<i4").astype(np.int32)
        pi = np.frombuffer(f.read(4 * n), dtype="<i4").astype(np.int32)
        yy = np.frombuffer(f.read(4 * n), dtype="<i4").astype(np.int32)
        vv = np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64)
        years = tuple(range(y0, y1 + 1)) if y1 >= y0 else ()
        return ExportPanel(years, actors, products, ai, pi, yy, vv)


# ---------------------------------------------------------------------------
# Panel operations

def filter_actors(
    panel: ExportPanel,
    min_distinct_products: int = 2,
    continuity: bool = False,
) -> ExportPanel:
    """Keep actors with enough distinct products (and yearly continuity).

    Continuity requires at least one product in every year from the actor's
    first active year through the last panel year.
    """
    if panel.n_entries == 0:
        return panel
    n_actors = len(panel.actors)
    pos = panel.value > 0

    keep = np.ones(n_actors, dtype=bool)
    if min_distinct_products > 0:
        pairs = {(int(a), int(p)) for a, p in
                 zip(panel.actor_idx[pos], panel.product_idx[pos])}
        counts = np.zeros(n_actors, dtype=np.int64)
        for a, _ in pairs:
            counts[a] += 1
        keep &= counts >= min_distinct_products

    if continuity:
        last = panel.years[-1]
        active = {(int(a), int(y)) for a, y in
                  zip(panel.actor_idx[pos], panel.year[pos])}
        first_year = {}
        for a, y in active:
            if a not in first_year or y < first_year[a]:
                first_year[a] = y
        for a in range(n_actors):
            if a not in first_year:
                keep[a] = False
                continue
            for y in range(first_year[a], last + 1):
                if (a, y) not in active:
                    keep[a] = False
                    break

    mask = keep[panel.actor_idx]
    kept = [(panel.actors[a], panel.products[p], int(y), float(v))
            for a, p, y, v in zip(panel.actor_idx[mask], panel.product_idx[mask],
                                  panel.year[mask], panel.value[mask])]
    return ExportPanel.from_triples(kept)


def aggregate_years(panel: ExportPanel, y_start: int, y_end: int) -> ValueMatrix:
    """Sum export volumes over a year window into an actor x product matrix."""
    if y_start > y_end:
        raise RangeError(f"empty window ({y_start}, {y_end})")
    if not panel.years or y_start < panel.years[0] or y_end > panel.years[-1]:
        raise RangeError(
            f"window ({y_start}, {y_end}) outside panel range {panel.years[:1]}..{panel.years[-1:]}")
    out = np.zeros((len(panel.actors), len(panel.products)))
    mask = (panel.year >= y_start) & (panel.year <= y_end)
    np.add.at(out, (panel.actor_idx[mask], panel.product_idx[mask]), panel.value[mask])
    return ValueMatrix(panel.actors, panel.products, out)


def year_slice(panel: ExportPanel, y: int) -> ValueMatrix:
    """Single-year actor x product volume matrix."""
    if not panel.years or y < panel.years[0] or y > panel.years[-1]:
        raise RangeError(f"year {y} outside panel range")
    return aggregate_years(panel, y, y)


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/validation/test actor sets.

    Country-level runs use every actor in all three roles; that case is
    stored once with `shared=True` and exposed through the accessors, so
    the stored sets stay disjoint.
    """

    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    shared: bool = False

    def __post_init__(self):
        sets = [set(self.train), set(self.validation), set(self.test)]
        total = sum(len(s) for s in sets)
        if len(sets[0] | sets[1] | sets[2]) != total:
            raise ValidationError("split sets must be pairwise disjoint")
        if self.shared and (self.validation or self.test):
            raise ValidationError("shared assignment stores the population in train only")

    @classmethod
    def all_actors(cls, actors: Iterable[str]) -> "SplitAssignment":
        return cls(tuple(sorted(actors)), (), (), shared=True)

    @property
    def train_actors(self) -> tuple[str, ...]:
        return self.train

    @property
    def validation_actors(self) -> tuple[str, ...]:
        return self.train if self.shared else self.validation

    @property
    def test_actors(self) -> tuple[str, ...]:
        return self.train if self.shared else self.test


def split_actors(
    actors: Iterable[str],
    sizes: tuple[int, int, int],
    seed: int,
) -> SplitAssignment:
    """Uniformly random disjoint train/validation/test sets of given sizes."""
    actors = list(actors)
    n_train, n_val, n_test = sizes
    if n_train + n_val + n_test > len(actors):
        raise SizeError(
            f"requested {n_train + n_val + n_test} actors from a population of {len(actors)}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(len(actors))
    train = tuple(sorted(actors[i] for i in perm[:n_train]))
    val = tuple(sorted(actors[i] for i in perm[n_train:n_train + n_val]))
    test = tuple(sorted(actors[i] for i in perm[n_train + n_val:n_train + n_val + n_test]))
    return SplitAssignment(train, val, test)


# ---------------------------------------------------------------------------
# Product hierarchy

@dataclass(frozen=True)
class ProductHierarchy:
    """4-digit code -> chapter (first two digits) -> HS section (1..21)."""

    section_of_chapter: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def hs1992(cls) -> "ProductHierarchy":
        table = {}
        for lo, hi, sec in _HS_SECTION_RANGES:
            for ch in range(lo, hi + 1):
                table[ch] = sec
        return cls(table)

    def chapter(self, code: str) -> str:
        if len(code) != 4 or not code.isdigit():
            raise SchemaError(f"product code {code!r} is not 4 decimal digits")
        return code[:2]

    def section(self, code: str) -> int:
        ch = int(self.chapter(code))
        sec = self.section_of_chapter.get(ch)
        if sec is None:
            warnings.warn(f"chapter {ch:02d} has no section; using sentinel "
                          f"{UNKNOWN_SECTION}", stacklevel=2)
            return UNKNOWN_SECTION
        return sec


def restrict_products(panel: ExportPanel, products: Iterable[str]) -> ExportPanel:
    """Drop entries outside the given product set (cross-panel intersection)."""
    keep_codes = set(products)
    unknown = keep_codes - set(panel.products)
    if unknown:
        raise SchemaError(f"products not in panel: {sorted(unknown)[:5]}")
    keep = np.array([p in keep_codes for p in panel.products], dtype=bool)
    mask = keep[panel.product_idx]
    triples = [(panel.actors[a], panel.products[p], int(y), float(v))
               for a, p, y, v in zip(panel.actor_idx[mask], panel.product_idx[mask],
                                     panel.year[mask], panel.value[mask])]
    return ExportPanel.from_triples(triples)


def panel_from_matrix(matrix: ValueMatrix, year: int) -> ExportPanel:
    """Wrap a single-year matrix back into a one-year panel."""
    rr, cc = np.nonzero(matrix.values)
    triples = [(matrix.row_labels[i], matrix.col_labels[j], year,
                float(matrix.values[i, j])) for i, j in zip(rr, cc)]
    return ExportPanel.from_triples(triples)
