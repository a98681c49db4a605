"""From raw export volumes to comparative advantage and specialization.

Walks the preprocessing chain on a small hand-made panel: ingest CSV,
compute RCA, binarize into the M matrix, and read off ubiquity and
diversification.
"""

import io

import numpy as np

from rlab import binarize, diversification, ingest_csv, rca, ubiquity, year_slice

CSV = """actor,product,year,value
alpha,0101,2000,120
alpha,0102,2000,30
alpha,0101,2001,150
alpha,0102,2001,45
beta,0101,2000,60
beta,7103,2000,90
beta,0101,2001,30
beta,7103,2001,140
gamma,7103,2000,20
gamma,9601,2000,80
gamma,9601,2001,95
"""

panel = ingest_csv(io.StringIO(CSV))
print(f"panel: {len(panel.actors)} actors x {len(panel.products)} products, "
      f"years {panel.years[0]}..{panel.years[-1]}, {panel.n_entries} entries")

E = year_slice(panel, 2000)
print("\nexport volumes, year 2000:")
print("           " + "  ".join(f"{p:>6}" for p in E.col_labels))
for a, row in zip(E.row_labels, E.values):
    print(f"  {a:<8} " + "  ".join(f"{v:6.0f}" for v in row))

R = rca(E)
print("\nRCA (volume share vs world share):")
for a, row in zip(R.row_labels, R.values):
    print(f"  {a:<8} " + "  ".join(f"{v:6.2f}" for v in row))

M = binarize(R)  # competitive iff RCA >= 1
print("\nM (competitive specialization):")
for a, row in zip(M.row_labels, M.values):
    print(f"  {a:<8} " + "  ".join(f"{v:6.0f}" for v in row))

u = ubiquity(M)
d = diversification(M)
print("\nubiquity (actors per product):",
      {p: int(v) for p, v in zip(u.labels, u.values)})
print("diversification (products per actor):",
      {a: int(v) for a, v in zip(d.labels, d.values)})

# a rank-one world (everyone proportional) is perfectly balanced: RCA = 1
balanced = np.outer([1.0, 2.0, 4.0], [3.0, 3.0, 3.0])
from rlab.core_data import ValueMatrix

R1 = rca(ValueMatrix(("a", "b", "c"), ("0101", "0102", "0103"), balanced))
print("\nrank-one panel -> RCA everywhere:", np.unique(R1.values))
