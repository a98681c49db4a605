"""Synthetic firm-like and country-like export panels with planted truth.

Firms are specialists: each belongs to one product block and activates
new in-block products at a rate proportional to its in-block
diversification, gated by product-specific prerequisites (each non-root
product unlocks as the firm activates its in-block parent products).
The gating makes true relatedness conditional on *which* products a firm
exports, not just how many: a pattern per-product learners can pick up
but a fixed basket-averaging formula cannot.  Two noise channels blur
the block structure: a small per-product cross-block activation rate,
and a minority of highly diversified generalist firms (think trading
companies) whose cross-block co-occurrences are exactly the
high-diversification evidence that taxonomy-style normalization
discounts.  Countries aggregate firm portfolios; a per-country
capability draw caps how many blocks a country can host, which makes
the aggregated matrix nested rather than modular.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
import numpy as np

from .core_data import BinaryMatrix, ExportPanel, year_slice
from .errors import ConfigError, ValidationError
from .networks import ScoreMatrix
from .partitions import Partition, PartitionMethod

GENERALIST = -1


@dataclass(frozen=True)
class WorldConfig:
    n_blocks: int = 8
    products_per_block: int = 38
    n_firms: int = 2000
    mean_firms_per_country: float = 80.0
    init_products_mean: float = 3.0      # initial basket = 1 + Poisson(mean)
    activation_rate: float = 0.16        # kappa
    noise_rate: float = 0.003            # epsilon
    generalist_frac: float = 0.06
    generalist_init_scale: float = 6.0   # generalists start this much bigger
    prereq_parents: int = 2              # in-block parents gating each product
    prereq_floor: float = 0.05           # activation weight with no parent active
    prereq_sharpness: float = 4.0        # gate = max(floor, parent_frac ** this)
    div_mix: float = 0.3                 # weight of diversification vs gates
    n_years: int = 15
    first_year: int = 2000
    lag: int = 4
    volume_mu: float = 0.0
    volume_sigma: float = 1.5
    drift_sigma: float = 0.25
    seed: int = 0

    @property
    def n_products(self) -> int:
        return self.n_blocks * self.products_per_block

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(range(self.first_year, self.first_year + self.n_years))

    def validate(self) -> None:
        if not (1 <= self.n_blocks <= 97):
            raise ConfigError("n_blocks must be in 1..97 (one product chapter per block)")
        if not (1 <= self.products_per_block <= 100):
            raise ConfigError("products_per_block must be in 1..100")
        if self.n_firms < 1:
            raise ConfigError("n_firms must be >= 1")
        if self.mean_firms_per_country <= 0:
            raise ConfigError("mean_firms_per_country must be > 0")
        if self.activation_rate < 0:
            raise ConfigError("activation_rate must be >= 0")
        if not (0 <= self.noise_rate < 1):
            raise ConfigError("noise_rate must be in [0, 1)")
        if self.activation_rate > 0 and self.noise_rate >= self.activation_rate:
            raise ConfigError("noise_rate must stay below the in-block activation rate")
        if not (0 <= self.generalist_frac <= 1):
            raise ConfigError("generalist_frac must be in [0, 1]")
        if self.generalist_init_scale < 1:
            raise ConfigError("generalist_init_scale must be >= 1")
        if self.prereq_parents < 0:
            raise ConfigError("prereq_parents must be >= 0")
        if not (0 < self.prereq_floor <= 1):
            raise ConfigError("prereq_floor must be in (0, 1]")
        if not (0 <= self.div_mix <= 1):
            raise ConfigError("div_mix must be in [0, 1]")
        if self.prereq_sharpness <= 0:
            raise ConfigError("prereq_sharpness must be > 0")
        if self.n_years < 2:
            raise ConfigError("need at least two years")
        if not (1 <= self.lag < self.n_years):
            raise ConfigError("lag must be >= 1 and below the year span")


@dataclass
class SyntheticWorld:
    config: WorldConfig
    firm_panel: ExportPanel
    country_panel: ExportPanel
    firm_country: dict[str, str]
    firm_block: dict[str, int]           # GENERALIST for cross-block firms
    country_coverage: dict[str, int]     # how many leading blocks a country hosts
    product_parents: dict[str, tuple[str, ...]]  # empty tuple for root products
    planted_partition: Partition
    planted_relatedness: ScoreMatrix = field(repr=False, default=None)

    @property
    def default_base_year(self) -> int:
        return self.config.years[-1] - self.config.lag


def _product_codes(config: WorldConfig) -> list[str]:
    # block b occupies chapter b+1, so the planted partition coincides with
    # the chapter partition of these codes
    return [f"{b + 1:02d}{i:02d}"
            for b in range(config.n_blocks)
            for i in range(config.products_per_block)]


def generate_world(config: WorldConfig, seed: int | None = None) -> SyntheticWorld:
    """Simulate the firm panel, aggregate countries, and keep the truth."""
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    nb, ppb = config.n_blocks, config.products_per_block
    n_products = config.n_products
    n_firms = config.n_firms
    kappa, eps = config.activation_rate, config.noise_rate

    products = _product_codes(config)
    width = max(4, len(str(n_firms - 1)))
    firms = [f"F{i:0{width}d}" for i in range(n_firms)]

    block = rng.integers(0, nb, size=n_firms)
    block[rng.random(n_firms) < config.generalist_frac] = GENERALIST
    allowed = np.zeros((n_firms, n_products), dtype=bool)
    for f in range(n_firms):
        if block[f] == GENERALIST:
            allowed[f, :] = True
        else:
            allowed[f, block[f] * ppb:(block[f] + 1) * ppb] = True
    block_size = np.where(block == GENERALIST, n_products, ppb)

    # prerequisite parents: product i of a block draws parents among the
    # block's earlier products; the first product of each block is a root
    n_parents = config.prereq_parents
    parents = np.full((n_products, max(1, n_parents)), -1, dtype=np.int64)
    if n_parents > 0:
        for b in range(nb):
            for i in range(1, ppb):
                p = b * ppb + i
                parents[p] = b * ppb + rng.integers(0, i, size=n_parents)

    # initial baskets; generalists start much bigger, spread over all blocks
    n0 = 1 + rng.poisson(config.init_products_mean, size=n_firms)
    gen = block == GENERALIST
    n0[gen] = np.round(n0[gen] * config.generalist_init_scale).astype(n0.dtype)
    n0 = np.minimum(n0, np.where(gen, n_products, ppb))
    active = np.zeros((n_firms, n_products), dtype=bool)
    pick_scores = rng.random((n_firms, n_products))
    pick_scores[~allowed] = np.inf
    for f in range(n_firms):
        k = min(int(n0[f]), int(allowed[f].sum()))
        cols = np.argpartition(pick_scores[f], k - 1)[:k]
        active[f, cols] = True
    # initial cross-block entries for specialists, at rate eps
    p_init = eps * (n0 / ppb)
    out_mask = (~allowed) & (rng.random((n_firms, n_products)) < p_init[:, None])
    active |= out_mask

    volume = np.zeros((n_firms, n_products))
    volume[active] = rng.lognormal(config.volume_mu, config.volume_sigma,
                                   size=int(active.sum()))

    # countries
    n_countries = max(1, round(n_firms / config.mean_firms_per_country))
    cwidth = max(3, len(str(n_countries - 1)))
    countries = [f"C{i:0{cwidth}d}" for i in range(n_countries)]
    capability = rng.random(n_countries)
    coverage = 1 + np.floor(capability * nb).astype(np.int64)
    coverage = np.minimum(coverage, nb)
    coverage[np.argmax(capability)] = nb  # at least one fully diversified country
    firm_country_idx = np.empty(n_firms, dtype=np.int64)
    for f in range(n_firms):
        if block[f] == GENERALIST:
            cands = np.arange(n_countries)
        else:
            cands = np.nonzero(coverage >= block[f] + 1)[0]
        firm_country_idx[f] = cands[rng.integers(0, len(cands))]

    firm_triples: list[tuple[str, str, int, float]] = []
    country_triples: list[tuple[str, str, int, float]] = []

    def record(year: int) -> None:
        rr, cc = np.nonzero(volume)
        for i, j in zip(rr, cc):
            firm_triples.append((firms[i], products[j], year, float(volume[i, j])))
        cmat = np.zeros((n_countries, n_products))
        np.add.at(cmat, (firm_country_idx[rr], cc), volume[rr, cc])
        r2, c2 = np.nonzero(cmat)
        for i, j in zip(r2, c2):
            country_triples.append((countries[i], products[j], year, float(cmat[i, j])))

    def gate_weights() -> np.ndarray:
        if n_parents == 0:
            return np.ones((n_firms, n_products))
        frac = active[:, parents].mean(axis=2)
        w = np.maximum(config.prereq_floor, frac ** config.prereq_sharpness)
        w[:, parents[:, 0] < 0] = 1.0  # roots are ungated
        return w

    record(config.years[0])
    mix = config.div_mix
    for year in config.years[1:]:
        div = (active & allowed).sum(axis=1)
        intensity = (1.0 - mix) + mix * div / block_size
        p_in = np.clip(kappa * intensity, 0.0, 1.0)
        prob = np.where(allowed, p_in[:, None] * gate_weights(), eps * kappa)
        prob[active] = 0.0
        new = rng.random((n_firms, n_products)) < prob
        drift = np.exp(rng.normal(0.0, config.drift_sigma, size=volume.shape))
        volume[active] *= drift[active]
        volume[new] = rng.lognormal(config.volume_mu, config.volume_sigma,
                                    size=int(new.sum()))
        active |= new
        record(year)

    firm_panel = ExportPanel.from_triples(firm_triples)
    country_panel = ExportPanel.from_triples(country_triples)
    planted = Partition(
        tuple(products),
        np.repeat(np.arange(nb, dtype=np.int32), ppb),
        PartitionMethod.EXTERNAL,
    )
    product_parents = {
        products[p]: (() if parents[p, 0] < 0
                      else tuple(products[q] for q in parents[p]))
        for p in range(n_products)
    }
    world = SyntheticWorld(
        config=config,
        firm_panel=firm_panel,
        country_panel=country_panel,
        firm_country={firms[f]: countries[firm_country_idx[f]] for f in range(n_firms)},
        firm_block={firms[f]: int(block[f]) for f in range(n_firms)},
        country_coverage={countries[i]: int(coverage[i]) for i in range(n_countries)},
        product_parents=product_parents,
        planted_partition=planted,
    )
    world.planted_relatedness = planted_oracle_scores(world, world.default_base_year)
    return world


def planted_oracle_scores(world: SyntheticWorld, base_year: int) -> ScoreMatrix:
    """True per-year activation rates at the base year (Bayes-optimal scores).

    Already-active pairs score 1; inactive in-block pairs score
    kappa * (diversification / block size) * prerequisite weight;
    cross-block pairs score epsilon * kappa.
    """
    cfg = world.config
    panel = world.firm_panel
    vol = year_slice(panel, base_year).values
    present = vol > 0
    n_products = len(panel.products)
    ppb = cfg.products_per_block
    p_ix = panel.product_index()

    gates = np.ones((len(panel.actors), n_products))
    if cfg.prereq_parents > 0:
        for p, code in enumerate(panel.products):
            par = world.product_parents[code]
            if par:
                cols = [p_ix[q] for q in par]
                frac = present[:, cols].mean(axis=1)
                gates[:, p] = np.maximum(cfg.prereq_floor,
                                         frac ** cfg.prereq_sharpness)

    scores = np.zeros_like(vol)
    block_cols = {b: np.array([p_ix[p] for p in world.planted_partition.members(b)],
                              dtype=np.intp)
                  for b in range(cfg.n_blocks)}
    mix = cfg.div_mix
    for i, f in enumerate(panel.actors):
        b = world.firm_block[f]
        if b == GENERALIST:
            div = present[i].sum()
            rate = min(1.0, cfg.activation_rate * ((1 - mix) + mix * div / n_products))
            scores[i, :] = rate * gates[i, :]
        else:
            cols = block_cols[b]
            div = present[i, cols].sum()
            rate = min(1.0, cfg.activation_rate * ((1 - mix) + mix * div / ppb))
            scores[i, :] = cfg.noise_rate * cfg.activation_rate
            scores[i, cols] = rate * gates[i, cols]
        scores[i, present[i]] = 1.0
    return ScoreMatrix(panel.actors, panel.products, scores)


def nestedness_overlap(M: BinaryMatrix) -> float:
    """Mean basket overlap |A∩B| / |A| over ordered pairs with |A| <= |B|.

    Equals 1 for perfectly nested matrices; pairs with an empty smaller
    basket are skipped.  Returns 0 when no pair qualifies.
    """
    m = M.values
    if m.shape[0] < 2:
        raise ValidationError("nestedness needs at least two actors")
    d = m.sum(axis=1)
    C = m @ m.T
    mask = (d[:, None] <= d[None, :]) & (d[:, None] > 0)
    np.fill_diagonal(mask, False)
    if not mask.any():
        return 0.0
    ratios = C / np.where(d[:, None] > 0, d[:, None], 1.0)
    return float(ratios[mask].mean())


# ---------------------------------------------------------------------------
# World files

def write_world(world: SyntheticWorld, outdir: str) -> dict[str, str]:
    """Emit firm/country panels as CSV plus a sidecar JSON with the truth."""
    from .core_data import emit_csv

    os.makedirs(outdir, exist_ok=True)
    paths = {
        "firm_panel": os.path.join(outdir, "firm_panel.csv"),
        "country_panel": os.path.join(outdir, "country_panel.csv"),
        "sidecar": os.path.join(outdir, "world.json"),
    }
    emit_csv(world.firm_panel, paths["firm_panel"])
    emit_csv(world.country_panel, paths["country_panel"])
    sidecar = {
        "config": asdict(world.config),
        "firm_country": world.firm_country,
        "firm_block": world.firm_block,
        "country_coverage": world.country_coverage,
        "product_parents": {p: list(q) for p, q in world.product_parents.items()},
        "planted_partition": {p: int(b) for p, b in
                              zip(world.planted_partition.products,
                                  world.planted_partition.blocks)},
    }
    with open(paths["sidecar"], "w", encoding="utf-8") as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)
        f.write("\n")
    return paths


def read_world_sidecar(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
