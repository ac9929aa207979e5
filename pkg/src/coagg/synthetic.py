"""Synthetic economies with planted industry clusters and channel regimes.

Each cluster shares a latent regional profile, which drives co-agglomeration.
Industries load on their cluster's profile with a random strength ``a_i``.
In a labour-driven cluster the same loading also pulls the occupation mix
towards a shared cluster vector, so strongly loaded pairs are both co-located
and close in occupations. In an IO-driven cluster random member pairs are
linked as supplier and buyer: the link adds a large flow and a regional
profile shared by the two ends, so linked pairs both trade and co-locate.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .ingest import (CitationTable, EducationTable, EmploymentTable, FlowTable, IndustryCatalog,
                     OccupationTable, SectorMap, TableSet, write_tables)

REGIMES = ("labour", "io")


@dataclass(frozen=True)
class SyntheticSpec:
    cluster_sizes: tuple[int, ...] = (10, 10)
    regimes: tuple[str, ...] = ("labour", "io")
    n_industries: int | None = None
    n_regions: int = 50
    n_occupations: int = 40
    seed: int = 0
    geo_mix: float = 0.8  # weight of the cluster profile in regional shares
    occ_mix: float = 0.8  # weight of the cluster occupation mix (labour regime)
    io_boost: float = 20.0  # size of a planted supplier flow (IO regime)
    link_prob: float = 0.2  # chance that two members of an IO cluster trade
    link_mix: float = 1.0  # weight of shared link profiles in IO-cluster locations
    flow_sigma: float = 1.5
    flow_density: float = 0.5
    loading_range: tuple[float, float] = (0.2, 1.0)
    n_shared_profiles: int = 4
    mean_employment: float = 20000.0
    education_means: dict = field(default_factory=lambda: {"labour": 14.5, "io": 12.0})
    education_sd: float = 0.5
    n_sectors: int = 4

    def validate(self):
        if len(self.cluster_sizes) != len(self.regimes):
            raise InputError("one regime is needed per cluster")
        if any(s < 1 for s in self.cluster_sizes):
            raise InputError("cluster sizes must be positive")
        bad = [r for r in self.regimes if r not in REGIMES]
        if bad:
            raise InputError(f"unknown regimes {bad}; expected {REGIMES}")
        total = sum(self.cluster_sizes)
        if self.n_industries is not None and self.n_industries != total:
            raise InputError(f"cluster sizes sum to {total}, but n_industries is {self.n_industries}")
        if self.n_regions < 2 or self.n_occupations < 2:
            raise InputError("need at least two regions and two occupations")
        return self


@dataclass(frozen=True)
class SyntheticEconomy:
    spec: SyntheticSpec
    tables: TableSet
    clusters: np.ndarray  # planted cluster index per industry (catalog order)
    loadings: np.ndarray

    def regime_of(self, i: int) -> str:
        return self.spec.regimes[self.clusters[i]]

    def truth(self) -> dict:
        ids = self.tables.catalog.industries
        return {
            "spec": _spec_dict(self.spec),
            "clusters": [[ids[i] for i in np.flatnonzero(self.clusters == c)]
                         for c in range(len(self.spec.cluster_sizes))],
            "regimes": list(self.spec.regimes),
            "loadings": {ids[i]: float(a) for i, a in enumerate(self.loadings)},
        }


def _spec_dict(spec):
    d = asdict(spec)
    d["cluster_sizes"] = list(spec.cluster_sizes)
    d["regimes"] = list(spec.regimes)
    d["loading_range"] = list(spec.loading_range)
    return d


def generate_synthetic_economy(spec: SyntheticSpec) -> SyntheticEconomy:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sizes = spec.cluster_sizes
    n = sum(sizes)
    R, O = spec.n_regions, spec.n_occupations
    width = max(3, len(str(n)))
    industries = tuple(f"I{i:0{width}d}" for i in range(n))
    regions = tuple(f"R{r:0{max(3, len(str(R)))}d}" for r in range(R))
    occupations = tuple(f"O{o:0{max(3, len(str(O)))}d}" for o in range(O))
    clusters = np.repeat(np.arange(len(sizes)), sizes)
    lo, hi = spec.loading_range
    a = rng.uniform(lo, hi, size=n)
    scale = spec.mean_employment * rng.lognormal(0.0, 0.5, size=n)

    io_member = np.array([spec.regimes[c] == "io" for c in clusters])
    same = clusters[:, None] == clusters[None, :]

    # supplier links inside IO-driven clusters; each link has its own regional
    # profile shared by both ends, so linked pairs co-locate and trade
    linked = np.triu(same & io_member[:, None] & io_member[None, :]
                     & (rng.random((n, n)) < spec.link_prob), k=1)
    li, lj = np.nonzero(linked)
    strength = rng.uniform(0.5, 1.5, size=len(li))
    link_profiles = rng.dirichlet(np.full(R, 0.3), size=len(li))

    # regional employment
    profiles = rng.dirichlet(np.full(R, 0.3), size=len(sizes))
    # the remainder mixes a few profiles shared across clusters, so industries in
    # different clusters can still co-locate
    extra = rng.dirichlet(np.full(R, 0.3), size=spec.n_shared_profiles)
    own = rng.dirichlet(np.full(spec.n_shared_profiles, 0.5), size=n) @ extra
    base = profiles[clusters].copy()
    link_sum = np.zeros((n, R))
    link_w = np.zeros(n)
    for k, (i, j) in enumerate(zip(li, lj)):
        for end in (i, j):
            link_sum[end] += strength[k] * link_profiles[k]
            link_w[end] += strength[k]
    has = link_w > 0
    base[has] = ((1.0 - spec.link_mix) * base[has]
                 + spec.link_mix * link_sum[has] / link_w[has, None])
    # labour clusters co-locate through the loadings, IO clusters through links
    mix = (spec.geo_mix * np.where(io_member & has, 1.0, a))[:, None]
    shares = mix * base + (1.0 - mix) * own
    employment = np.rint(scale[:, None] * shares)
    employment[np.arange(n), employment.argmax(axis=1)] += 1.0

    # occupation mixes
    occ_profiles = rng.dirichlet(np.full(O, 0.3), size=len(sizes))
    occ_own = rng.dirichlet(np.ones(O), size=n)
    labour = np.array([spec.regimes[c] == "labour" for c in clusters])
    omix = np.where(labour, spec.occ_mix * a, 0.0)[:, None]
    occ = np.rint(scale[:, None] * (omix * occ_profiles[clusters] + (1.0 - omix) * occ_own))

    # input-output flows: sparse heavy-tailed background plus the planted links
    flows = rng.lognormal(0.0, spec.flow_sigma, size=(n, n)) * (rng.random((n, n)) < spec.flow_density)
    seller_first = rng.random(len(li)) < 0.5
    sellers = np.where(seller_first, li, lj)
    buyers = np.where(seller_first, lj, li)
    flows[sellers, buyers] += spec.io_boost * strength
    np.fill_diagonal(flows, 0.0)
    flows = np.round(flows * 1000.0) / 1000.0

    citations = rng.poisson(0.5, size=(n, n)).astype(float)
    np.fill_diagonal(citations, 0.0)

    means = np.array([spec.education_means[spec.regimes[c]] for c in clusters])
    education = np.round(means + spec.education_sd * rng.standard_normal(n), 4)
    sectors = rng.integers(spec.n_sectors, size=n)

    catalog = IndustryCatalog(industries, regions, occupations)
    tables = TableSet(
        catalog,
        EmploymentTable(industries, regions, employment).validate(),
        OccupationTable(industries, occupations, occ).validate(),
        FlowTable(industries, flows).validate(),
        CitationTable(industries, citations).validate(),
        EducationTable({k: float(v) for k, v in zip(industries, education)}).validate(),
        SectorMap({k: f"S{int(s)}" for k, s in zip(industries, sectors)}),
    )
    return SyntheticEconomy(spec, tables, clusters, a)


def write_economy(econ: SyntheticEconomy, directory) -> Path:
    """Write the table set plus ``truth.json`` with the planted structure."""
    directory = Path(directory)
    write_tables(econ.tables, directory)
    (directory / "truth.json").write_text(json.dumps(econ.truth(), indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
    return directory
