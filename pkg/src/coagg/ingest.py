"""Parsing, validation and alignment of the tabular inputs.

Every table is stored densely against a shared :class:`IndustryCatalog`.
Industry, region and occupation ids are opaque strings and are ordered
lexicographically, which fixes matrix indices for the whole analysis.
Missing combinations in the long-form CSVs default to zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import InputError

# kind -> CSV header
SCHEMAS: dict[str, tuple[str, ...]] = {
    "employment": ("industry_id", "region_id", "employment"),
    "occupations": ("industry_id", "occupation_id", "employment"),
    "io_table": ("seller_id", "buyer_id", "flow"),
    "patents": ("citing_industry", "cited_industry", "citations"),
    "education": ("industry_id", "mean_years_education"),
    "sectors": ("industry_id", "sector_id"),
}

FILENAMES = {kind: f"{kind}.csv" for kind in SCHEMAS}


@dataclass(frozen=True)
class IndustryCatalog:
    industries: tuple[str, ...]
    regions: tuple[str, ...] = ()
    occupations: tuple[str, ...] = ()
    display_names: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for label, ids in (("industry", self.industries), ("region", self.regions),
                           ("occupation", self.occupations)):
            if len(set(ids)) != len(ids):
                raise InputError(f"duplicate {label} ids in catalog")

    @property
    def n(self) -> int:
        return len(self.industries)

    def index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.industries)}

    def name(self, industry_id: str) -> str:
        return self.display_names.get(industry_id, industry_id)

    def with_occupations(self, occupations) -> "IndustryCatalog":
        return IndustryCatalog(self.industries, self.regions, tuple(occupations),
                               dict(self.display_names))


@dataclass(frozen=True)
class EmploymentTable:
    """Employment counts, industries x regions."""

    industries: tuple[str, ...]
    regions: tuple[str, ...]
    values: np.ndarray

    def validate(self):
        _check_shape(self.values, (len(self.industries), len(self.regions)), "employment")
        if (self.values < 0).any():
            raise InputError("employment: negative value")
        empty = [self.industries[i] for i in np.flatnonzero(self.values.sum(axis=1) <= 0)]
        if empty:
            raise InputError(f"employment: industries with zero total employment: {empty}")
        return self


@dataclass(frozen=True)
class OccupationTable:
    """Employment counts, industries x occupations."""

    industries: tuple[str, ...]
    occupations: tuple[str, ...]
    values: np.ndarray

    def validate(self):
        _check_shape(self.values, (len(self.industries), len(self.occupations)), "occupations")
        if (self.values < 0).any():
            raise InputError("occupations: negative value")
        return self

    def zero_variance_industries(self) -> list[str]:
        return [self.industries[i] for i in np.flatnonzero(self.values.var(axis=1) == 0)]


@dataclass(frozen=True)
class FlowTable:
    """Monetary flows; entry (i, j) is what industry j buys from industry i."""

    industries: tuple[str, ...]
    values: np.ndarray

    def validate(self):
        n = len(self.industries)
        _check_shape(self.values, (n, n), "io_table")
        if (self.values < 0).any():
            raise InputError("io_table: negative value")
        return self


@dataclass(frozen=True)
class CitationTable:
    """Citation counts; entry (i, j) counts citations from i's patents to j's."""

    industries: tuple[str, ...]
    values: np.ndarray

    def validate(self):
        n = len(self.industries)
        _check_shape(self.values, (n, n), "patents")
        if (self.values < 0).any():
            raise InputError("patents: negative value")
        if not np.all(np.mod(self.values, 1) == 0):
            raise InputError("patents: citation counts must be integers")
        return self


@dataclass(frozen=True)
class EducationTable:
    values: Mapping[str, float]

    def validate(self):
        bad = [k for k, v in self.values.items() if not (v > 0 and math.isfinite(v))]
        if bad:
            raise InputError(f"education: non-positive mean years for {bad}")
        return self


@dataclass(frozen=True)
class SectorMap:
    values: Mapping[str, str]

    def labels_for(self, industries) -> list[str]:
        missing = [i for i in industries if i not in self.values]
        if missing:
            raise InputError(f"sectors: no sector for industries {missing}")
        return [self.values[i] for i in industries]


@dataclass(frozen=True)
class TableSet:
    catalog: IndustryCatalog
    employment: EmploymentTable
    occupations: OccupationTable | None = None
    flows: FlowTable | None = None
    citations: CitationTable | None = None
    education: EducationTable | None = None
    sectors: SectorMap | None = None


def _check_shape(values, shape, kind):
    if values.shape != shape:
        raise InputError(f"{kind}: expected shape {shape}, got {values.shape}")


def _read_rows(path, kind):
    """Yield (line_number, fields) for data rows, after checking the header."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{kind}: missing file {path}")
    header = SCHEMAS[kind]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InputError(f"{kind}: empty file {path}") from None
        if tuple(c.strip() for c in first) != header:
            raise InputError(f"{kind}: bad header {first!r} at line 1, expected {','.join(header)}")
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise InputError(f"{kind}: malformed row at line {line}: expected "
                                 f"{len(header)} fields, got {len(fields)}")
            yield line, [f.strip() for f in fields]


def _number(text, kind, line):
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{kind}: malformed row at line {line}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise InputError(f"{kind}: malformed row at line {line}: non-finite value")
    if value < 0:
        raise InputError(f"{kind}: negative value at line {line}")
    return value


def read_pairs(path, kind) -> dict[tuple[str, str], float]:
    """Read a three-column long-form table into ``{(key1, key2): value}``."""
    out: dict[tuple[str, str], float] = {}
    for line, (a, b, v) in _read_rows(path, kind):
        if not a or not b:
            raise InputError(f"{kind}: malformed row at line {line}: empty id")
        key = (a, b)
        if key in out:
            raise InputError(f"{kind}: duplicate key {key} at line {line}")
        out[key] = _number(v, kind, line)
    return out


def read_mapping(path, kind) -> dict[str, str]:
    out: dict[str, str] = {}
    for line, (a, b) in _read_rows(path, kind):
        if not a or not b:
            raise InputError(f"{kind}: malformed row at line {line}: empty field")
        if a in out:
            raise InputError(f"{kind}: duplicate key {a!r} at line {line}")
        out[a] = b
    return out


def _check_known(ids, catalog_ids, kind):
    unknown = sorted(set(ids) - set(catalog_ids))
    if unknown:
        raise InputError(f"{kind}: industries absent from catalog: {unknown}")


def _dense(pairs, rows, cols):
    ri = {k: i for i, k in enumerate(rows)}
    ci = {k: i for i, k in enumerate(cols)}
    out = np.zeros((len(rows), len(cols)))
    for (a, b), v in pairs.items():
        out[ri[a], ci[b]] = v
    return out


def parse_employment(path, catalog: IndustryCatalog | None = None) -> EmploymentTable:
    pairs = read_pairs(path, "employment")
    if catalog is None:
        industries = tuple(sorted({a for a, _ in pairs}))
        regions = tuple(sorted({b for _, b in pairs}))
    else:
        industries, regions = catalog.industries, catalog.regions
        _check_known({a for a, _ in pairs}, industries, "employment")
        unknown = sorted({b for _, b in pairs} - set(regions))
        if unknown:
            raise InputError(f"employment: regions absent from catalog: {unknown}")
    return EmploymentTable(industries, regions, _dense(pairs, industries, regions)).validate()


def parse_occupations(path, catalog: IndustryCatalog) -> OccupationTable:
    pairs = read_pairs(path, "occupations")
    _check_known({a for a, _ in pairs}, catalog.industries, "occupations")
    occupations = catalog.occupations or tuple(sorted({b for _, b in pairs}))
    unknown = sorted({b for _, b in pairs} - set(occupations))
    if unknown:
        raise InputError(f"occupations: occupations absent from catalog: {unknown}")
    values = _dense(pairs, catalog.industries, occupations)
    return OccupationTable(catalog.industries, occupations, values).validate()


def _parse_square(path, kind, catalog):
    pairs = read_pairs(path, kind)
    _check_known({k for pair in pairs for k in pair}, catalog.industries, kind)
    return _dense(pairs, catalog.industries, catalog.industries)


def parse_flows(path, catalog: IndustryCatalog) -> FlowTable:
    return FlowTable(catalog.industries, _parse_square(path, "io_table", catalog)).validate()


def parse_citations(path, catalog: IndustryCatalog) -> CitationTable:
    values = _parse_square(path, "patents", catalog)
    return CitationTable(catalog.industries, values).validate()


def parse_education(path, catalog: IndustryCatalog) -> EducationTable:
    raw = read_mapping(path, "education")
    _check_known(raw, catalog.industries, "education")
    values = {}
    for k, v in raw.items():
        try:
            values[k] = float(v)
        except ValueError:
            raise InputError(f"education: malformed value {v!r} for {k}") from None
    return EducationTable(dict(sorted(values.items()))).validate()


def parse_sectors(path, catalog: IndustryCatalog) -> SectorMap:
    raw = read_mapping(path, "sectors")
    _check_known(raw, catalog.industries, "sectors")
    return SectorMap(dict(sorted(raw.items())))


def parse_tables(paths: Mapping[str, str | Path], catalog: IndustryCatalog | None = None) -> TableSet:
    """Parse a set of input CSVs onto one catalog.

    ``paths`` maps table kinds (keys of :data:`SCHEMAS`) to files. The
    employment table is required; when no catalog is given it defines the
    industry and region sets.
    """
    unknown = set(paths) - set(SCHEMAS)
    if unknown:
        raise InputError(f"unknown table kinds: {sorted(unknown)}")
    if "employment" not in paths:
        raise InputError("employment: table is required")
    employment = parse_employment(paths["employment"], catalog)
    catalog = IndustryCatalog(employment.industries, employment.regions,
                              catalog.occupations if catalog else (),
                              dict(catalog.display_names) if catalog else {})
    occupations = None
    if "occupations" in paths:
        occupations = parse_occupations(paths["occupations"], catalog)
        catalog = catalog.with_occupations(occupations.occupations)
    flows = parse_flows(paths["io_table"], catalog) if "io_table" in paths else None
    citations = parse_citations(paths["patents"], catalog) if "patents" in paths else None
    education = parse_education(paths["education"], catalog) if "education" in paths else None
    sectors = parse_sectors(paths["sectors"], catalog) if "sectors" in paths else None
    return TableSet(catalog, employment, occupations, flows, citations, education, sectors)


def discover_inputs(directory) -> dict[str, Path]:
    """Map table kinds to the standard file names present in ``directory``."""
    directory = Path(directory)
    return {kind: directory / name for kind, name in FILENAMES.items()
            if (directory / name).is_file()}


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _write_long(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_tables(tables: TableSet, directory) -> dict[str, Path]:
    """Serialize every present table with the standard schema; returns the paths.

    Zero entries of matrix tables are omitted since they are the parse default.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = {}

    def matrix(kind, rows, cols, values):
        path = directory / FILENAMES[kind]
        _write_long(path, SCHEMAS[kind],
                    ((rows[i], cols[j], _fmt(values[i, j]))
                     for i, j in zip(*np.nonzero(values))))
        out[kind] = path

    emp = tables.employment
    matrix("employment", emp.industries, emp.regions, emp.values)
    if tables.occupations is not None:
        occ = tables.occupations
        matrix("occupations", occ.industries, occ.occupations, occ.values)
    if tables.flows is not None:
        matrix("io_table", tables.flows.industries, tables.flows.industries, tables.flows.values)
    if tables.citations is not None:
        c = tables.citations
        matrix("patents", c.industries, c.industries, c.values)
    if tables.education is not None:
        path = directory / FILENAMES["education"]
        _write_long(path, SCHEMAS["education"],
                    ((k, repr(float(v))) for k, v in tables.education.values.items()))
        out["education"] = path
    if tables.sectors is not None:
        path = directory / FILENAMES["sectors"]
        _write_long(path, SCHEMAS["sectors"], tables.sectors.values.items())
        out["sectors"] = path
    return out
