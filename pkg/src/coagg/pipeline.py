"""End-to-end runs: each stage reads the previous stage's files and writes its own.

Run directory layout::

    config.ini  manifest.json  catalog.json
    proximity/   EG.csv L.csv IO.csv [K.csv] with *.flags.json sidecars
    network/     edges.csv network.dot top_<q>pct.dot component.json
    communities/ sweep.csv partitions/P_<k>.json [minima/M_<i>.json]
                 [external.csv] dendrogram.json dendrogram.dot
    channels/    global.csv industry.csv industry_scatter.csv community.csv
                 dendrogram.json dendrogram.dot
    education/   fits.csv per_partition.csv scatter.csv

Seeds: every random stage draws from ``SeedSequence([master, stage_id, ...])``
so a stage can be re-run on its own and reproduce the full-run output.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import shutil
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channels import (ChannelEstimate, Fit, community_mean_education, community_regression,
                       global_regression, industry_regression, read_estimates, write_estimates)
from .config import RunConfig
from .education import CommunityRecord, education_regression, per_partition_fits, scheme_weights, write_fits
from .errors import CoaggError, InputError, StageError
from .ingest import FILENAMES, IndustryCatalog, discover_inputs, parse_tables
from .network import (build_network, read_edges_csv, shuffle_null, to_dot, top_fraction_subgraph,
                      transition_system, write_edges_csv)
from .proximity import (Channel, eg_index, io_proximity, knowledge_proximity, labour_pooling,
                        read_long, write_long)
from .stability import (MarkovKernel, Partition, build_dendrogram, external_partition,
                        score_external_partition, select_partitions, sweep)

log = logging.getLogger(__name__)

STAGES = ("proximity", "network", "communities", "regress", "education")
STAGE_IDS = {name: i + 1 for i, name in enumerate(STAGES)}
SECTIONS = {"proximity": "proximity", "network": "network", "communities": "communities",
            "regress": "channels", "education": "education"}
# stage -> file whose presence proves the stage ran
PRODUCT = {"proximity": "catalog.json", "network": "network/component.json",
           "communities": "communities/sweep.csv", "regress": "channels/community.csv",
           "education": "education/fits.csv"}
TIMESTAMP_PLACEHOLDER = "normalized"


def stage_seed(master: int, stage: str, *extra: int) -> int:
    """Seed for a stage (and optional sub-task) derived from the master seed."""
    return int(np.random.SeedSequence([int(master), STAGE_IDS[stage], *extra]).generate_state(1)[0])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class RunDir:
    """A run directory and its manifest."""

    def __init__(self, root):
        self.root = Path(root)
        self.manifest_path = self.root / "manifest.json"

    def path(self, rel: str) -> Path:
        return self.root / rel

    def fresh_section(self, stage: str) -> Path:
        d = self.root / SECTIONS[stage]
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        return d

    def require(self, stage: str, needs: str):
        if not self.path(PRODUCT[needs]).is_file():
            raise InputError(f"stage '{stage}' needs the outputs of stage '{needs}' "
                             f"({PRODUCT[needs]} is missing in {self.root}); run '{needs}' first")

    def load_manifest(self) -> dict:
        if self.manifest_path.is_file():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {"version": __version__, "stages": {}, "timestamps": {}}

    def record(self, stage: str, cfg: RunConfig, seeds=None, status="ok", error=None, extra=None):
        """Add a stage entry with output hashes, then rewrite the manifest."""
        m = self.load_manifest()
        m["version"] = __version__
        m["config"] = cfg.replay_dict()
        m["config_hash"] = cfg.digest()
        m["master_seed"] = cfg.seed
        section = self.root / SECTIONS[stage]
        files = sorted(p for p in section.rglob("*") if p.is_file()) if section.is_dir() else []
        if stage == "proximity" and self.path("catalog.json").is_file():
            files.insert(0, self.path("catalog.json"))
        entry = {
            "status": status,
            "config_hash": cfg.digest(),
            "seeds": seeds or {},
            "outputs": {p.relative_to(self.root).as_posix(): sha256_file(p) for p in files},
        }
        if error is not None:
            entry["error"] = str(error)
            entry["partial"] = bool(files)
        if extra:
            entry.update(extra)
        m["stages"][stage] = entry
        m.setdefault("timestamps", {})[stage] = datetime.now(timezone.utc).isoformat()
        failed = [s for s in STAGES if m["stages"].get(s, {}).get("status") == "failed"]
        m["status"] = "failed" if failed else "ok"
        _dump(m, self.manifest_path)
        return m


def normalized_manifest(path) -> dict:
    """Manifest content with timestamps replaced, for run-to-run comparison."""
    m = json.loads(Path(path).read_text(encoding="utf-8"))
    m["timestamps"] = {k: TIMESTAMP_PLACEHOLDER for k in m.get("timestamps", {})}
    return m


def _run_stage(stage: str, fn, cfg: RunConfig, run: RunDir, **kw):
    try:
        seeds, extra = fn(cfg, run, **kw)
    except CoaggError as exc:
        run.record(stage, cfg, status="failed", error=exc)
        raise StageError(stage, exc) from exc
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        run.record(stage, cfg, status="failed", error=exc)
        raise StageError(stage, exc) from exc
    run.record(stage, cfg, seeds, extra=extra)


# ---------------------------------------------------------------- shared readers


def load_catalog(run: RunDir) -> IndustryCatalog:
    d = json.loads(run.path("catalog.json").read_text(encoding="utf-8"))
    return IndustryCatalog(tuple(d["industries"]), tuple(d["regions"]), tuple(d["occupations"]))


def load_proximity(run: RunDir, catalog, channel: str):
    path = run.path(f"proximity/{channel}.csv")
    if not path.is_file():
        raise InputError(f"no {channel} proximity in {run.root}; is its input table present?")
    return read_long(path, catalog.industries, Channel(channel))


def load_component(run: RunDir) -> list[str]:
    return json.loads(run.path("network/component.json").read_text(encoding="utf-8"))["nodes"]


def partition_payload(p: Partition, nodes, t, mode, r=None) -> dict:
    return {"time": float(t), "mode": str(mode.value if hasattr(mode, "value") else mode), "k": p.k,
            "r": None if r is None else float(r),
            "communities": [[nodes[i] for i in c] for c in p.communities()]}


def read_partition_json(path, catalog) -> tuple[Partition, np.ndarray, dict]:
    """Partition over the listed industries plus their catalog indices."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing partition file {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        comms = data["communities"]
    except (ValueError, KeyError, TypeError):
        raise InputError(f"{path}: not a partition file") from None
    index = catalog.index()
    flat = [i for c in comms for i in c]
    unknown = [i for i in flat if i not in index]
    if unknown:
        raise InputError(f"{path}: industries absent from catalog: {unknown}")
    if len(set(flat)) != len(flat):
        raise InputError(f"{path}: an industry appears in two communities")
    members = sorted(flat, key=index.get)
    pos = {k: i for i, k in enumerate(members)}
    p = Partition.from_communities([[pos[i] for i in c] for c in comms], len(members))
    return p, np.array([index[i] for i in members]), data


def _partition_files(run: RunDir) -> list[tuple[str, Path]]:
    by_k = sorted(run.path("communities/partitions").glob("P_*.json"),
                  key=lambda p: int(p.stem.split("_")[1]))
    minima = sorted(run.path("communities/minima").glob("M_*.json"))
    return [(p.stem, p) for p in by_k] + [(p.stem, p) for p in minima]


# ---------------------------------------------------------------- stages


def stage_proximity(cfg: RunConfig, run: RunDir):
    paths = discover_inputs(cfg.inputs)
    if "employment" not in paths:
        raise InputError(f"missing file {Path(cfg.inputs) / FILENAMES['employment']}")
    tables = parse_tables(paths)
    out = run.fresh_section("proximity")
    cat = tables.catalog
    _dump({"industries": list(cat.industries), "regions": list(cat.regions),
           "occupations": list(cat.occupations)}, run.path("catalog.json"))
    write_long(eg_index(tables.employment, cfg.x_mode), out / "EG.csv")
    sources = {"L": (tables.occupations, labour_pooling), "IO": (tables.flows, io_proximity),
               "K": (tables.citations, knowledge_proximity)}
    for ch, (table, fn) in sources.items():
        if table is None:
            if ch in cfg.channel_list:
                raise InputError(f"channel {ch} requested but its input table is missing")
            continue
        write_long(fn(table), out / f"{ch}.csv")
    inputs = {p.name: sha256_file(p) for _, p in sorted(paths.items())}
    return {}, {"inputs": inputs}


def stage_network(cfg: RunConfig, run: RunDir):
    run.require("network", "proximity")
    catalog = load_catalog(run)
    eg = load_proximity(run, catalog, "EG")
    net = build_network(eg, cfg.clip)
    sub, keep = net.largest_component()
    dropped = [net.nodes[i] for i in range(net.n) if i not in set(keep.tolist())]
    if dropped:
        log.warning("analysis restricted to the largest component; dropped %s", dropped)
    out = run.fresh_section("network")
    write_edges_csv(net, out / "edges.csv")
    (out / "network.dot").write_text(to_dot(net), encoding="utf-8")
    top = top_fraction_subgraph(net, cfg.top_fraction)
    (out / f"top_{cfg.top_fraction * 100:g}pct.dot").write_text(to_dot(top, name="EG_top"),
                                                               encoding="utf-8")
    _dump({"nodes": list(sub.nodes), "dropped": dropped, "n_edges": net.n_edges,
           "clip": cfg.clip}, out / "component.json")
    return {}, None


def _component_network(run: RunDir, catalog):
    nodes = load_component(run)
    full = read_edges_csv(run.path("network/edges.csv"), catalog.industries)
    index = catalog.index()
    return full.subnetwork([index[n] for n in nodes])


def stage_communities(cfg: RunConfig, run: RunDir):
    run.require("communities", "network")
    catalog = load_catalog(run)
    net = _component_network(run, catalog)
    nodes = list(net.nodes)
    ts = transition_system(net)
    kernel = MarkovKernel(ts)
    times = cfg.time_grid()
    seeds = {"sweep": stage_seed(cfg.seed, "communities")}
    sr = sweep(ts, times, cfg.repeats, cfg.mode, seeds["sweep"], cfg.workers, kernel)

    null_vi = []
    for j in range(cfg.nulls):
        s_shuffle = stage_seed(cfg.seed, "communities", j + 1, 0)
        s_sweep = stage_seed(cfg.seed, "communities", j + 1, 1)
        seeds[f"null_{j + 1}"] = {"shuffle": s_shuffle, "sweep": s_sweep}
        null_net = shuffle_null(net, s_shuffle, cfg.null_variant).largest_component()[0]
        null_sr = sweep(transition_system(null_net), times, cfg.repeats, cfg.mode, s_sweep,
                        cfg.workers)
        null_vi.append(null_sr.mean_vi)

    out = run.fresh_section("communities")
    head = ["t", "k", "r", "mean_vi", "null_mean_vi"] + [f"null_vi_{j + 1}" for j in range(cfg.nulls)]
    rows = []
    for i, pt in enumerate(sr.points):
        nv = [v[i] for v in null_vi]
        rows.append([_num(pt.t), pt.k, _num(pt.r), _num(pt.mean_vi),
                     _num(float(np.mean(nv)) if nv else math.nan)] + [_num(v) for v in nv])
    _write_csv(out / "sweep.csv", head, rows)

    sel = select_partitions(sr)
    by_r = {pt.t: pt.r for pt in sr.points}
    levels, labels = [], []
    for k, (t, p) in sel.by_k.items():
        if 2 <= k <= cfg.max_k:
            _dump(partition_payload(p, nodes, t, sr.mode, by_r[t]), out / "partitions" / f"P_{k}.json")
            levels.append(p)
            labels.append(f"P_{k}")
    for i, (t, p) in enumerate(sel.minima, start=1):
        _dump(partition_payload(p, nodes, t, sr.mode, by_r[t]), out / "minima" / f"M_{i:02d}.json")
    if not levels:
        log.warning("no partition with 2..%d communities was found", cfg.max_k)

    paths = discover_inputs(cfg.inputs)
    if "sectors" in paths:
        sectors = parse_tables({"employment": paths["employment"], "sectors": paths["sectors"]}).sectors
        p_ext = external_partition(sectors.values, nodes)
        scores = score_external_partition(ts, p_ext, times, cfg.mode, kernel)
        _write_csv(out / "external.csv", ["t", "r", "k"], [[_num(s.t), _num(s.r), p_ext.k] for s in scores])

    if levels:
        dend = build_dendrogram(levels, labels)
        (out / "dendrogram.json").write_text(dend.to_json(nodes), encoding="utf-8")
        (out / "dendrogram.dot").write_text(dend.to_dot(), encoding="utf-8")
    return seeds, {"n_times": len(times), "selected_k": sorted(sel.by_k)}


def dominant_channel(estimates: dict, alpha: float) -> str:
    """Channel with the largest positive significant coefficient, else ``none``."""
    best, best_beta = "none", 0.0
    for ch, est in estimates.items():
        if est.defined and est.beta > best_beta and est.significant(alpha):
            best, best_beta = ch, est.beta
    return {"L": "labour", "IO": "io", "K": "knowledge"}.get(best, best)


def stage_regress(cfg: RunConfig, run: RunDir, partition=None):
    run.require("regress", "proximity")
    catalog = load_catalog(run)
    eg = load_proximity(run, catalog, "EG")
    zs = {ch: load_proximity(run, catalog, ch) for ch in cfg.channel_list}

    if partition is not None:
        # single partition mode: only the community table for that file
        p, nodes, _ = read_partition_json(partition, catalog)
        stem = Path(partition).stem
        ests = [e for ch, z in zs.items()
                for e in community_regression(eg, z, p, ch, nodes=nodes, label=stem)]
        out = run.path("channels")
        out.mkdir(parents=True, exist_ok=True)
        write_estimates(ests, out / f"community_{stem}.csv")
        return {}, {"partition": str(partition)}

    run.require("regress", "communities")
    out = run.fresh_section("regress")
    write_estimates([global_regression(eg, z, ch) for ch, z in zs.items()], out / "global.csv")
    per_ind = {ch: industry_regression(eg, z, ch) for ch, z in zs.items()}
    write_estimates([e for ests in per_ind.values() for e in ests], out / "industry.csv")
    head = ["industry_id"] + [f"{k}_{ch}" for ch in zs for k in ("beta", "p")]
    rows = [[ind] + [_num(getattr(per_ind[ch][i], k)) for ch in zs for k in ("beta", "p_value")]
            for i, ind in enumerate(catalog.industries)]
    _write_csv(out / "industry_scatter.csv", head, rows)

    community = []
    annotated = {}
    for label, path in _partition_files(run):
        p, nodes, _ = read_partition_json(path, catalog)
        per_ch = {ch: community_regression(eg, z, p, ch, nodes=nodes, label=label) for ch, z in zs.items()}
        for ch in zs:
            community.extend(per_ch[ch])
        annotated[label] = per_ch
    write_estimates(community, out / "community.csv")

    dend_path = run.path("communities/dendrogram.json")
    if dend_path.is_file():
        levels, labels = [], []
        for label, path in _partition_files(run):
            if label.startswith("P_"):
                levels.append(read_partition_json(path, catalog)[0])
                labels.append(label)
        nodes = load_component(run)
        dend = build_dendrogram(levels, labels)
        for lvl, label in enumerate(dend.labels):
            if label not in annotated:
                continue
            for c in range(dend.levels[lvl].k):
                ests = {ch: annotated[label][ch][c] for ch in zs}
                dend.annotate(lvl, c, dominant=dominant_channel(ests, cfg.alpha),
                              **{f"beta_{ch}": None if not e.defined else e.beta for ch, e in ests.items()},
                              **{f"p_{ch}": None if not e.defined else e.p_value for ch, e in ests.items()})
        (out / "dendrogram.json").write_text(dend.to_json(nodes), encoding="utf-8")
        (out / "dendrogram.dot").write_text(dend.to_dot(), encoding="utf-8")
    return {}, None


def _estimates_from_csv(path) -> dict[tuple[str, str], ChannelEstimate]:
    out = {}
    for r in read_estimates(path):
        fit = None
        if not math.isnan(r["beta"]):
            fit = Fit(math.nan, r["beta"], r["se"], r["t"], r["p"], r["r2"], r["n"])
        out[(r["scope_id"], r["channel"])] = ChannelEstimate(r["scope_type"], r["scope_id"],
                                                             r["channel"], fit, r["n"])
    return out


def education_records(cfg: RunConfig, run: RunDir, catalog, education, employment=None):
    """One record per community of P_2..P_max_k with its channel estimates."""
    ests = _estimates_from_csv(run.path("channels/community.csv"))
    channels = cfg.channel_list[:2]
    records = []
    for label, path in _partition_files(run):
        if not label.startswith("P_"):
            continue
        p, nodes, _ = read_partition_json(path, catalog)
        ids = [catalog.industries[i] for i in nodes]
        weights = None if employment is None else employment[nodes]
        ed = community_mean_education(education, p, ids, weights)
        sizes = p.sizes()
        for c in range(p.k):
            est = {ch: ests[(f"{label}:{c}", ch)] for ch in channels if (f"{label}:{c}", ch) in ests}
            records.append(CommunityRecord(label, c, int(sizes[c]), ed[c], est))
    return records


def stage_education(cfg: RunConfig, run: RunDir):
    run.require("education", "regress")
    paths = discover_inputs(cfg.inputs)
    if "education" not in paths:
        raise InputError(f"education is enabled but {Path(cfg.inputs) / FILENAMES['education']} is missing")
    catalog = load_catalog(run)
    tables = parse_tables({"employment": paths["employment"], "education": paths["education"]})
    if tables.catalog.industries != catalog.industries:
        raise InputError("inputs changed since the proximity stage")
    employment = tables.employment.values.sum(axis=1) if cfg.education_weighted else None
    records = education_records(cfg, run, catalog, tables.education, employment)
    channels = cfg.channel_list[:2]
    out = run.fresh_section("education")
    fits, per, per_labels = [], [], []
    for scheme in cfg.schemes:
        for zeroing in cfg.zeroings:
            fits.extend(education_regression(records, scheme, zeroing, channels, cfg.min_size))
            for label, f in per_partition_fits(records, scheme, zeroing, channels, cfg.min_size):
                per.append(f)
                per_labels.append(label)
    write_fits(fits, out / "fits.csv")
    write_fits(per, out / "per_partition.csv", per_labels)

    pooled = [r for r in records if r.size >= cfg.min_size]
    w1 = scheme_weights([r.partition for r in pooled], [r.size for r in pooled], "WLSI")
    w2 = scheme_weights([r.partition for r in pooled], [r.size for r in pooled], "WLSII")
    wmap = {(r.partition, r.community): (a, b) for r, a, b in zip(pooled, w1, w2)}
    head = ["partition", "community", "size", "education"] + \
        [f"{k}_{ch}" for ch in channels for k in ("beta", "p")] + ["weight_WLSI", "weight_WLSII", "pooled"]
    rows = []
    for r in records:
        cells = []
        for ch in channels:
            e = r.estimates.get(ch)
            cells += [_num(e.beta if e else None), _num(e.p_value if e else None)]
        a, b = wmap.get((r.partition, r.community), (math.nan, math.nan))
        rows.append([r.partition, r.community, r.size, _num(r.education)] + cells
                    + [_num(a), _num(b), int((r.partition, r.community) in wmap)])
    _write_csv(out / "scatter.csv", head, rows)
    return {}, {"n_records": len(records), "n_pooled": len(pooled)}


STAGE_FUNCS = {"proximity": stage_proximity, "network": stage_network,
               "communities": stage_communities, "regress": stage_regress,
               "education": stage_education}


def run_stage(stage: str, cfg: RunConfig, **kw) -> Path:
    """Run one stage against ``cfg.out``; raises :class:`StageError` on failure."""
    run = RunDir(cfg.out)
    run.root.mkdir(parents=True, exist_ok=True)
    (run.root / "config.ini").write_text(cfg.to_ini(runtime=False), encoding="utf-8")
    _run_stage(stage, STAGE_FUNCS[stage], cfg, run, **kw)
    return run.root


def run_pipeline(cfg: RunConfig) -> Path:
    """All stages in order. Education is skipped when disabled in the config."""
    cfg.validate()
    run = RunDir(cfg.out)
    run.root.mkdir(parents=True, exist_ok=True)
    if cfg.education and "education" not in discover_inputs(cfg.inputs):
        err = InputError(f"education is enabled but {Path(cfg.inputs) / FILENAMES['education']} is missing")
        run.record("education", cfg, status="failed", error=err)
        raise StageError("education", err)
    stages = [s for s in STAGES if s != "education" or cfg.education]
    for stage in stages:
        run_stage(stage, cfg)
    return run.root
