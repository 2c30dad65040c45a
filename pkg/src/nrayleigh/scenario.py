"""Scenarios, figure presets and CSV result tables."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from nrayleigh import analytic
from nrayleigh.analytic import QuadratureConfig
from nrayleigh.estimate import (
    SecondOrderStats,
    Source,
    ThresholdGrid,
    aggregate_trials,
    empirical_stats,
)
from nrayleigh.model import (
    DopplerKind,
    DopplerSpec,
    FixedGain,
    HopSpec,
    SemiBlindGain,
    UnitGain,
    cascade_to_product,
    db_to_linear,
    hops_from_stations,
)
from nrayleigh.simulate import SimConfig, derive_seed, gen_hop_paths, multiply_paths

CSV_HEADER = ("threshold_db", "source", "lcr_norm", "afd_norm", "cdf", "stderr")

# sub-seed stream tags under the master seed
TRIAL_STREAM = 1
EXACT_STREAM = 2

PRESET_DOPPLER_HZ = 100.0
PRESET_SNR_DB = {"fig1": 5.0, "fig2": 5.0, "fig3": 20.0, "fig4": 20.0}
PRESET_CUTS = (2, 3, 5)


@dataclass(frozen=True)
class Scenario:
    hops: tuple[HopSpec, ...]
    sim: SimConfig = field(default_factory=SimConfig)
    grid: ThresholdGrid = field(default_factory=ThresholdGrid.default)
    trials: int = 8
    outputs: tuple[Source, ...] = (Source.APPROX, Source.EMPIRICAL)
    cuts: tuple[int, ...] | None = None
    f_norm: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        object.__setattr__(self, "outputs", tuple(Source(o) for o in self.outputs))
        if not self.hops:
            raise ValueError("scenario needs at least one hop")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.outputs:
            raise ValueError("scenario needs at least one output")
        cuts = (len(self.hops),) if self.cuts is None else tuple(int(c) for c in self.cuts)
        if any(not 1 <= c <= len(self.hops) for c in cuts):
            raise ValueError(f"cuts must lie in 1..{len(self.hops)}, got {cuts}")
        object.__setattr__(self, "cuts", tuple(sorted(set(cuts))))
        if not self.f_norm > 0:
            raise ValueError("f_norm must be positive")


@dataclass(frozen=True)
class ResultRow:
    threshold_db: float
    source: str
    lcr_norm: float
    afd_norm: float  # NaN where undefined
    cdf: float
    stderr: float | None = None


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)

    def sorted_rows(self) -> list[ResultRow]:
        return sorted(self.rows, key=lambda r: (r.source, r.threshold_db))

    def select(self, source: str) -> list[ResultRow]:
        return sorted((r for r in self.rows if r.source == source), key=lambda r: r.threshold_db)

    @property
    def sources(self) -> list[str]:
        return sorted({r.source for r in self.rows})


def source_tag(source: Source, cut: int) -> str:
    return f"{source.value}:N={cut}"


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def preset_figure(name: str, f_m: float = PRESET_DOPPLER_HZ, hat_omega: float = 1.0) -> Scenario:
    """Five-hop semi-blind chain: source and four relays move with the same
    maximum Doppler ``f_m``, the destination is fixed. Curves are taken after
    relays T2 and T3 and at the destination."""
    if name not in PRESET_SNR_DB:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESET_SNR_DB)}")
    snr_db = PRESET_SNR_DB[name]
    noise = hat_omega / db_to_linear(snr_db)
    hops = hops_from_stations([f_m] * 5 + [0.0], hat_omega, noise, SemiBlindGain(snr_db))
    return Scenario(
        hops=tuple(hops),
        grid=ThresholdGrid.default(math.sqrt(hat_omega)),
        trials=8,
        outputs=(Source.APPROX, Source.EMPIRICAL),
        cuts=PRESET_CUTS,
        f_norm=f_m,
    )


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def analytic_stats(
    hops: Sequence[HopSpec],
    grid: ThresholdGrid,
    source: Source,
    cfg: QuadratureConfig = QuadratureConfig(),
    mc_seed: int = 0,
) -> SecondOrderStats:
    params = cascade_to_product(hops)
    ys = grid.values
    cdf = np.array([analytic.cdf_product(params, y, cfg) for y in ys])
    err = None
    if source is Source.APPROX:
        lcr = np.array([analytic.lcr_approx(params, y) for y in ys])
    elif source is Source.EXACT:
        if params.n <= analytic.MAX_CUBATURE_BRANCHES:
            lcr = np.array([analytic.lcr_exact(params, y, cfg) for y in ys])
        else:
            est = [analytic.lcr_exact_mc(params, y, cfg, derive_seed(mc_seed, j)) for j, y in enumerate(ys)]
            lcr = np.array([e.value for e in est])
            err = np.array([e.stderr for e in est])
    else:
        raise ValueError(f"{source} is not an analytic source")
    afd = np.full(len(ys), np.nan)
    ok = lcr > 0
    afd[ok] = cdf[ok] / lcr[ok]
    return SecondOrderStats(grid, source, lcr=lcr, afd=afd, cdf=cdf, lcr_stderr=err)


def _trial_stats(scenario: Scenario, trial: int) -> dict[int, SecondOrderStats]:
    seed = derive_seed(scenario.sim.seed, TRIAL_STREAM, trial)
    n_hops = max(scenario.cuts)
    paths = gen_hop_paths(scenario.hops[:n_hops], replace(scenario.sim, seed=seed))
    return {cut: empirical_stats(multiply_paths(paths[:cut]), scenario.grid) for cut in scenario.cuts}


def empirical_trials(scenario: Scenario, workers: int = 1) -> dict[int, SecondOrderStats]:
    """Per-cut empirical statistics pooled over the scenario's trials."""
    trials = range(scenario.trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(lambda t: _trial_stats(scenario, t), trials))
    else:
        per_trial = [_trial_stats(scenario, t) for t in trials]
    return {cut: aggregate_trials([t[cut] for t in per_trial]) for cut in scenario.cuts}


def stats_to_rows(stats: SecondOrderStats, tag: str, f_norm: float) -> list[ResultRow]:
    rows = []
    db = stats.thresholds.db
    for j in range(len(stats.thresholds)):
        err = None if stats.lcr_stderr is None else float(stats.lcr_stderr[j]) / f_norm
        rows.append(
            ResultRow(
                threshold_db=float(db[j]),
                source=tag,
                lcr_norm=float(stats.lcr[j]) / f_norm,
                afd_norm=float(stats.afd[j]) * f_norm,
                cdf=float(stats.cdf[j]),
                stderr=err,
            )
        )
    return rows


def run_scenario(
    scenario: Scenario, cfg: QuadratureConfig = QuadratureConfig(), workers: int = 1
) -> ResultTable:
    table = ResultTable()
    for source in scenario.outputs:
        if source is Source.EMPIRICAL:
            continue
        for cut in scenario.cuts:
            try:
                stats = analytic_stats(
                    scenario.hops[:cut], scenario.grid, source, cfg,
                    mc_seed=derive_seed(scenario.sim.seed, EXACT_STREAM, cut),
                )
            except (ValueError, ArithmeticError, RuntimeError) as exc:
                raise type(exc)(f"{source.value} output, N={cut}: {exc}") from exc
            table.rows.extend(stats_to_rows(stats, source_tag(source, cut), scenario.f_norm))
    if Source.EMPIRICAL in scenario.outputs:
        for cut, stats in empirical_trials(scenario, workers).items():
            table.rows.extend(stats_to_rows(stats, source_tag(Source.EMPIRICAL, cut), scenario.f_norm))
    return table


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.9g}"


def emit_csv(table: ResultTable, destination: TextIO) -> None:
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in table.sorted_rows():
        writer.writerow(
            [_fmt(r.threshold_db), r.source, _fmt(r.lcr_norm), _fmt(r.afd_norm), _fmt(r.cdf), _fmt(r.stderr)]
        )


def table_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    emit_csv(table, buf)
    return buf.getvalue()


def parse_csv(source: TextIO | str) -> ResultTable:
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")

    def num(s):
        return math.nan if s == "" else float(s)

    rows = [
        ResultRow(float(r[0]), r[1], num(r[2]), num(r[3]), num(r[4]), None if r[5] == "" else float(r[5]))
        for r in reader
    ]
    return ResultTable(rows)


# ---------------------------------------------------------------------------
# configuration documents
# ---------------------------------------------------------------------------


def _gain_to_dict(g) -> dict:
    if isinstance(g, UnitGain):
        return {"mode": "unit"}
    if isinstance(g, FixedGain):
        return {"mode": "fixed", "c": g.c}
    return {"mode": "semi_blind", "mean_snr_db": g.mean_snr_db}


def _gain_from_dict(d: dict):
    mode = d.get("mode", "unit")
    if mode == "unit":
        return UnitGain()
    if mode == "fixed":
        return FixedGain(float(d["c"]))
    if mode == "semi_blind":
        snr = d.get("mean_snr_db")
        return SemiBlindGain(None if snr is None else float(snr))
    raise ValueError(f"unknown gain mode {mode!r}")


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "hops": [
            {
                "mean_power": h.mean_power,
                "noise_variance": h.noise_variance,
                "doppler": {
                    "kind": h.doppler.kind.value,
                    "f_prime": h.doppler.f_prime,
                    "f_double_prime": h.doppler.f_double_prime,
                },
                "gain": _gain_to_dict(h.gain_mode),
            }
            for h in sc.hops
        ],
        "sim": {
            "sample_rate": sc.sim.sample_rate,
            "duration": sc.sim.duration,
            "num_sinusoids": sc.sim.num_sinusoids,
            "seed": sc.sim.seed,
        },
        "grid": {"values": list(sc.grid.values), "normalization": sc.grid.normalization},
        "trials": sc.trials,
        "outputs": [o.value for o in sc.outputs],
        "cuts": list(sc.cuts),
        "f_norm": sc.f_norm,
    }


def _grid_from_dict(d: dict) -> ThresholdGrid:
    norm = float(d.get("normalization", 1.0))
    if "values" in d:
        return ThresholdGrid(tuple(d["values"]), norm)
    if "values_db" in d:
        return ThresholdGrid.from_db(d["values_db"], norm)
    return ThresholdGrid.from_db(
        np.linspace(float(d.get("start_db", -20.0)), float(d.get("stop_db", 10.0)), int(d.get("num", 31))),
        norm,
    )


def scenario_from_dict(d: dict) -> Scenario:
    try:
        hops = tuple(
            HopSpec(
                float(h["mean_power"]),
                float(h["noise_variance"]),
                DopplerSpec(
                    DopplerKind(h["doppler"]["kind"]),
                    float(h["doppler"]["f_prime"]),
                    float(h["doppler"].get("f_double_prime", 0.0)),
                ),
                _gain_from_dict(h.get("gain", {})),
            )
            for h in d["hops"]
        )
        s = d.get("sim", {})
        sim = SimConfig(
            sample_rate=None if s.get("sample_rate") is None else float(s["sample_rate"]),
            duration=None if s.get("duration") is None else float(s["duration"]),
            num_sinusoids=int(s.get("num_sinusoids", 32)),
            seed=int(s.get("seed", 0)),
        )
        return Scenario(
            hops=hops,
            sim=sim,
            grid=_grid_from_dict(d.get("grid", {})),
            trials=int(d.get("trials", 8)),
            outputs=tuple(Source(o) for o in d.get("outputs", ["approx", "empirical"])),
            cuts=None if d.get("cuts") is None else tuple(d["cuts"]),
            f_norm=float(d.get("f_norm", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario document: {exc!r}") from exc


def apply_overrides(doc: dict, assignments: Iterable[str]) -> dict:
    """Apply ``dotted.key=value`` assignments; values parse as JSON when possible."""
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValueError(f"override must look like key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = doc
        for part in parts[:-1]:
            node = node[int(part)] if isinstance(node, list) else node.setdefault(part, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            node[last] = value
    return doc
