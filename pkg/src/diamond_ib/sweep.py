"""Rate sweeps over SNR or fronthaul capacity and their tabular output."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .channel import ChannelConfig
from .matrix_stat import DEFAULT_QUAD, substream
from .mmse import mmse_rate
from .qci import InfeasibleBudgetError, QuantGrid, build_quantile_grid, noise_level_samples, qci_rate
from .upper_bound import upper_bound_rate

__all__ = [
    "MODES",
    "PRESETS",
    "RatePoint",
    "SweepSpec",
    "emit",
    "format_points",
    "preset",
    "read_json",
    "run_sweep",
]

MODES = ("snr_sweep", "capacity_sweep", "single_point")
NA = "NA"
QCI_TOL = 1e-7
SCALAR_TOL = 1e-12


@dataclass(frozen=True)
class SweepSpec:
    mode: str
    grid: tuple
    base: ChannelConfig
    qci_bits: tuple = (1, 2, 3, 4)
    samples: int = 10_000
    seed: int = 0
    grid_samples: int = 1_000_000
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if not all(math.isfinite(g) for g in grid):
            raise ValueError("grid values must be finite")
        if self.mode == "capacity_sweep" and grid[0] < 0:
            raise ValueError("capacities must be nonnegative")
        if self.mode == "single_point" and len(grid) != 1:
            raise ValueError("single_point takes exactly one grid value (the SNR in dB)")
        bits = tuple(int(b) for b in self.qci_bits)
        if any(b < 0 for b in bits) or len(set(bits)) != len(bits):
            raise ValueError("qci_bits must be distinct nonnegative integers")
        if self.samples < 1 or self.grid_samples < 1:
            raise ValueError("sample counts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "qci_bits", bits)

    def point_config(self, value: float) -> ChannelConfig:
        if self.mode == "capacity_sweep":
            return self.base.with_(C1=value, C2=value)
        return ChannelConfig.from_snr_db(value, M=self.base.M, N1=self.base.N1,
                                         N2=self.base.N2, C1=self.base.C1, C2=self.base.C2)

    def with_(self, **changes) -> "SweepSpec":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return SweepSpec(**d)


def preset(name: str) -> SweepSpec:
    """Built-in sweeps: ``fig2`` varies SNR at C = 40, ``fig3`` varies C at 40 dB."""
    if name == "fig2":
        return SweepSpec("snr_sweep", tuple(range(0, 51, 10)),
                         ChannelConfig(M=3, N1=3, N2=3, C1=40.0, C2=40.0))
    if name == "fig3":
        return SweepSpec("capacity_sweep", tuple(range(5, 61, 5)),
                         ChannelConfig.from_snr_db(40.0, M=3, N1=3, N2=3))
    raise ValueError(f"unknown preset {name!r}")


PRESETS = ("fig2", "fig3")


@dataclass
class RatePoint:
    snr_db: float
    c_bits: float
    r_ub: float | None
    r_lb1: dict = field(default_factory=dict)   # B -> rate, or None when infeasible
    r_lb2: float | None = None
    r_lb2_stderr: float | None = None
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _reference_grids(spec: SweepSpec):
    """Noise-level grids at unit noise power, one per relay and bit count.

    The zero-forcing noise power scales linearly with ``sigma2``, so each
    sweep point just rescales these.
    """
    if spec.base.M > min(spec.base.N1, spec.base.N2):
        return None
    grids = {}
    for k, N_k in ((1, spec.base.N1), (2, spec.base.N2)):
        s = noise_level_samples(spec.base.M, N_k, 1.0, spec.grid_samples, substream(spec.seed, 0, k))
        for B in spec.qci_bits:
            grids[k, B] = build_quantile_grid(s, B, 1.0)
    return grids


def _evaluate(args) -> RatePoint:
    spec, index, value, grids = args
    cfg = spec.point_config(value)
    pt = RatePoint(snr_db=cfg.snr_db if spec.mode == "capacity_sweep" else value,
                   c_bits=cfg.C1 if cfg.C1 == cfg.C2 else math.nan, r_ub=None)
    try:
        pt.r_ub = upper_bound_rate(cfg).rate
    except Exception as exc:  # recorded per point, the sweep carries on
        pt.errors.append(f"r_ub: {exc}")
    for B in spec.qci_bits:
        if grids is None:
            pt.r_lb1[B] = None
            continue
        try:
            g1: QuantGrid = grids[1, B].scaled(cfg.sigma2)
            g2: QuantGrid = grids[2, B].scaled(cfg.sigma2)
            pt.r_lb1[B] = qci_rate(cfg, g1, g2, tol=QCI_TOL, inner_tol=SCALAR_TOL).rate
        except InfeasibleBudgetError:
            pt.r_lb1[B] = None
        except Exception as exc:
            pt.r_lb1[B] = None
            pt.errors.append(f"r_lb1_B{B}: {exc}")
    try:
        m = mmse_rate(cfg, spec.samples, seed=spec.seed, key=(1, index))
        pt.r_lb2, pt.r_lb2_stderr = m.rate, m.mc_std_err
    except Exception as exc:
        pt.errors.append(f"r_lb2: {exc}")
    return pt


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[RatePoint]:
    """Evaluate every grid value; rows come back in grid order.

    Each point draws from its own substream, so ``jobs`` changes only the
    wall time, never the numbers.
    """
    grids = _reference_grids(spec)
    tasks = [(spec, i, v, grids) for i, v in enumerate(spec.grid)]
    if jobs <= 1 or len(tasks) == 1:
        return [_evaluate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate, tasks))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return NA
    return repr(float(x))


def _columns(bits):
    return ["snr_db", "c_bits", "r_ub", *[f"r_lb1_B{b}" for b in bits], "r_lb2", "r_lb2_stderr"]


def _metadata(spec: SweepSpec) -> dict:
    from . import __version__
    return {
        "version": __version__,
        "mode": spec.mode,
        "seed": spec.seed,
        "samples": spec.samples,
        "grid_samples": spec.grid_samples,
        "channel": spec.base.to_dict(),
        "qci_bits": list(spec.qci_bits),
        "tolerances": {
            "qci_gap": QCI_TOL,
            "scalar": SCALAR_TOL,
            "quad_epsabs": DEFAULT_QUAD.epsabs,
            "quad_epsrel": DEFAULT_QUAD.epsrel,
        },
    }


def format_points(points: list[RatePoint], fmt: str, spec: SweepSpec) -> str:
    if not points:
        raise ValueError("nothing to emit")
    bits = spec.qci_bits
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_columns(bits))
        for p in points:
            w.writerow([_num(p.snr_db), _num(p.c_bits), _num(p.r_ub),
                        *[_num(p.r_lb1.get(b)) for b in bits],
                        _num(p.r_lb2), _num(p.r_lb2_stderr)])
        return buf.getvalue()
    if fmt == "json":
        rows = []
        for p in points:
            row = {"snr_db": p.snr_db, "c_bits": None if math.isnan(p.c_bits) else p.c_bits,
                   "r_ub": p.r_ub}
            for b in bits:
                v = p.r_lb1.get(b)
                row[f"r_lb1_B{b}"] = NA if v is None else v
            row.update(r_lb2=p.r_lb2, r_lb2_stderr=p.r_lb2_stderr, errors=list(p.errors))
            rows.append(row)
        doc = {"metadata": _metadata(spec), "columns": _columns(bits), "points": rows}
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(points: list[RatePoint], fmt: str, spec: SweepSpec, path: str | None = None) -> str:
    """Render the points and write them to ``path`` when given; returns the text."""
    text = format_points(points, fmt, spec)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_json(path: str) -> tuple[dict, list[RatePoint]]:
    """Load a JSON sweep file back into ``RatePoint`` rows."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    pts = []
    for row in doc["points"]:
        lb1 = {int(k[len("r_lb1_B"):]): (None if v == NA else v)
               for k, v in row.items() if k.startswith("r_lb1_B")}
        pts.append(RatePoint(snr_db=row["snr_db"],
                             c_bits=math.nan if row["c_bits"] is None else row["c_bits"],
                             r_ub=row["r_ub"], r_lb1=lb1, r_lb2=row["r_lb2"],
                             r_lb2_stderr=row["r_lb2_stderr"], errors=row.get("errors", [])))
    return doc["metadata"], pts

