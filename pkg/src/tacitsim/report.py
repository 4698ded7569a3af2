"""Latency and energy reports built from step traces, plus normalized comparisons."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ComparisonError, FormatError
from .opcm import WdmConfig, crossbar_tia_power, transmitter_power
from .xbar import EPCM, OPCM, StepTrace

ENERGY_KEYS = ("adc", "sa", "counter", "tree", "tia", "transmitter")
CSV_COLUMNS = ("design", "network", "steps", "time_s", "energy_J",
               "latency_improvement", "energy_ratio")
ASSUMPTION_NOTE = (
    "Technology constants are illustrative defaults, not measured values; "
    "override them with --tech to model a specific process."
)
AGGREGATION = "geometric mean of per-network ratios"
MW = 1e-3


@dataclass(frozen=True)
class TechConstants:
    step_time_epcm: float = 100e-9
    step_time_opcm: float = 1e-9
    e_adc_conversion: float = 2e-12
    e_sa_activation: float = 0.1e-12
    e_counter_increment: float = 0.05e-12
    e_tree_reduction: float = 0.5e-12
    wdm: WdmConfig = field(default_factory=WdmConfig)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name != "wdm" and v < 0:
                raise ValueError(f"{f.name} must be non-negative, got {v}")

    def step_time(self, backend: str) -> float:
        return self.step_time_opcm if backend == OPCM else self.step_time_epcm

    def to_dict(self) -> dict:
        d = asdict(self)
        d["assumptions"] = ASSUMPTION_NOTE
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TechConstants":
        data = dict(data)
        data.pop("assumptions", None)
        wdm = data.pop("wdm", None)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise FormatError(f"unknown technology constants: {sorted(unknown)}")
        kw = {k: float(v) for k, v in data.items()}
        if wdm is not None:
            kw["wdm"] = WdmConfig(int(wdm.get("capacity", 16)), float(wdm.get("p_laser", 0.0)))
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "TechConstants":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, AttributeError, TypeError) as exc:
            raise FormatError(f"cannot read technology constants {path}: {exc}") from exc


def latency_report(trace: StepTrace, tech: TechConstants) -> tuple[int, float]:
    """Total steps and seconds; each backend's steps use its own step time."""
    seconds = sum(steps * tech.step_time(b) for b, steps in sorted(trace.steps_by_backend().items()))
    return trace.steps, seconds


def energy_breakdown(trace: StepTrace, tech: TechConstants) -> dict[str, float]:
    e = dict.fromkeys(ENERGY_KEYS, 0.0)
    for r in trace:
        e["adc"] += r.adc_conversions * tech.e_adc_conversion
        e["sa"] += r.sa_activations * tech.e_sa_activation
        e["counter"] += r.counter_increments * tech.e_counter_increment
        e["tree"] += r.tree_reductions * tech.e_tree_reduction
        if r.backend == OPCM:
            t = r.steps * tech.step_time_opcm
            e["tia"] += len(r.tile_ids) * crossbar_tia_power(r.cols) * MW * t
            e["transmitter"] += transmitter_power(tech.wdm, r.rows) * MW * t
    return e


@dataclass
class LayerCost:
    index: int
    kind: str
    host: bool
    steps: int = 0
    time_s: float = 0.0
    energy: dict = field(default_factory=lambda: dict.fromkeys(ENERGY_KEYS, 0.0))
    host_macs: int = 0

    @property
    def energy_total(self) -> float:
        return sum(self.energy.values())


@dataclass
class CostReport:
    design: str
    network: str
    workload_hash: str
    total_steps: int
    total_time: float
    energy: dict
    layers: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def total_energy(self) -> float:
        return sum(self.energy.values())

    def to_dict(self) -> dict:
        return {
            "design": self.design,
            "network": self.network,
            "workload_hash": self.workload_hash,
            "total_steps": self.total_steps,
            "total_time_s": self.total_time,
            "total_energy_J": self.total_energy,
            "energy_J": self.energy,
            "layers": [
                {"index": l.index, "kind": l.kind, "host": l.host, "steps": l.steps,
                 "time_s": l.time_s, "energy_J": l.energy, "host_macs": l.host_macs}
                for l in self.layers
            ],
            "constants": self.constants,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CostReport":
        try:
            layers = [LayerCost(l["index"], l["kind"], l["host"], l["steps"], l["time_s"],
                                dict(l["energy_J"]), l.get("host_macs", 0))
                      for l in d.get("layers", [])]
            return cls(d["design"], d["network"], d["workload_hash"], int(d["total_steps"]),
                       float(d["total_time_s"]), dict(d["energy_J"]), layers,
                       d.get("constants", {}), d.get("metadata", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed report: missing or bad field {exc}") from exc

    @classmethod
    def load(cls, path) -> "CostReport":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read report {path}: {exc}") from exc

    def to_csv(self) -> str:
        row = {"design": self.design, "network": self.network, "steps": self.total_steps,
               "time_s": self.total_time, "energy_J": self.total_energy,
               "latency_improvement": "", "energy_ratio": ""}
        return _csv_text([row])


def energy_report(trace: StepTrace, tech: TechConstants, design: str = "",
                  network: str = "", workload_hash: str = "") -> CostReport:
    """Fold a trace into a :class:`CostReport` with per-layer sub-reports."""
    steps, seconds = latency_report(trace, tech)
    layers = []
    for idx in sorted({r.layer for r in trace}):
        sub = trace.only_layer(idx)
        s, t = latency_report(sub, tech)
        kind = sub.records[0].kind
        layers.append(LayerCost(idx, kind, False, s, t, energy_breakdown(sub, tech)))
    return CostReport(design, network, workload_hash, steps, seconds,
                      energy_breakdown(trace, tech), layers, tech.to_dict())


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class ComparisonRow:
    design: str
    network: str
    steps: float | None
    time_s: float | None
    energy_J: float | None
    latency_improvement: float
    energy_ratio: float


@dataclass
class ComparisonTable:
    baseline: str
    rows: list

    def designs(self) -> list[str]:
        return list(dict.fromkeys(r.design for r in self.rows))

    def networks(self) -> list[str]:
        return list(dict.fromkeys(r.network for r in self.rows if r.network != "geomean"))

    def row(self, design: str, network: str) -> ComparisonRow:
        for r in self.rows:
            if r.design == design and r.network == network:
                return r
        raise KeyError((design, network))

    def to_csv(self) -> str:
        return _csv_text([asdict(r) for r in self.rows])

    def to_json(self) -> str:
        body = {"baseline": self.baseline, "aggregation": AGGREGATION,
                "rows": [asdict(r) for r in self.rows]}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _ratio(num: float, den: float) -> float:
    if num == den:
        return 1.0
    if den == 0:
        return math.inf
    return num / den


def geometric_mean(values) -> float:
    values = list(values)
    if not values:
        return math.nan
    if any(v == 0 for v in values):
        return 0.0
    if any(math.isinf(v) for v in values):
        return math.inf
    return math.exp(sum(math.log(v) for v in values) / len(values))


def compare(reports, baseline_label: str) -> ComparisonTable:
    """Normalize every design against ``baseline_label``, network by network.

    Latency improvement is ``baseline_time / design_time``; energy ratio is
    ``design_energy / baseline_energy``. Per-network ratios are aggregated
    with a geometric mean.
    """
    reports = list(reports)
    by_net: dict[str, dict[str, CostReport]] = {}
    for rep in reports:
        designs = by_net.setdefault(rep.network, {})
        if rep.design in designs:
            raise ComparisonError(f"duplicate report for design {rep.design!r} on {rep.network!r}")
        designs[rep.design] = rep
    rows = []
    per_design: dict[str, list[tuple[float, float]]] = {}
    for net, designs in by_net.items():
        if baseline_label not in designs:
            raise ComparisonError(f"network {net!r} has no {baseline_label!r} baseline report")
        base = designs[baseline_label]
        for label, rep in designs.items():
            if rep.workload_hash != base.workload_hash:
                raise ComparisonError(
                    f"{label!r} on {net!r} ran workload {rep.workload_hash[:12]}, "
                    f"baseline ran {base.workload_hash[:12]}"
                )
            lat = _ratio(base.total_time, rep.total_time)
            en = _ratio(rep.total_energy, base.total_energy)
            rows.append(ComparisonRow(label, net, rep.total_steps, rep.total_time,
                                      rep.total_energy, lat, en))
            per_design.setdefault(label, []).append((lat, en))
    for label, ratios in per_design.items():
        rows.append(ComparisonRow(label, "geomean", None, None, None,
                                  geometric_mean(r[0] for r in ratios),
                                  geometric_mean(r[1] for r in ratios)))
    return ComparisonTable(baseline_label, rows)


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in CSV_COLUMNS})
    return buf.getvalue()
