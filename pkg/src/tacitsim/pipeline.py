"""End-to-end network simulation: run, validate and workload hashing.

Full-precision boundary layers run on the host (the reference engine) and
are reported separately; binary hidden layers are compiled onto crossbars and
executed on the configured backend. All vectors a layer sees across the whole
input set (every sample, every conv patch) are issued in input order, so WDM
batches span samples.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .bnn import (BINARY, DotVector, binarize_boundary, binary_layer_output,
                  full_layer_forward, layer_input_vectors, reference_trace, check_input)
from .errors import ConfigurationError, SimError, UnsupportedBackendError
from .mapping import CUSTBINARY, MAPPINGS, TACIT, CrossbarDims, MappedLayer, layout
from .opcm import WdmConfig, execute_layer_opcm
from .report import AGGREGATION, CostReport, LayerCost, TechConstants, energy_report
from .xbar import DEFAULT_COUNTER_BITS, EPCM, OPCM, AdcModel, StepTrace, execute_layer

BACKENDS = (EPCM, OPCM)
DESIGN_NAMES = {
    (CUSTBINARY, EPCM): "custbinary-epcm",
    (TACIT, EPCM): "tacit-epcm",
    (TACIT, OPCM): "tacit-opcm",
}


@dataclass(frozen=True)
class RunConfig:
    mapping: str = TACIT
    backend: str = EPCM
    crossbar: CrossbarDims = field(default_factory=lambda: CrossbarDims(128, 128))
    adc_bits: int | None = None
    wdm_k: int = 16
    tech: TechConstants = field(default_factory=TechConstants)
    seed: int = 0
    counter_bits: int = DEFAULT_COUNTER_BITS
    columns_per_adc: int = 1

    def __post_init__(self):
        if self.mapping not in MAPPINGS:
            raise ConfigurationError(f"unknown mapping {self.mapping!r}")
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if (self.mapping, self.backend) == (CUSTBINARY, OPCM):
            raise UnsupportedBackendError("custbinary mapping has no oPCM/WDM execution path")
        if self.wdm_k < 1:
            raise ConfigurationError(f"--wdm-k must be >= 1, got {self.wdm_k}")
        if self.adc_bits is not None and self.adc_bits < 1:
            raise ConfigurationError(f"ADC resolution must be >= 1 bit, got {self.adc_bits}")
        if self.counter_bits < 1:
            raise ConfigurationError("counter width must be >= 1")
        if self.backend == OPCM and self.tech.wdm.capacity != self.wdm_k:
            object.__setattr__(self, "tech", replace(self.tech, wdm=replace(self.tech.wdm, capacity=self.wdm_k)))

    @property
    def design(self) -> str:
        return DESIGN_NAMES[(self.mapping, self.backend)]

    @property
    def adc(self) -> AdcModel:
        if self.adc_bits is None:
            return AdcModel(columns_per_adc=self.columns_per_adc)
        return AdcModel(self.adc_bits, "quantized", columns_per_adc=self.columns_per_adc)

    def to_dict(self) -> dict:
        return {
            "mapping": self.mapping,
            "backend": self.backend,
            "crossbar": str(self.crossbar),
            "adc": "ideal" if self.adc_bits is None else self.adc_bits,
            "wdm_k": self.wdm_k if self.backend == OPCM else None,
            "seed": self.seed,
            "counter_bits": self.counter_bits if self.mapping == CUSTBINARY else None,
            "columns_per_adc": self.columns_per_adc,
        }


def compile_network(net, config: RunConfig) -> dict[int, MappedLayer]:
    mapped = {}
    for i, layer in enumerate(net.layers):
        if layer.precision == BINARY:
            try:
                mapped[i] = layout(layer.weights, config.crossbar, config.mapping)
            except SimError as exc:
                raise type(exc)(f"layer {i}: {exc}") from exc
    return mapped


def execute_mapped(mapped: MappedLayer, vectors, config: RunConfig,
                   layer_index: int) -> tuple[list[DotVector], StepTrace]:
    try:
        if config.backend == OPCM:
            return execute_layer_opcm(mapped, vectors, WdmConfig(config.wdm_k), config.adc,
                                      layer_index)
        return execute_layer(mapped, vectors, f"{EPCM}_{mapped.kind}", config.adc,
                             config.counter_bits, layer_index)
    except SimError as exc:
        raise type(exc)(f"layer {layer_index}: {exc}") from exc


def _split(items, counts):
    out, k = [], 0
    for c in counts:
        out.append(items[k:k + c])
        k += c
    return out


@dataclass
class SimulationResult:
    scores: list
    predicted: list
    trace: StepTrace
    host_macs: dict


def _host_macs(layer) -> int:
    if layer.kind == "conv2d":
        return layer.out_size * layer.geometry.patch_len
    return layer.in_size * layer.out_size


def simulate(net, inputs, config: RunConfig, mapped: dict | None = None) -> SimulationResult:
    """Forward every input through ``net`` with binary layers on the crossbar."""
    acts = []
    for j, x in enumerate(inputs):
        try:
            acts.append(check_input(net, x))
        except SimError as exc:
            raise type(exc)(f"input {j}: {exc}") from exc
    mapped = compile_network(net, config) if mapped is None else mapped
    traces = []
    host = {}
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        if layer.precision == BINARY:
            per_sample = [layer_input_vectors(layer, a) for a in acts]
            flat = [v for vs in per_sample for v in vs]
            dots, trace = execute_mapped(mapped[i], flat, config, i)
            traces.append(trace)
            acts = [binary_layer_output(layer, d)
                    for d in _split(dots, [len(vs) for vs in per_sample])]
        else:
            host[i] = _host_macs(layer) * len(acts)
            outs = [full_layer_forward(layer, a) for a in acts]
            acts = outs if i == last else [binarize_boundary(layer, o) for o in outs]
    scores = [np.asarray(a).reshape(-1) for a in acts]
    return SimulationResult(scores, [int(np.argmax(s)) for s in scores],
                            StepTrace.concat(traces), host)


def workload_hash(*blobs: bytes) -> str:
    h = hashlib.sha256()
    for b in blobs:
        h.update(len(b).to_bytes(8, "little"))
        h.update(b)
    return h.hexdigest()


def outputs_csv(result: SimulationResult) -> str:
    classes = len(result.scores[0]) if result.scores else 0
    lines = ["input,predicted," + ",".join(f"score_{k}" for k in range(classes))]
    for j, (s, p) in enumerate(zip(result.scores, result.predicted)):
        lines.append(f"{j},{p}," + ",".join(repr(v.item()) for v in s))
    return "\n".join(lines) + "\n"


def build_report(net, config: RunConfig, result: SimulationResult, workload_id: str,
                 input_count: int) -> CostReport:
    rep = energy_report(result.trace, config.tech, config.design, net.name, workload_id)
    by_index = {l.index: l for l in rep.layers}
    layers = []
    for i, layer in enumerate(net.layers):
        if layer.precision == BINARY:
            lc = by_index.get(i) or LayerCost(i, "", False)
            lc.kind = layer.kind
            layers.append(lc)
        else:
            layers.append(LayerCost(i, layer.kind, True, host_macs=result.host_macs.get(i, 0)))
    rep.layers = layers
    rep.metadata = {
        "config": config.to_dict(),
        "inputs": input_count,
        "aggregation": AGGREGATION,
        "host_layers": [i for i, l in enumerate(net.layers) if l.precision != BINARY],
        "note": "host layers run on the reference engine and are excluded from crossbar totals",
    }
    return rep


def run(config: RunConfig, net, inputs, workload_id: str = "") -> tuple[CostReport, SimulationResult]:
    inputs = list(inputs)
    result = simulate(net, inputs, config)
    return build_report(net, config, result, workload_id, len(inputs)), result


@dataclass
class ValidationResult:
    passed: bool
    layers_checked: int
    vectors_checked: int
    divergence: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "layers_checked": self.layers_checked,
                "vectors_checked": self.vectors_checked, "divergence": self.divergence,
                "diagnostics": self.diagnostics}


def validate(config: RunConfig, net, inputs, fault: tuple | None = None) -> ValidationResult:
    """Compare every binary layer's simulated dots with the reference engine.

    Each layer is fed the reference activations, so a divergence is pinned to
    the layer that produced it. ``fault`` is ``(layer, tile_id, row, col)``:
    flip that device bit before running (fault injection).
    """
    inputs = list(inputs)
    refs = [reference_trace(net, x) for x in inputs]
    mapped = compile_network(net, config)
    if fault is not None:
        li, tile_id, row, col = fault
        m = mapped[li]
        mapped[li] = m.replace_tile(m.tile(tile_id).with_flipped_cell(row, col))
    diag = {"adc": "ideal" if config.adc_bits is None else config.adc_bits}
    layers = vectors = 0
    for i, layer in enumerate(net.layers):
        if layer.precision != BINARY:
            continue
        layers += 1
        per_sample = [layer_input_vectors(layer, r.activations[i]) for r in refs]
        flat = [v for vs in per_sample for v in vs]
        dots, _ = execute_mapped(mapped[i], flat, config, i)
        vectors += len(flat)
        sim = _split(dots, [len(vs) for vs in per_sample])
        for j, (ref_dots, sim_dots) in enumerate(zip((r.dots[i] for r in refs), sim)):
            for p, (a, b) in enumerate(zip(ref_dots, sim_dots)):
                bad = np.flatnonzero(a.values != b.values)
                if bad.size:
                    k = int(bad[0])
                    div = {"layer": i, "input": j, "vector": p, "neuron": k,
                           "expected": int(a.values[k]), "actual": int(b.values[k])}
                    if fault is not None:
                        div["fault"] = {"layer": fault[0], "tile": fault[1],
                                        "row": fault[2], "col": fault[3]}
                    if config.adc_bits is not None:
                        diag.update(_quantization_diagnostics(config, mapped[i]))
                    return ValidationResult(False, layers, vectors, div, diag)
    return ValidationResult(True, layers, vectors, None, diag)


def _quantization_diagnostics(config: RunConfig, mapped: MappedLayer) -> dict:
    adc = config.adc.for_rows(mapped.dims.rows)
    return {
        "adc_bits": adc.bits,
        "adc_full_scale": adc.max_level,
        "adc_step": adc.step,
        "exact_bits_needed": AdcModel().for_rows(mapped.dims.rows).bits,
        "max_rounding_error": adc.step / 2,
    }
