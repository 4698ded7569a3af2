"""Step-accurate crossbar simulator for binarized neural network inference.

Implements the TacitMap (vertical, ADC read-out) and CustBinaryMap
(horizontal, sense-amplifier read-out) weight mappings on electronic PCM
crossbars, WDM-batched execution on optical PCM crossbars, and latency and
energy reports derived from the recorded step traces.
"""

__version__ = "0.1.0"

from .bits import BitMatrix, BitVector, complement, popcount, xnor
from .bnn import (BnnLayer, BnnNetwork, ConvGeometry, DotResult, DotVector, binarize,
                  im2col_lower, reference_infer, reference_layer_forward, xnor_popcount_dot,
                  xnor_popcount_matrix)
from .mapping import (CrossbarDims, MappedLayer, TilePlacement, custbinary_encode_input,
                      custbinary_layout, tacitmap_encode_input, tacitmap_layout)
from .opcm import (WdmBatch, WdmConfig, crossbar_tia_power, execute_layer_opcm, mmm_step,
                   transmitter_power, wdm_batch)
from .report import CostReport, TechConstants, compare, energy_report, latency_report
from .xbar import (AdcModel, StepRecord, StepTrace, execute_layer, global_popcount_tree,
                   local_popcount, pcsa_read, vmm_step)
