"""Gate-level netlists: IR, word arithmetic, lowering passes, text and Verilog I/O."""

from .core import GATE_KINDS, Builder, Gate, Netlist, NetlistError, Port
from .io import dumps, load_netlist, loads, save_netlist, to_verilog
from .lowering import (ADC_CELL, ENCODER_CELL, AdcSpec, LoweringError, UtilizationReport,
                       compute_unused_bits, hidden_bounds, lower_adc, lower_argmax,
                       lower_encoder, lower_full, lower_layer1, lower_layer2)

__all__ = [
    "ADC_CELL", "AdcSpec", "Builder", "ENCODER_CELL", "GATE_KINDS", "Gate", "LoweringError",
    "Netlist", "NetlistError", "Port", "UtilizationReport", "compute_unused_bits", "dumps",
    "hidden_bounds", "load_netlist", "loads", "lower_adc", "lower_argmax", "lower_encoder",
    "lower_full", "lower_layer1", "lower_layer2", "save_netlist", "to_verilog",
]
