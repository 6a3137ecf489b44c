"""Monte-Carlo simulation of single photons in reconfigurable linear optical circuits."""

__version__ = "0.1.0"

from .circuit import (TransitionMatrix, OutputDistribution, chip_unitary, compose, coupler_matrix, embed,
                      output_distribution, phase_matrix)
from .netlist import CircuitSpec, Element, elaborate, format_netlist, load_chip, load_netlist, parse_netlist
from .emitter import EmissionStream, EmitterParams, emit_stream, g2_analytic
from .detection import ChannelParams, DetectorRecord, click_rate, propagate
from .analysis import (CorrelationHistogram, FringeResult, cross_correlate, fit_fringe, jitter_convolve_oracle,
                       visibility)
