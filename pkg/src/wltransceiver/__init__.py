"""Joint transmit/receive waveform design for improper SOS data sequences
over band-limited channels with cyclostationary interference.

The usual entry point is :func:`optimize_scenario`, which returns the
optimal transmit waveform, the widely linear MMSE receiver and the
achieved MSE for a :class:`~wltransceiver.scenario.Scenario`.
"""

__version__ = '0.1.0'

from .receiver import (ReceiverSolution, Waveform, mse_matrix, mse_scalar,
                       optimal_receiver)
from .scenario import (Scenario, improper_qam, link_bins, load_scenario,
                       random_scenario, unbalanced_qam)
from .simulate import SimConfig, run_link
from .spectra import GridSpec, build_grid
from .transmitter import optimize_link, optimize_scenario

__all__ = ['GridSpec', 'ReceiverSolution', 'Scenario', 'SimConfig',
           'Waveform', 'build_grid', 'improper_qam', 'link_bins',
           'load_scenario', 'mse_matrix', 'mse_scalar', 'optimal_receiver',
           'optimize_link', 'optimize_scenario', 'random_scenario',
           'run_link', 'unbalanced_qam']
