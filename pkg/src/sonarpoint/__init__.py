"""One-dimensional sonar finger tracking for around-device input, with a
selection-trigger simulator and Fitts'-law evaluation tools.

Modules:

- ``signals``: carrier, I/Q demodulation, WAV I/O
- ``tracking``: static-vector removal, phase unwrapping, cursor smoothing
- ``simulate``: synthetic echoes, linear-stage trials, IMU streams
- ``triggers``: double-crossing, dwell and pinch selection state machines
- ``fitts``: task protocols and throughput metrics
- ``agent``: scripted participant used to exercise the triggers
- ``cli``: the ``sonarpoint`` command
"""
from .errors import ConfigurationError, ContractViolation, SonarPointError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigurationError", "ContractViolation", "SonarPointError", "__version__"]
