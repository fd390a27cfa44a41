"""Distributed constrained-RL monitoring simulator.

Agents on a grid patrol zones whose long-run occupancy must meet thresholds.
Each agent keeps its own copy of the Lagrange multipliers, learns the global
zone rewards by max-consensus gossip, and acts on its local multiplier copy.
"""

from gossipdual.errors import ConfigError, ContractViolation, DecodeError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ContractViolation", "DecodeError", "__version__"]
