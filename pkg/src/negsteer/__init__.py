"""Adaptive negative-prompt steering for flow-matching samplers.

Library layout:
  guidance  -- answer normalization, negative ledger, query schedule, modes
  sampler   -- Euler flow sampler with negative-prompt CFG and the query loop
  world     -- analytic Gaussian-mixture sandbox with closed-form velocities
  metrics   -- Vendi, relative typicality, total variance, KDE/PCA artifacts
  harness   -- seeded batch experiments, run store, comparisons, figure data
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def preset_world_path(name: str) -> Path:
    """Path to a shipped world definition ("pet", "two_mode", "three_mode")."""
    ref = resources.files("negsteer") / "worlds" / f"{name}.yaml"
    return Path(str(ref))
