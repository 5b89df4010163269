"""Adaptive online learning with memory, and online control of
time-varying linear dynamical systems.

Subpackages:
    oco       -- decision sets, losses with memory, projected OGD, trajectory metrics
    experts   -- adaptive experts with shrinking (full and sparse), working sets
    lds       -- time-varying linear system simulators and disturbance sources
    control   -- LQR, disturbance-feedback control (GPC), adaptive meta-controller
    pendulum  -- inverted pendulum environment and iLQR planner
    harness   -- experiment orchestration, comparators, regret reports, CSV/JSON
"""

__version__ = "0.1.0"
