"""treesim — process-improvement workbench.

Mine a process tree and its performance parameters from an event log,
edit both, re-execute the process with a seeded discrete-event simulator,
and score the what-if scenario against reality with an exact Earth-Mover
Distance over trace variants.
"""

__version__ = "0.1.0"
