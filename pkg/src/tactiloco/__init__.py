"""Desk-scale surrogate world and training harness for tactile-aware
hierarchical loco-manipulation policies."""

__version__ = "0.1.0"

__all__ = [
    "checkpoint",
    "cli",
    "commands",
    "config",
    "demo_tasks",
    "demos",
    "diffusion",
    "gait",
    "kinematics",
    "lowlevel",
    "randomize",
    "rewards",
    "runtime",
    "simworld",
    "tactile",
]
