"""haptikit: digital twin of a coupled-trigger 1-DOF kinesthetic haptic
device, its bench characterization experiments, and the user-study stack
(targeting/tracking harness, session service, statistics pipeline)."""

__version__ = "0.1.0"
