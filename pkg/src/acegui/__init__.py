"""Actor-critic GUI automation agent over a deterministic simulated desktop."""

__version__ = "0.1.0"
