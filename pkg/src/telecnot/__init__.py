"""Simulator for a teleportation-based C-NOT gate built from a four-photon cluster state."""

__version__ = "0.1.0"
