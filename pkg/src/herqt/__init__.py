"""Heralded quantum-state and teleportation simulation toolkit.

Models spontaneous four-wave mixing in a calibrated step-index fiber,
the joint spectral amplitude and its Schmidt structure, heralded photon
(-added) states, hybrid entangled resources, and a broadband quantum
teleportation protocol evaluated on a truncated Fock space.
"""

__version__ = "0.1.0"
