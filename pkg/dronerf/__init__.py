"""
dronerf - federated open-set RF emitter authentication.

Synthesizes drone-controller RF windows, turns them into spectrograms, trains a
lightweight spectrogram network with the class-anchor loss under a zero-trust
federated averaging protocol, and evaluates known-class accuracy plus
unknown-class rejection.
"""

__version__ = "0.3.0"
