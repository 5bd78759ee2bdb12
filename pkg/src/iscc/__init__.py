"""Secure ISCC resource allocation for UAV relay networks: channel, sensing,
secrecy and AoI models, the constrained four-objective problem, and the
learned-operator MOEA with its GA and IMODE baselines."""

__version__ = "0.1.0"
