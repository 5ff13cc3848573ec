"""Survival and first-detection statistics of quantum particles on a ring under
projective measurements at random times.

Modules
-------
qrw, tbm
    Coined quantum walk and tight-binding ring: propagators and return probabilities.
intervals
    Laws of the time between measurements, samplers and expectations.
engine
    Measurement sequences and deterministic ensembles.
analytics
    Closed forms for the projected scheme and large-deviation rate functions.
scaling
    Power-law fits, crossover scales and data collapse.
config, runner, cli
    TOML configs, subcommands and the command-line entry point.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
