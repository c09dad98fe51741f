"""Identifiability of interventional SDEs from stationary moments."""

import jax

# Everything in this library assumes float64; enable it before any jax
# arrays are created anywhere downstream.
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
