"""Desk-scale laboratory for quantum Metropolis-Hastings optimization.

Modules: ``statevector`` (exact simulation), ``problems`` (costs and exact
oracles), ``walk`` (the coin-based walk operator), ``classical`` (matched
Metropolis-Hastings baseline), ``tts`` (time-to-solution comparison),
``qbird`` (renormalization/downsampling inference) and ``cli``.
"""

__version__ = "0.1.0"
