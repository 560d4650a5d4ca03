"""Desk-scale text-to-3D lab.

Two-phase pipeline: progressive geometry construction + polishing, then
domain-guided texture enhancing. Every diffusion prior is a small model
trained in-repo on a procedurally generated synthetic world, so all
score-distillation objectives can be checked against analytic or
brute-force oracles.
"""

__version__ = "0.1.0"
