"""Vibrational ladder climbing and photodissociation of a diatomic-like stretch in an infrared cavity.

Grid-based quantum dynamics of a molecular bond coordinate q coupled to one
cavity-mode quadrature x, with split-operator propagation, imaginary-time
relaxation, mean-field comparisons and dissociation-map sweeps.
"""

__version__ = "0.1.0"
