"""Numerics for half-Lie groups N x| G with continuous actions.

The package realizes semidirect products of finite-dimensional (or
truncated) Banach-Lie groups, exact step-function controls and their
evolution operators, product-formula experiments (strong Trotter,
Trotter pairs, group commutators), the quantitative chart bounds behind
them, smooth-vector seminorms, and cocycle smoothing for one-parameter
actions.
"""

__version__ = "0.1.0"
