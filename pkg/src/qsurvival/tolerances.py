"""Numerical tolerances shared across the package."""

#: Agreement between independent propagation routes (closed form, Fourier, stepping).
PROPAGATOR_ATOL = 1e-10

#: Norm conservation of unitary evolution.
UNITARITY_ATOL = 1e-12

#: Threshold below which an occupation probability counts as exactly zero.
EXACT_ZERO = 1e-14

#: Largest negative first-detection value accepted as rounding noise.
MONOTONICITY_ATOL = 1e-12

#: Default truncation of the residual probability mass of unbounded laws.
TAIL_MASS = 1e-12

#: Relative tolerance requested from adaptive quadrature.
QUADRATURE_RTOL = 1e-9
