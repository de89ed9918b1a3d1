"""Numerical tolerances and fixed parameters shared across the package."""

# Absolute tolerance for identities of exact finite-dimensional algebra.
EXACT_TOL = 1e-12

# An eigenvalue modulus closer than this to 1 is treated as non-hyperbolic.
HYPERBOLIC_TOL = 1e-9

# Largest supported ambient dimension for the exterior algebra.
MAX_DIM = 8

# Composite Gauss-Legendre time quadrature.
GAUSS_NODES = 8
PANEL_LENGTH = 0.5
MAX_REFINE_LEVEL = 6

# Bump profiles are supported in (BUMP_DELTA, 1 - BUMP_DELTA).
BUMP_DELTA = 0.05

# Central finite differences along the flow.
FD_STEP = 1e-4

# Split vectors with a component below this norm are dropped from expansions.
SPLIT_DROP_NORM = 1e-13

# Rank-1 Korobov lattice for 4-dimensional manifold integrals (N = 2**16),
# parameter chosen by exhaustive search minimising the P_2 criterion.
LATTICE_N = 2**16
KOROBOV_PARAMETER = 19303
LATTICE_SHIFTS = 8

# A closed orbit must return within this distance.
ORBIT_RETURN_TOL = 1e-9

# Largest |det(A^p - I)| for which periodic points are enumerated.
MAX_PERIODIC_POINTS = 10**6
