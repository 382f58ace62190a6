"""Default numerical tolerances, shared across the toolkit.

TOL_ALG guards algebraic identities (relative, double-precision
eigendecomposition accuracy).  TOL_PSD_FACTOR scales with the operator norm
and floors eigenvalues before square roots.  TOL_GRAPH separates genuine
graph violations from roundoff; TOL_GAP decides when (1 - z*z) counts as
invertible.  All are overridable per call.
"""

TOL_ALG = 1e-10
TOL_PSD_FACTOR = 1e-12
TOL_GRAPH = 1e-9
TOL_GAP = 1e-12

# condition-number ceiling for (1 + T*T) before the bounded transform refuses
RESOLVENT_COND_MAX = 1e14

# relative singular-value gap accepted as numerical-kernel evidence
KERNEL_GAP = 1e-6
