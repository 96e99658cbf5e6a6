"""Numerical tolerance ladder used across the package.

Every threshold lives here so tests and library code agree on one set of
numbers. Values are absolute unless the name says otherwise.
"""

# matrix/scattering identities
TOL_UNIMOD = 1e-10      # | |w|^2 - |z|^2 - 1 | for transfer matrices
TOL_UNITARY = 1e-10     # S-matrix unitarity defect

# resonance / transmission
TOL_T = 1e-8            # 1 - T at a perfect transmission resonance

# state invariants
TOL_J_REL = 1e-9        # current constancy, relative to k
TOL_Q_REL = 1e-8        # nonlocal invariant constancy, relative to |q|
TOL_Q_ABS = 1e-12       # absolute fallback when q is itself ~ 0
TOL_RHO = 1e-8          # density mirror-symmetry residual (normalized)
NODE_RHO = 1e-12        # |psi|^2 below this marks a node

# geometry / potential comparisons
TOL_X = 1e-9            # breakpoint coincidence
TOL_V = 1e-9            # potential value coincidence

# design solver
TOL_DESIGN = 1e-10      # max residual for a converged design

# oracle cross-validation
TOL_ORACLE_REL = 1e-6   # relative T deviation, transfer matrix vs integrator
