"""Chain operators and harmonic extension.

The prediction horizon is a path graph; smoothness of a correction field is
its Dirichlet energy (sum of squared adjacent-step differences). Pinning the
first few steps to observed values and minimizing that energy extends the
boundary evidence smoothly across the horizon.
"""

import numpy as np

from smoothtta import (
    TemporalChain,
    build_transfer_operator,
    difference_matrix,
    dirichlet_energy,
    harmonic_extension,
)

np.set_printoptions(precision=3, suppress=True)

# The difference matrix maps a horizon field to its step-to-step increments.
H = 6
D = difference_matrix(H)
print("difference matrix, H=6:")
print(D)

field = np.array([0.0, 1.0, 3.0, 3.0, 2.0, 2.0])[:, None]
print("\nfield:", field.ravel())
print("increments:", (D @ field).ravel())
print("dirichlet energy:", dirichlet_energy(field))
print("energy of a constant field:", dirichlet_energy(np.full((H, 1), 7.0)))

# Harmonic extension: fix the first two steps, minimize energy over the rest.
# On a chain with a one-sided boundary the minimizer is flat beyond the
# boundary -- the last pinned value is simply carried forward.
boundary = np.array([[0.0], [1.0]])
extended = harmonic_extension(boundary, H)
print("\nboundary [0, 1] extended over 6 steps:", extended.ravel())

# Random perturbations that keep the boundary fixed can only raise the energy.
rng = np.random.default_rng(0)
base = dirichlet_energy(extended)
raised = 0
for _ in range(1000):
    trial = extended.copy()
    trial[2:] += 0.3 * rng.standard_normal((H - 2, 1))
    raised += dirichlet_energy(trial) >= base
print(f"perturbations with energy >= minimizer: {raised}/1000")

# The transfer operator (regularized inverse of the chain Laplacian)
# implements a soft version of the same idea: its prefix columns spread
# boundary evidence across the horizon with a smooth decay.
op = build_transfer_operator(H, alpha=0.15)
print("\ntransfer operator column for a single boundary point (alpha=0.15):")
print(op.prefix_columns(1).ravel())
print("smaller alpha spreads further:")
print(build_transfer_operator(H, alpha=0.01).prefix_columns(1).ravel())

# Weighted chains are supported too: a weak edge decouples the two sides.
chain = TemporalChain(H, edge_weights=np.array([1.0, 1.0, 0.01, 1.0, 1.0]))
print("\nextension across a weak edge (weight 0.01 between steps 2 and 3):")
print(harmonic_extension(np.array([[0.0], [2.0]]), H, chain).ravel())
