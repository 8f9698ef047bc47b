"""
Random geometric graphs and consensus weights
=============================================

Nodes are dropped uniformly on the unit torus and joined when they are
within the connectivity radius. Metropolis weights turn the graph into a
symmetric doubly stochastic matrix; its second largest eigenvalue modulus
sets how fast lossless consensus contracts.
"""

import numpy as np

from qconsensus import generate_connected_rgg, metropolis_weights, second_eigenvalue

# a 20 node draw at two radii
for rho in (0.35, 0.45):
    g, attempt = generate_connected_rgg(20, rho, seed=1)
    W = metropolis_weights(g)
    print(f"rho_c={rho}: {len(g.edges)} edges, mean degree {g.degrees().mean():.2f}, "
          f"lambda2={second_eigenvalue(W):.4f} (draw {attempt})")

# rows and columns of W sum to one, so the average is a fixed point
g, _ = generate_connected_rgg(20, 0.35, seed=1)
W = metropolis_weights(g)
print("row sums:", np.abs(W.sum(axis=1) - 1).max(), " column sums:", np.abs(W.sum(axis=0) - 1).max())

# iterate plain consensus on random data and watch the spread shrink
z = np.random.default_rng(0).normal(size=20)
avg = z.mean()
for t in range(8):
    print(f"t={t} max |z_i - avg| = {np.abs(z - avg).max():.2e}")
    z = W @ z
