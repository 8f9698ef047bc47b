"""
Predicting the MSE of quantized consensus
=========================================

With additive quantization noise the first two moments of the node states
evolve linearly, so the network MSE at any horizon is an affine function of
the per-node distortions. This script propagates the moments, checks them
against a brute-force simulation, and computes the minimum lossless horizon
for a target MSE.
"""

import numpy as np

from qconsensus import (
    DistortionSchedule,
    generate_connected_rgg,
    lossless_mse_sequence,
    metropolis_weights,
    network_mse,
    propagate,
    signal_plus_noise_state,
    t_min,
)
from qconsensus.simulator import QuantizerSpec, run_consensus

g, _ = generate_connected_rgg(20, 0.35, seed=1)
W = metropolis_weights(g)
init = signal_plus_noise_state(20, sigma_x2=1.0, sigma_n2=0.5)
T = 7

lossless = lossless_mse_sequence(W, init, T)
print("lossless MSE:", np.array2string(lossless, precision=4))
print("T_min for MSE < 0.02:", t_min(W, init, 0.02))

# a constant distortion of 0.01 everywhere
D = np.full((T, 20), 0.01)
pred = [network_mse(s) for s in propagate(W, init, DistortionSchedule(D), T)]
print("predicted MSE:", np.array2string(np.array(pred), precision=4))

sched = [[QuantizerSpec("gaussian_noise_proxy", distortion=0.01)] * 20 for _ in range(T)]
res = run_consensus(W, 1.0, 0.5, L=1000, schedule=sched, T=T, trials=50, seed=3)
print("simulated MSE:", np.array2string(res.empirical_mse_per_iter, precision=4))
print("largest relative gap:", np.max(np.abs(res.empirical_mse_per_iter / pred - 1)))
