"""Recover a multiplier from p(S), test von Neumann, and watch Fejer means converge."""
import numpy as np

from treekernels import BergmanTreeKernel, eigenline_multiplier_recovery, vn_defect
from treekernels.tree import build_two_ray_tree
from treekernels.vonneumann import (geometric_symbol, polynomial_of_matrix, random_polynomial,
                                    wot_convergence_probe)

K = BergmanTreeKernel(build_two_ray_tree(60), 2)
S = K.shift.dense()
p = random_polynomial(np.random.default_rng(1), 6)
rep = eigenline_multiplier_recovery(polynomial_of_matrix(p.coeffs, S), K)
print("coefficient error", np.abs(rep.coefficients[:7] - p.coeffs).max())
print("||p(S)|| - sup|p| on the recovery grid", rep.sup_bound_slack)
print("von Neumann defect", vn_defect(S, p))

wot = wot_convergence_probe(S, geometric_symbol(0.5, 400), n_max=200, seed=0, sup=2.0)
for n in (10, 50, 200):
    print(f"r_{n} = {wot.residuals[n]:.2e}")
