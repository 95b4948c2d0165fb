"""Kernel families on truncated trees: evaluation, positivity, condition ratios."""
import math

import numpy as np

from treekernels import BergmanTreeKernel, TridiagonalKernel, condition_sweep, gram_psd_check
from treekernels.tree import build_path_tree, build_two_ray_tree

path = BergmanTreeKernel(build_path_tree(60), 2)
z, w = 0.4 + 0.2j, -0.3j
print("path kernel      ", path.eval(z, w)[0, 0])
print("1/(1 - z conj w)^2", 1 / (1 - z * np.conj(w)) ** 2)

ray = BergmanTreeKernel(build_two_ray_tree(60), 2)
tri = TridiagonalKernel(1 / math.sqrt(2), 0.5, 60)
rng = np.random.default_rng(0)
pts = 0.9 * np.sqrt(rng.uniform(size=30)) * np.exp(2j * np.pi * rng.uniform(size=30))
for name, K in [("two-ray Bergman", ray), ("tridiagonal", tri)]:
    vecs = rng.normal(size=(30, K.dim))
    print(f"{name}: min Gram eigenvalue {gram_psd_check(K, pts, vecs):.2e}")

print("\n|w|    ratio    bound   (two-ray Bergman a=2)")
for row in condition_sweep(ray, [0.0, 0.5, 0.9, 0.99]):
    print(f"{abs(row.w):.2f}  {row.ratio:7.4f}  {row.bound:7.4f}")
