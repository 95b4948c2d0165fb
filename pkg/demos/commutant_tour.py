"""Commutants of truncated shifts: abelian on a path, not on two rays."""
from treekernels import abelian_and_irreducibility_test, assemble_shift, bergman_weights
from treekernels.tree import build_path_tree, build_two_ray_tree

for name, tree in [("path", build_path_tree(20)), ("two rays", build_two_ray_tree(20))]:
    rep = abelian_and_irreducibility_test(assemble_shift(bergman_weights(tree, 2)))
    print(f"{name}: commutant dim {rep.dim}, abelian {rep.abelian}, "
          f"max commutator {rep.max_commutator:.2e}")
    if rep.witness:
        print(f"  constant multiplier pair with ||[C1, C2]|| = "
              f"{rep.witness['commutator_norm']:.3f}")
