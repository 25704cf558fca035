"""Glass ceiling in a homophilic growth model, and friendship-paradox polling."""
import numpy as np

from socsense.gce import average_gce, glass_ceiling_params, grow_network, symmetric_params
from socsense.polling import degree_correlated_fixture, er_poll_fixture, friendship_paradox_check, mse_compare

for name, p in (("minority red", glass_ceiling_params()), ("symmetric", symmetric_params())):
    rep = average_gce(grow_network(p, 10_000, seed=0))
    print(f"{name:>12}: I(blue)/I(red) = {rep.ratio:.3f}")

g = er_poll_fixture()
fp = friendship_paradox_check(g)
print(f"mean degree: node {fp.mean_x:.2f}, edge endpoint {fp.mean_y:.2f}, random friend {fp.mean_z:.2f}")

for label, graph in (("independent labels", g), ("degree-correlated labels", degree_correlated_fixture())):
    print(label)
    for r in mse_compare(graph, 50, 5000, seed=4):
        print(f"  {r.method:<12} bias {r.bias:+.4f}  mse {r.mse:.2e}")
