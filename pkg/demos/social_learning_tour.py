"""Herding, cascades and a stopping problem on the two-state canonical model."""
import numpy as np

from socsense.quickest import BeliefUpdateRule, ChangeModel, solve_stopping, stopping_set
from socsense.social_learning import canonical_model, detect_cascade, herding_region, sl_public_update

m = canonical_model()

# public belief after a few "action 0" observations; it freezes once agents herd
pi = np.array([0.5, 0.5])
for k in range(4):
    pi, sigma = sl_public_update(m, pi, 0)
    print(f"after {k + 1} actions: pi = {np.round(pi, 4)}, P(action) = {sigma:.3f}")

# herding region size as agents grow more risk averse
for alpha in (1.0, 0.5, 0.2, 0.05):
    print(f"alpha={alpha:<5} herding points: {len(herding_region(m, alpha, grid=1001))} / 1001")

# cascade times over a handful of seeds
print("cascade times:", [detect_cascade(m, [0.5, 0.5], 200, seed=s) for s in range(10)])

# quickest detection: classical observations give one stopping interval,
# a decision maker that only sees myopic agent actions can get two
B = m.obs
classical = solve_stopping(ChangeModel(0.05, B, 0.05, 3.0), BeliefUpdateRule("classical"), 501)
social = solve_stopping(ChangeModel(0.02, B, 0.05, 1.0),
                        BeliefUpdateRule("social", np.array([[0.0, 1.0], [3.0, 0.0]])), 501)
for name, sol in (("classical", classical), ("social", social)):
    print(f"{name:>9} stopping set:", [(round(a, 3), round(b, 3)) for a, b in stopping_set(sol)])
