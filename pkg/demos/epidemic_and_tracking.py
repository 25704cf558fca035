"""SIS mean field against simulation, EKF tracking, and degree-law tracking."""
import numpy as np

from socsense.degdist import run_tracking
from socsense.graphs import DupDelParams
from socsense.sis import (
    NoiseModel,
    SisParams,
    azuma_check,
    mean_field_trace,
    poisson_degree_law,
    simulate_observations,
    track_profile,
)

params = SisParams(beta=0.3, delta=0.3, P=poisson_degree_law(3.0, 6))
print("mean-field profile after 10 epochs:", np.round(mean_field_trace(np.full(6, 0.5), params, 1000, 10)[-1], 3))

table = azuma_check(params, [100, 1000], trials=20, seed=1, epochs=5)
for N, q in table.rows:
    print(f"N={N:<6} 0.9-quantile sup gap {q:.3f}")

noise = NoiseModel(N=500, m=400)
truth, obs = simulate_observations(params, noise, np.full(6, 0.5), 15, seed=2)
est = track_profile(params, noise, obs, np.full(6, 0.5), 0.01)
print(f"EKF RMSE over 15 epochs: {np.sqrt(np.mean((est - truth) ** 2)):.4f}")

run = run_tracking(DupDelParams.static(0.5, 0.4), 0.02, 5000, seed=3, n0=2000)
print(f"degree tracker: final error {run.errors[-1]:.4f}, mean error {run.errors.mean():.4f}")
