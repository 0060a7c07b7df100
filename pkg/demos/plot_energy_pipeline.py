"""
From telemetry to trip energy
=============================

A street grid stands in for the road map. We check how map-matching accuracy
degrades with GPS noise, label an electric bus trace with energy, and fit the
per-segment linear model that turns a planned route into a trip energy.
"""

# %%
# Map matching under noise
# ------------------------
import numpy as np

from fleetopt.pipeline import clean_and_label, evaluate_matching, fit_ols, grid_network, predict_trip_energy
from fleetopt.pipeline.regression import segment_row
from fleetopt.pipeline.telemetry import soc_energy_kwh, synthetic_discharge_trace

net = grid_network()
sigmas = [1.1, 20.0, 60.0, 100.0, 140.0]
acc = evaluate_matching(net, routes=10, points_per_route=200, sigmas_m=sigmas, seed=0)
for s in sigmas:
    print(f"sigma {s:6.1f} m: {acc[s]:.3f}")

# %%
# Energy labels
# -------------
# Integrating current times voltage should agree with the state-of-charge drop.
trace = synthetic_discharge_trace(seed=0, capacity_kwh=300.0)
labels = clean_and_label(trace, "electric")
integrated = sum(e for _, e in labels)
print(f"integrated {integrated:.2f} kWh, SoC drop {soc_energy_kwh(trace, 300.0):.2f} kWh")

# %%
# Fitting the segment model
# -------------------------
# A toy world where energy grows with distance and climb and falls with speed.
rng = np.random.default_rng(0)
rows = []
for _ in range(400):
    d, climb, ratio = rng.uniform(200, 1500), rng.normal(0, 5), rng.uniform(0.3, 1.0)
    rows.append({"distance_m": d, "elevation_delta_m": climb, "speed_ratio": ratio, "road_class": "primary",
                 "energy_kwh": 0.3 + 0.0015 * d + 0.01 * climb - 0.3 * ratio + rng.normal(0, 0.1)})
model = fit_ols(rows, features=["distance_m", "elevation_delta_m", "speed_ratio"], use_road_class=False)
print({f: round(c, 5) for f, c in zip(model.features, model.coefficients)}, round(model.intercept, 3))

# %%
# A planned trip is a list of segments; unknown features take training means.
trip = [segment_row(model, d) for d in (400.0, 850.0, 1200.0, 300.0)]
print(f"predicted trip energy: {predict_trip_energy(model, trip):.3f} kWh")
