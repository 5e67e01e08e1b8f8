"""
Iterative reconstruction: relinearizing around the running estimate
===================================================================

A strongly scattering disk breaks the single-scattering (Born) picture,
so the first linearized solve is biased. Re-deriving the linearization
around each new estimate recovers most of the lost accuracy. The trace
below shows the reconstruction error falling over the outer iterations.
"""

import numpy as np

from empsense.beamform import beamformer_for_all_subcarriers
from empsense.emfwd import channels_for_scenario, synthesize_observation
from empsense.invert import iterative_reconstruct
from empsense.scene import ScenarioConfig, make_phantom
from empsense.sensing import stack_measurements

scenario = ScenarioConfig(
    n_tx=8,
    n_rx=6,
    n_pilots=5,
    n_subcarriers=3,
    f_c=200.0e6,
    delta_f=2.0e6,
    tx_center=(10.0, 0.0),
    rx_center=(-20.0, -20.0),
    grid_side=4,
    forward_oversample=1,
)
channels = channels_for_scenario(scenario, cache=True)
beams = beamformer_for_all_subcarriers(channels, scenario.n_pilots, scenario.power_budget)

# a high-contrast disk: multiple scattering is strong at eps_r = 3
truth = make_phantom("disk", (3.0, 0.02), scenario.grid(), radius=0.5)
observations = synthesize_observation(channels, truth, beams, None, rng_seed=0)
z = stack_measurements(observations)

estimate, trace = iterative_reconstruct(
    channels,
    beams,
    z,
    1.0e-8 * np.linalg.norm(z),
    scenario.f_c,
    truth=truth,
)

print("outer iteration -> data residual, reconstruction error")
for step in trace:
    print(
        f"  {step.index:2d}: residual {step.report.residual:.3e}, "
        f"nmse {step.nmse_db:7.2f} dB"
    )
print(f"\nfirst linearized solve: {trace[0].nmse_db:.2f} dB")
print(f"after relinearization:  {trace[-1].nmse_db:.2f} dB")

# the recovered permittivity map, printed coarsely: the disk sits in the
# middle of the 4x4 region
side = scenario.grid_side
print("\nrecovered eps_r map:")
for row in range(side - 1, -1, -1):
    cells = " ".join(f"{v:5.2f}" for v in estimate.eps_r.reshape(side, side)[row])
    print("  " + cells)
