"""Desk-scale electromagnetic property sensing toolkit.

Simulates OFDM pilot observations of a small scene under 2D TM scattering,
reconstructs the per-pixel relative permittivity and conductivity with a
relinearized group-sparse solver, designs coherence-shaping transmit
beamformers, and classifies the recovered target against a material
database.
"""

from .errors import ConfigError, EmpsenseError, NumericalError
from .scene import (
    ContrastMap,
    GridGeometry,
    MaterialRecord,
    ScenarioConfig,
    SceneDescription,
    build_grid,
    load_config,
    make_phantom,
    material_database,
)
from .emfwd import (
    ChannelSet,
    PilotObservation,
    channels_for_scenario,
    green_matrix,
    hankel_h0_2,
    ls_total_field,
    radiation_operators,
    read_matrix,
    scattering_operator,
    synthesize_observation,
    write_matrix,
)
from .sensing import (
    edof,
    mutual_coherence,
    noise_equivalent_radius,
    sensing_matrix,
    stack_measurements,
    stack_real,
)
from .beamform import (
    BeamformDesign,
    beamformer_for_all_subcarriers,
    design_beamformer,
    gram_target,
    random_beamformer,
)
from .invert import (
    OuterStep,
    SolverOptions,
    SolverReport,
    born_initial_system,
    group_prox,
    iterative_reconstruct,
    mixed_norm,
    nmse,
    solve_bpdn,
)
from .classify import ClusterResult, classify_material, whitened_kmeans2, whitening_transform
from .harness import (
    ExperimentSpec,
    PipelineResult,
    coherence_table,
    edof_table,
    run_pipeline,
    run_sweep,
    scenario_at_distance,
    trial_seed,
)

__version__ = "0.1.0"

__all__ = [
    "BeamformDesign",
    "ChannelSet",
    "ClusterResult",
    "ConfigError",
    "ContrastMap",
    "EmpsenseError",
    "ExperimentSpec",
    "GridGeometry",
    "MaterialRecord",
    "NumericalError",
    "OuterStep",
    "PilotObservation",
    "PipelineResult",
    "ScenarioConfig",
    "SceneDescription",
    "SolverOptions",
    "SolverReport",
    "beamformer_for_all_subcarriers",
    "born_initial_system",
    "build_grid",
    "channels_for_scenario",
    "classify_material",
    "coherence_table",
    "design_beamformer",
    "edof",
    "edof_table",
    "gram_target",
    "green_matrix",
    "group_prox",
    "hankel_h0_2",
    "iterative_reconstruct",
    "load_config",
    "ls_total_field",
    "make_phantom",
    "material_database",
    "mixed_norm",
    "mutual_coherence",
    "nmse",
    "noise_equivalent_radius",
    "radiation_operators",
    "random_beamformer",
    "read_matrix",
    "run_pipeline",
    "run_sweep",
    "scattering_operator",
    "scenario_at_distance",
    "sensing_matrix",
    "solve_bpdn",
    "stack_measurements",
    "stack_real",
    "synthesize_observation",
    "trial_seed",
    "whitened_kmeans2",
    "whitening_transform",
    "write_matrix",
]
