"""Command-line front end.

Verbs mirror the pipeline stages: ``simulate`` synthesizes observations,
``design-beams`` writes the per-subcarrier beamformers, ``reconstruct``
and ``classify`` run the inversion (the latter also writing cluster and
material outputs), ``sweep`` repeats runs along one scenario axis, and
``diagnose`` emits coherence/EDOF tables without touching observations.

Exit codes: 0 on success, 2 for configuration problems (bad JSON, bad
flags, invalid scenario), 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmpsenseError, NumericalError
from .harness import (
    ExperimentSpec,
    run_pipeline,
    run_sweep,
    write_beam_report,
    write_classification,
    write_clusters,
    write_diagnostics,
    write_observations,
    write_pipeline_outputs,
    write_rpcd,
    write_solver_trace,
    _map_heatmaps,
)
from .beamform import beamformer_for_all_subcarriers
from .emfwd import channels_for_scenario, synthesize_observation
from .scene import SceneDescription, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(p: argparse.ArgumentParser, *, trials: bool = False) -> None:
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario rng seed")
    p.add_argument("--no-noise", action="store_true", help="disable observation noise")
    p.add_argument("--oversample", type=int, default=None, help="override forward grid oversampling")
    if trials:
        p.add_argument("--trials", type=int, default=None, help="trials per sweep value")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="empsense",
        description="Desk-scale electromagnetic property sensing toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text, trials in (
        ("simulate", "synthesize pilot observations and write per-subcarrier CSVs", False),
        ("design-beams", "design beamformers and write matrices plus the design report", False),
        ("reconstruct", "run the full inversion and write the property map", False),
        ("classify", "run the inversion and classify the recovered target", False),
        ("sweep", "repeat runs along one scenario axis", True),
        ("diagnose", "write coherence and degrees-of-freedom tables", False),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p, trials=trials)
        if name == "sweep":
            p.add_argument("--axis", choices=("snr", "subcarriers", "distance"), default=None)
            p.add_argument("--values", type=float, nargs="+", default=None)
        if name == "diagnose":
            p.add_argument("--k-values", type=int, nargs="+", default=(4, 16, 64))
            p.add_argument("--distances", type=float, nargs="+", default=(10.0, 20.0, 40.0))
    return parser


def _load(args) -> SceneDescription:
    desc = load_config(args.config)
    scenario = desc.scenario
    updates = {}
    if args.seed is not None:
        updates["rng_seed"] = int(args.seed)
    if args.no_noise:
        updates["snr_db"] = None
    if args.oversample is not None:
        updates["forward_oversample"] = int(args.oversample)
    if updates:
        desc.scenario = scenario.with_updates(**updates)
    return desc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    desc = _load(args)
    scenario = desc.scenario
    out = _outdir(args)
    channels = channels_for_scenario(scenario, cache=True)
    designs = beamformer_for_all_subcarriers(channels, scenario.n_pilots, scenario.power_budget)
    if scenario.forward_oversample > 1:
        truth = (desc.phantom or _air(scenario)).upsample(scenario.forward_oversample)
        channels_fwd = channels_for_scenario(scenario, grid=truth.grid, cache=False)
    else:
        truth = desc.phantom or _air(scenario)
        channels_fwd = channels
    obs = synthesize_observation(channels_fwd, truth, designs, scenario.snr_db, scenario.rng_seed)
    write_observations(obs, out)
    print(f"wrote {len(obs)} observation files to {out}")
    return EXIT_OK


def _air(scenario):
    from .scene import ContrastMap

    return ContrastMap.air(scenario.grid())


def _cmd_design_beams(args) -> int:
    desc = _load(args)
    scenario = desc.scenario
    out = _outdir(args)
    channels = channels_for_scenario(scenario, cache=True)
    designs = beamformer_for_all_subcarriers(channels, scenario.n_pilots, scenario.power_budget)
    write_beam_report(scenario, channels, designs, out)
    print(f"wrote {len(designs)} beamformer matrices and beamform.csv to {out}")
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    desc = _load(args)
    out = _outdir(args)
    result = run_pipeline(desc.scenario, desc.phantom, materials=desc.materials)
    write_rpcd(result.estimate, out)
    write_solver_trace(result.trace, out)
    _map_heatmaps(result.estimate, out)
    print(f"reconstruction nmse: {result.nmse_db:.2f} dB; outputs in {out}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    desc = _load(args)
    out = _outdir(args)
    result = run_pipeline(desc.scenario, desc.phantom, materials=desc.materials)
    write_pipeline_outputs(result, out, true_material=desc.phantom_material)
    label = result.predicted if result.predicted is not None else "no-target"
    print(f"predicted material: {label} (whitened distance {result.match_distance:.3g})")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    desc = _load(args)
    out = _outdir(args)
    exp = desc.experiment or {}
    axis = args.axis if args.axis is not None else exp.get("axis")
    values = args.values if args.values is not None else exp.get("values")
    trials = args.trials if args.trials is not None else exp.get("trials", 1)
    if axis is None or not values:
        raise ConfigError("sweep needs an axis and values (flags or an 'experiment' config section)")
    spec = ExperimentSpec(
        scenario=desc.scenario,
        axis=str(axis),
        values=[float(v) for v in values],
        trials=int(trials),
        phantom=desc.phantom,
        true_material=desc.phantom_material,
        materials=desc.materials,
        master_seed=desc.scenario.rng_seed,
        emit_heatmaps=bool(exp.get("emit_heatmaps", False)),
    )
    rows = run_sweep(spec, out)
    failures = sum(1 for r in rows if r["error"])
    print(f"sweep complete: {len(rows)} rows ({failures} failed) in {out / 'sweep.csv'}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    desc = _load(args)
    out = _outdir(args)
    write_diagnostics(
        desc.scenario,
        out,
        k_values=tuple(args.k_values),
        distances=tuple(args.distances),
    )
    print(f"wrote coherence.csv and edof.csv to {out}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "design-beams": _cmd_design_beams,
    "reconstruct": _cmd_reconstruct,
    "classify": _cmd_classify,
    "sweep": _cmd_sweep,
    "diagnose": _cmd_diagnose,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EmpsenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
