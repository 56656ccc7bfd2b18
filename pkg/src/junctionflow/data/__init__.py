"""Trajectory data: geometry, aggregation, boundary events, manifests, synthesis."""

from .boundary import KdeInflow, boundary_events, boundary_histogram, crossing_time, kde_boundary_flux
from .corpus import CorpusEntry, corpus_config, generate_corpus
from .geometry import LANE_WIDTH, ControlVolume, JunctionGeometry, default_geometry, read_geometry, write_geometry
from .manifest import (
    REFERENCE_MANIFEST,
    SPLITS,
    DatasetManifest,
    read_manifest,
    split_datasets,
    write_manifest,
)
from .series import (
    EmpiricalSeries,
    compute_series,
    empirical_density,
    empirical_velocity,
    read_series,
    write_series,
)
from .synth import SynthConfig, kinematic_delays, synth_generate
from .trajectory import Dataset, Trajectory, read_trajectories, write_trajectories

__all__ = [
    "LANE_WIDTH",
    "CorpusEntry",
    "corpus_config",
    "generate_corpus",
    "kinematic_delays",
    "REFERENCE_MANIFEST",
    "SPLITS",
    "ControlVolume",
    "Dataset",
    "DatasetManifest",
    "EmpiricalSeries",
    "JunctionGeometry",
    "KdeInflow",
    "SynthConfig",
    "Trajectory",
    "boundary_events",
    "boundary_histogram",
    "compute_series",
    "read_series",
    "write_series",
    "crossing_time",
    "default_geometry",
    "empirical_density",
    "empirical_velocity",
    "kde_boundary_flux",
    "read_geometry",
    "read_manifest",
    "read_trajectories",
    "split_datasets",
    "synth_generate",
    "write_geometry",
    "write_manifest",
    "write_trajectories",
]
