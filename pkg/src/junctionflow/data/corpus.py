"""A synthetic corpus shaped like the reference recording table.

Every reference dataset gets a synthetic twin with the same id, split and
duration and Poisson rates equal to its recorded counts per second. Coupling
delays follow the generator's own diagrams (see ``kinematic_delays``), so the
corpus is consistent with the LWR model it is later fitted to.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..junction import PAPER_FDS
from .boundary import boundary_events
from .geometry import JunctionGeometry, default_geometry
from .manifest import REFERENCE_MANIFEST, DatasetManifest
from .series import EmpiricalSeries, compute_series
from .synth import SynthConfig, kinematic_delays, synth_generate
from .trajectory import Dataset


@dataclass
class CorpusEntry:
    config: SynthConfig
    dataset: Dataset
    series: EmpiricalSeries
    manifest: DatasetManifest


def dataset_seed(seed: int, dataset_id: int) -> int:
    return int(np.random.SeedSequence([seed, dataset_id]).generate_state(1)[0])


def corpus_config(
    ref: DatasetManifest,
    seed: int = 0,
    duration: float | None = None,
    rate_modulation: float = 0.0,
    fds=PAPER_FDS,
    geometry: JunctionGeometry | None = None,
) -> SynthConfig:
    """Generator settings for the synthetic twin of one reference dataset."""
    cfg = SynthConfig(
        dataset_id=ref.dataset_id,
        duration=ref.duration if duration is None else float(duration),
        rate1=ref.entering_n / ref.duration,
        rate2=ref.passing_n / ref.duration,
        fds=tuple(fds),
        seed=dataset_seed(seed, ref.dataset_id),
        geometry=geometry or default_geometry(),
        rate_modulation=rate_modulation,
    )
    tau2, tau3 = kinematic_delays(cfg)
    return replace(cfg, tau2=tau2, tau3=tau3)


def _mean_speed(series: EmpiricalSeries, road: int) -> float:
    occupied = series.density[:, road - 1] > 0
    return float(series.velocity[occupied, road - 1].mean()) if occupied.any() else 0.0


def summarize(ref: DatasetManifest, cfg: SynthConfig, dataset: Dataset, series: EmpiricalSeries) -> DatasetManifest:
    """Manifest row with counts and speeds measured on the generated data."""
    ev = boundary_events(dataset, cfg.geometry)
    inside = lambda t: int(np.count_nonzero((t >= 0) & (t < dataset.duration)))  # noqa: E731
    return replace(
        ref,
        duration=float(dataset.duration),
        passing_n=inside(ev[2]),
        passing_speed=round(_mean_speed(series, 2), 2),
        entering_n=inside(ev[1]),
        entering_speed=round(_mean_speed(series, 1), 2),
        tau2=cfg.tau2,
        tau3=cfg.tau3,
    )


def generate_corpus(
    reference=REFERENCE_MANIFEST,
    seed: int = 0,
    duration: float | None = None,
    rate_modulation: float = 0.0,
    fds=PAPER_FDS,
    geometry: JunctionGeometry | None = None,
    ids=None,
):
    """Yield a ``CorpusEntry`` per reference row (optionally restricted to ``ids``)."""
    for ref in reference:
        if ids is not None and ref.dataset_id not in ids:
            continue
        cfg = corpus_config(ref, seed, duration, rate_modulation, fds, geometry)
        ds = synth_generate(cfg)
        series = compute_series(ds, cfg.geometry)
        yield CorpusEntry(cfg, ds, series, summarize(ref, cfg, ds, series))
