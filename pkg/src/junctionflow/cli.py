"""Command-line pipeline: synthetic corpus -> fits -> simulations.

All commands share one work directory (``--out``, default ``runs``):

    corpus/     manifest.csv, geometry.txt, generator.txt, dataset_XX.csv
    series/     delay-shifted empirical series per dataset
    models/     c1.txt ... c4.txt, ml1.json ... ml3.json
    reports/    delays, diagram fits, model errors, loss histories
    simulate/   boundary-flux time series and error tables
    predict/    Riemann-prediction density profiles

Settings come from defaults, then ``--config`` (flat ``key = value``), then
command-line flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import kvfile
from .calibration import (
    AmsGradConfig,
    DifferentialEvolutionConfig,
    Samples,
    estimate_delays,
    fit_classical,
    fit_fundamental_diagram,
    generate_c1prime_dataset,
    road_errors,
    run_capability_test,
    train_ml,
)
from .calibration.training import TrainingError, write_history_csv
from .classical import MODEL_IDS, ClassicalModel, read_params_file, write_params_file
from .data import (
    LANE_WIDTH,
    REFERENCE_MANIFEST,
    KdeInflow,
    boundary_events,
    compute_series,
    read_geometry,
    read_manifest,
    read_series,
    read_trajectories,
    write_geometry,
    write_manifest,
    write_series,
    write_trajectories,
)
from .data.corpus import generate_corpus
from .errors import ConfigError, ContractError, DomainError
from .junction import PAPER_FDS, UNIT_FDS, AdmissibleSet, read_fd_file, write_fd_file
from .ml import VARIANTS, NormalizationParams, init_model, load_model, save_model
from .network import (
    SolverConfig,
    run_boundary_experiment,
    run_metadata,
    run_riemann_prediction,
    write_profiles_csv,
    write_timeseries_csv,
)

log = logging.getLogger("junctionflow")

ALL_MODELS = MODEL_IDS + VARIANTS


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs"
    # gen-synth
    duration: str = "table"  # "table" keeps the reference durations, else seconds
    rate_modulation: float = 0.0
    # differential evolution (fit-classical)
    de_pop: int = 40
    de_generations: int = 300
    # AMSGrad (train-ml, capability-test)
    epochs: int | None = None  # None: 100 on corpus data, 500 on the benchmark
    lr: float = 1e-3
    batch_size: int = 32
    penalty_weight: float = 0.5
    runs: int = 5
    train_points: int = 20
    test_points: int = 80
    # solver (simulate, predict)
    cells: int = 200
    cfl: float = 0.24
    lambda_min: float = 10.0
    lambda_mode: str = "max"
    horizon: float = 10.0
    split: str = "application"

    def solver(self) -> SolverConfig:
        return SolverConfig(cells=self.cells, cfl=self.cfl, lambda_min=self.lambda_min, lambda_mode=self.lambda_mode)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _convert(name: str, raw: str):
    if name in ("epochs",):
        return None if raw.lower() in ("", "none", "default") else int(raw)
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path=None, overrides=None) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    items = dict(kvfile.read_kv(path)) if path else {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        try:
            setattr(cfg, key, _convert(key, raw))
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


class Workspace:
    def __init__(self, root):
        self.root = Path(root)

    def dir(self, name: str) -> Path:
        p = self.root / name
        p.mkdir(parents=True, exist_ok=True)
        return p

    @property
    def corpus(self) -> Path:
        return self.root / "corpus"

    def trajectory_file(self, dataset_id: int) -> Path:
        return self.corpus / f"dataset_{dataset_id:02d}.csv"

    def series_file(self, dataset_id: int) -> Path:
        return self.root / "series" / f"dataset_{dataset_id:02d}.csv"

    @property
    def fd_file(self) -> Path:
        return self.root / "fds.txt"

    def model_file(self, name: str) -> Path:
        return self.root / "models" / (f"{name}.json" if name in VARIANTS else f"{name}.txt")


def _meta(cfg: RunConfig, command: str) -> dict:
    return {
        "tool_version": kvfile.TOOL_VERSION,
        "command": command,
        # the work directory is where results go, not part of the configuration
        "config_hash": kvfile.config_hash({k: v for k, v in cfg.as_dict().items() if k != "out"}),
        "seed": cfg.seed,
    }


def _need(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ConfigError(f"missing input {path}; run '{hint}' first")
    return path


def _manifest(ws: Workspace):
    return read_manifest(_need(ws.corpus / "manifest.csv", "junctionflow gen-synth"))


def _samples(ws: Workspace, manifests, split: str, fds) -> Samples:
    parts = []
    for m in manifests:
        if m.split != split:
            continue
        s = read_series(_need(ws.series_file(m.dataset_id), "junctionflow fit-delays"))
        if len(s):
            parts.append(s.samples(fds))
    if not parts:
        raise ConfigError(f"no {split} samples in {ws.root / 'series'}")
    return Samples.concat(parts)


def _lanes(volume) -> int:
    return max(1, int(round((volume.y_max - volume.y_min) / LANE_WIDTH)))


def load_coupling(ws: Workspace, name: str, fds):
    """A km/h coupling solver by id from the work directory."""
    if name in VARIANTS:
        return load_model(_need(ws.model_file(name), f"junctionflow train-ml --variant {name}"))
    kind, params = read_params_file(_need(ws.model_file(name), f"junctionflow fit-classical --model {name}"))
    return ClassicalModel(kind, tuple(fds), params)


def _num(x) -> str:
    return repr(float(x))


def _error_rows(name, solver, train: Samples, test: Samples):
    rows = []
    for split, samples in (("train", train), ("test", test)):
        e = road_errors(solver, samples)
        rows.append(",".join([name, split] + [_num(v) for v in (*e, e.mean())]))
    return rows


def _write_lines(path: Path, meta: dict, kind: str, header: str, rows) -> None:
    lines = kvfile.header_lines(kind, meta=meta) + [header] + list(rows)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- commands


def cmd_gen_synth(cfg: RunConfig) -> int:
    ws = Workspace(cfg.out)
    out = ws.dir("corpus")
    meta = _meta(cfg, "gen-synth")
    duration = None if cfg.duration == "table" else float(cfg.duration)
    rows = []
    geometry = None
    for entry in generate_corpus(REFERENCE_MANIFEST, cfg.seed, duration, cfg.rate_modulation):
        write_trajectories(ws.trajectory_file(entry.dataset.dataset_id), entry.dataset, meta)
        rows.append(entry.manifest)
        geometry = entry.config.geometry
        log.info("dataset %d: %d trajectories", entry.dataset.dataset_id, len(entry.dataset.trajectories))
    write_manifest(out / "manifest.csv", rows, meta)
    write_geometry(out / "geometry.txt", geometry, meta)
    write_fd_file(out / "generator.txt", PAPER_FDS, {**meta, "rate_modulation": cfg.rate_modulation})
    print(f"wrote {len(rows)} datasets to {out}")
    return 0


def cmd_fit_delays(cfg: RunConfig) -> int:
    ws = Workspace(cfg.out)
    manifests = _manifest(ws)
    geometry = read_geometry(_need(ws.corpus / "geometry.txt", "junctionflow gen-synth"))
    ws.dir("series")
    meta = _meta(cfg, "fit-delays")
    rows = []
    for m in manifests:
        ds = read_trajectories(_need(ws.trajectory_file(m.dataset_id), "junctionflow gen-synth"))
        series = compute_series(ds, geometry)
        f = series.flux
        try:
            tau2, tau3 = estimate_delays(f[:, 0], f[:, 1], f[:, 2])
            shifted = series.shifted(tau2, tau3)
        except DomainError as exc:
            warnings.warn(f"dataset {m.dataset_id}: {exc}; kept unshifted", RuntimeWarning)
            tau2, tau3, shifted = 0.0, 0.0, series
        write_series(ws.series_file(m.dataset_id), shifted, meta)
        rows.append(f"{m.dataset_id},{m.split},{tau2},{tau3},{m.tau2},{m.tau3}")
    _write_lines(
        ws.dir("reports") / "delays.csv", meta, "delays", "dataset,split,tau2,tau3,generator_tau2,generator_tau3", rows
    )
    print(f"estimated delays for {len(rows)} datasets")
    return 0


def cmd_fit_fd(cfg: RunConfig) -> int:
    ws = Workspace(cfg.out)
    manifests = _manifest(ws)
    geometry = read_geometry(ws.corpus / "geometry.txt")
    meta = _meta(cfg, "fit-fd")
    series = [
        read_series(_need(ws.series_file(m.dataset_id), "junctionflow fit-delays"))
        for m in manifests
        if m.split == "train"
    ]
    fds, rows = [], []
    for k, vol in enumerate(geometry.volumes):
        rho = np.concatenate([s.density[:, k] for s in series]) if series else np.empty(0)
        v = np.concatenate([s.velocity[:, k] for s in series]) if series else np.empty(0)
        lanes = _lanes(vol)
        fd = fit_fundamental_diagram(rho, v, lanes, DifferentialEvolutionConfig(pop_size=12, generations=60, seed=cfg.seed))
        fds.append(fd)
        rows.append(f"{k + 1},{lanes},{_num(fd.v_max)},{_num(fd.rho_max)},{int(np.count_nonzero(rho > 0))}")
    write_fd_file(ws.fd_file, fds, meta)
    _write_lines(ws.dir("reports") / "fd_fit.csv", meta, "fd-fit", "road,lanes,v_max_kmh,rho_max_per_km,samples", rows)
    for k, fd in enumerate(fds, 1):
        print(f"road {k}: v_max = {fd.v_max:.2f} km/h, rho_max = {fd.rho_max:.2f} veh/km")
    return 0


def cmd_fit_classical(cfg: RunConfig, models) -> int:
    ws = Workspace(cfg.out)
    manifests = _manifest(ws)
    fds = read_fd_file(_need(ws.fd_file, "junctionflow fit-fd"))
    train = _samples(ws, manifests, "train", fds)
    test = _samples(ws, manifests, "test", fds)
    meta = _meta(cfg, "fit-classical")
    ws.dir("models")
    g = AdmissibleSet.from_traces(fds, train.traces.T)
    if "c1" in models and not np.any(g.d1 + g.d2 > g.s3):
        # C1 uses beta only when the demands exceed the supply
        warnings.warn("no supply-limited training samples; the C1 beta is not identifiable", RuntimeWarning)
    for kind in models:
        de = DifferentialEvolutionConfig(pop_size=cfg.de_pop, generations=cfg.de_generations, seed=cfg.seed)
        params, res = fit_classical(kind, fds, train, config=de)
        write_params_file(ws.model_file(kind), kind, params, meta)
        solver = ClassicalModel(kind, tuple(fds), params)
        _write_lines(
            ws.dir("reports") / f"errors_{kind}.csv",
            meta,
            "model-errors",
            "model,split,E1,E2,E3,E",
            _error_rows(kind, solver, train, test),
        )
        text = f"{kind}: beta = {params.beta:.4f}"
        if params.markers is not None:
            text += ", markers = " + ", ".join(f"{w:.2f}" for w in params.markers) + " km/h"
        print(f"{text}; train error {res.fun:.4e}")
    return 0


def _amsgrad(cfg: RunConfig, epochs: int) -> AmsGradConfig:
    return AmsGradConfig(
        lr=cfg.lr, epochs=epochs, batch_size=cfg.batch_size, seed=cfg.seed + 1, penalty_weight=cfg.penalty_weight
    )


def cmd_train_ml(cfg: RunConfig, variants, benchmark: str | None) -> int:
    ws = Workspace(cfg.out)
    meta = _meta(cfg, "train-ml")
    reports = ws.dir("reports")
    if benchmark == "c1prime":
        epochs = 500 if cfg.epochs is None else cfg.epochs
        train = generate_c1prime_dataset(cfg.train_points)
        test = generate_c1prime_dataset(cfg.test_points)
        fds = UNIT_FDS
    else:
        epochs = 100 if cfg.epochs is None else cfg.epochs
        manifests = _manifest(ws)
        fds = read_fd_file(_need(ws.fd_file, "junctionflow fit-fd"))
        train = _samples(ws, manifests, "train", fds)
        test = _samples(ws, manifests, "test", fds)
    norm = NormalizationParams.from_training_inputs(fds, train.traces)
    for variant in variants:
        model = init_model(variant, fds, norm, seed=cfg.seed)
        result = train_ml(model, train, _amsgrad(cfg, epochs), test=test)
        suffix = f"_{benchmark}" if benchmark else ""
        header = kvfile.header_lines("loss-history", meta={**meta, "variant": variant, "benchmark": benchmark or "none"})
        write_history_csv(reports / f"history_{variant}{suffix}.csv", result.history, header)
        last = result.history[-1]
        if not benchmark:
            ws.dir("models")
            save_model(model, ws.model_file(variant), meta)
            _write_lines(
                reports / f"errors_{variant}.csv",
                meta,
                "model-errors",
                "model,split,E1,E2,E3,E",
                _error_rows(variant, model, train, test),
            )
        print(
            f"{variant}: epoch {last['epoch']} train loss {last['train_loss']:.4e}, test loss {last['test_loss']:.4e}"
        )
    return 0


def cmd_capability_test(cfg: RunConfig, variants) -> int:
    ws = Workspace(cfg.out)
    epochs = 500 if cfg.epochs is None else cfg.epochs

    def progress(variant, run, tr, te):
        log.info("%s run %d: final train %.3e, test %.3e", variant, run, tr[-1], te[-1])

    report = run_capability_test(
        variants,
        runs=cfg.runs,
        epochs=epochs,
        train_points=cfg.train_points,
        test_points=cfg.test_points,
        config=_amsgrad(cfg, epochs),
        seed=cfg.seed,
        progress=progress,
    )
    meta = {**_meta(cfg, "capability-test"), "runs": cfg.runs}
    path = ws.dir("reports") / "capability.csv"
    path.write_text("\n".join(kvfile.header_lines("capability", meta=meta) + [report.format_table()]) + "\n")
    print(report.format_table())
    return 0


def cmd_simulate(cfg: RunConfig, models) -> int:
    ws = Workspace(cfg.out)
    manifests = [m for m in _manifest(ws) if m.split == cfg.split]
    if not manifests:
        raise ConfigError(f"no datasets in split {cfg.split!r}")
    geometry = read_geometry(ws.corpus / "geometry.txt")
    fds = read_fd_file(_need(ws.fd_file, "junctionflow fit-fd"))
    solver_cfg = cfg.solver()
    meta = _meta(cfg, "simulate")
    out = ws.dir("simulate")
    events = {}
    for m in manifests:
        ds = read_trajectories(_need(ws.trajectory_file(m.dataset_id), "junctionflow gen-synth"))
        events[m.dataset_id] = (ds.duration, boundary_events(ds, geometry))
    for name in models:
        coupling = load_coupling(ws, name, fds)
        rows, errs = [], []
        for m in manifests:
            duration, ev = events[m.dataset_id]
            if duration <= 0 or len(ev[3]) == 0:
                rows.append(f"{m.dataset_id},nan,nan,0")
                continue
            res = run_boundary_experiment(
                fds, coupling, [KdeInflow(ev[1]), KdeInflow(ev[2])], KdeInflow(ev[3]), duration, solver_cfg
            )
            lg = res.log
            write_timeseries_csv(
                out / f"{name}_dataset_{m.dataset_id:02d}.csv",
                lg.times,
                {"V1_hat": res.v_hat[:, 0], "V2_hat": res.v_hat[:, 1], "V3_hat": res.v_hat[:, 2], "V3_model": lg.v3_model},
                {**meta, "model": name, "dataset": m.dataset_id, **run_metadata(solver_cfg, lg)},
            )
            rows.append(f"{m.dataset_id},{_num(res.relative_error)},{_num(res.baseline_error)},{len(lg.dt)}")
            errs.append((res.relative_error, res.baseline_error))
        avg = np.mean(errs, axis=0) if errs else (float("nan"), float("nan"))
        rows.append(f"average,{_num(avg[0])},{_num(avg[1])},")
        _write_lines(
            out / f"boundary_errors_{name}.csv",
            {**meta, "model": name, "split": cfg.split},
            "boundary-errors",
            "dataset,relative_error,baseline_error,steps",
            rows,
        )
        print(f"{name}: average relative error {avg[0]:.4f} (zero-outflow baseline {avg[1]:.4f}) over {len(errs)} datasets")
    return 0


def cmd_predict(cfg: RunConfig, models) -> int:
    ws = Workspace(cfg.out)
    fds = read_fd_file(_need(ws.fd_file, "junctionflow fit-fd"))
    solver_cfg = cfg.solver()
    meta = _meta(cfg, "predict")
    out = ws.dir("predict")
    for name in models:
        res = run_riemann_prediction(fds, load_coupling(ws, name, fds), solver_cfg, cfg.horizon)
        write_profiles_csv(
            out / f"profiles_{name}.csv",
            res,
            {**meta, "model": name, "horizon": cfg.horizon, "mass_defect": res.mass_defect, **run_metadata(solver_cfg, res.log)},
        )
        print(f"{name}: t = {cfg.horizon} s, mass defect {res.mass_defect:.2e}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--out", help="work directory (default: runs)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="junctionflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {kvfile.TOOL_VERSION}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", parents=[common], help="generate the synthetic corpus")
    g.add_argument("--duration", help="seconds per dataset, or 'table' for the reference durations")
    g.add_argument("--rate-modulation", type=float, dest="rate_modulation")

    sub.add_parser("fit-delays", parents=[common], help="estimate coupling delays, write shifted series")
    sub.add_parser("fit-fd", parents=[common], help="fit fundamental diagrams on the training split")

    c = sub.add_parser("fit-classical", parents=[common], help="calibrate C1-C4 by differential evolution")
    c.add_argument("--model", choices=MODEL_IDS + ("all",), default="all")

    t = sub.add_parser("train-ml", parents=[common], help="train ML1-ML3 with AMSGrad")
    t.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    t.add_argument("--epochs", type=int)
    t.add_argument("--benchmark", choices=("c1prime",), help="train on the flow-maximisation benchmark instead")

    k = sub.add_parser("capability-test", parents=[common], help="C1' benchmark table over seeded runs")
    k.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    k.add_argument("--epochs", type=int)
    k.add_argument("--runs", type=int)

    for name, text in (("simulate", "boundary-flux experiment per dataset"), ("predict", "Riemann prediction")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--model", choices=ALL_MODELS + ("all",), default="all")
        if name == "simulate":
            s.add_argument("--split", choices=("train", "test", "application"))
        else:
            s.add_argument("--horizon", type=float)
    return p


def _expand(choice: str, pool) -> tuple:
    return tuple(pool) if choice == "all" else (choice,)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {
        key: getattr(args, key, None)
        for key in ("seed", "out", "duration", "rate_modulation", "epochs", "runs", "split", "horizon")
    }
    try:
        cfg = load_config(args.config, overrides)
        cmd = args.command
        if cmd == "gen-synth":
            return cmd_gen_synth(cfg)
        if cmd == "fit-delays":
            return cmd_fit_delays(cfg)
        if cmd == "fit-fd":
            return cmd_fit_fd(cfg)
        if cmd == "fit-classical":
            return cmd_fit_classical(cfg, _expand(args.model, MODEL_IDS))
        if cmd == "train-ml":
            return cmd_train_ml(cfg, _expand(args.variant, VARIANTS), args.benchmark)
        if cmd == "capability-test":
            return cmd_capability_test(cfg, _expand(args.variant, VARIANTS))
        if cmd == "simulate":
            return cmd_simulate(cfg, _expand(args.model, ALL_MODELS))
        return cmd_predict(cfg, _expand(args.model, ALL_MODELS))
    except (ConfigError, DomainError, ContractError, TrainingError, OSError) as exc:
        print(f"junctionflow: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
