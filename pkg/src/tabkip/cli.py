"""Command-line entry point: ``tabkip {gen,distill,sweep,calibrate,project}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import logging
import shutil
import sys
from pathlib import Path

from . import __version__, _io
from .config import ConfigError, RunConfig
from .distiller import DistillationError, distill, export_coreset, read_coreset, SyntheticSet
from .evaluator import cell_seed, sweep
from .kernel_ridge import KernelSolveError, KernelSpec, median_bandwidth
from .objectives import calibrate_g
from .projector import projection_report, report_csv
from .tabular_data import (DataError, Dataset, gen_synthetic, load_csv, sidecar_json, split,
                           standardize, write_dataset_csv)

log = logging.getLogger("tabkip")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class RunDir:
    """Output directory for one run: artifacts, config snapshot and a hash manifest."""

    def __init__(self, path, force: bool, command: str):
        self.path = Path(path)
        if self.path.exists() and any(self.path.iterdir()) and not force:
            raise ConfigError(f"output directory {self.path} exists; pass --force to overwrite")
        if self.path.exists() and force:
            shutil.rmtree(self.path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> Path:
        p = self.path / name
        _io.atomic_write_text(p, text)
        self.files[name] = _io.file_hash(p)
        return p

    def adopt(self, name: str) -> None:
        self.files[name] = _io.file_hash(self.path / name)

    def finish(self, cfg: RunConfig) -> None:
        self.write("config.ini", cfg.to_text())
        manifest = {"command": self.command, "version": __version__, "files": self.files}
        _io.atomic_write_text(self.path / "manifest.json", _io.dumps(manifest))


def load_dataset(cfg: RunConfig) -> Dataset:
    path = cfg.raw("data", "path")
    if path:
        return load_csv(path, cfg.raw("data", "label_column"), cfg.raw("data", "positive_value"),
                        name=cfg.raw("data", "name") or None)
    s = cfg.get_int("synthetic", "seed", optional=True)
    ds = gen_synthetic(cfg.get_int("synthetic", "n"), cfg.get_int("synthetic", "d"),
                       cfg.get_float("synthetic", "ir"), cfg.get_float("synthetic", "separation"),
                       cfg.seed if s is None else s)
    name = cfg.raw("data", "name")
    return Dataset(ds.features, ds.labels, ds.feature_names, name=name or ds.name)


def prepared_split(cfg: RunConfig):
    ds = standardize(load_dataset(cfg))
    train, test = split(ds, cfg.split_spec())
    return ds, train, test


def cmd_gen(cfg: RunConfig, out: RunDir) -> int:
    ds = load_dataset(cfg)
    buf = io.StringIO()
    write_dataset_csv(ds, buf, cfg.raw("data", "label_column") or "label")
    out.write("data.csv", buf.getvalue())
    out.write("data.json", sidecar_json(ds))
    print(f"gen: n={ds.n} d={ds.d} positives={ds.n_pos} -> {out.path / 'data.csv'}")
    return EXIT_OK


def cmd_distill(cfg: RunConfig, out: RunDir) -> int:
    _, train, _ = prepared_split(cfg)
    dcfg = cfg.distill_config()
    try:
        coreset, trace = distill(train, dcfg)
    except DistillationError as exc:
        out.write("trace.csv", exc.trace.to_csv())
        print(f"distill: numerical failure: {exc}", file=sys.stderr)
        out.finish(cfg)
        return EXIT_NUMERIC
    export_coreset(coreset, train.standardization, out.path / "coreset.csv", dcfg,
                   trace.final_loss, train)
    out.adopt("coreset.csv")
    out.adopt("coreset.json")
    out.write("trace.csv", trace.to_csv())
    print(f"distill: m={coreset.m} objective={dcfg.objective.kind} "
          f"final_loss={trace.final_loss!r}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: RunDir, jobs: int = 1) -> int:
    _, train, test = prepared_split(cfg)
    base = cfg.distill_config()
    objectives = cfg.sweep_objectives()
    sizes = cfg.get_list("sweep", "sizes", int)
    seeds = cfg.sweep_seeds()
    result = sweep(train, test, objectives, sizes, cfg.classifier_specs(), seeds,
                   cfg.get_bool("sweep", "random_baseline"), cfg.get_bool("sweep", "full_baseline"),
                   base_config=base, dataset_id=train.name,
                   threshold=cfg.get_float("sweep", "threshold"), jobs=jobs)
    out.write("sweep.csv", result.to_csv())
    out.write("sweep.json", result.to_json())
    n_err = sum(r["status"] != "ok" for r in result.rows)

    psize = cfg.get_int("sweep", "project_size", optional=True)
    if psize is not None:
        # rebuild the designated-size coresets exactly as the sweep's first seed made them
        from dataclasses import replace
        kernel = base.kernel or KernelSpec("rbf", median_bandwidth(train.features, 0))
        si = sizes.index(psize) if psize in sizes else len(sizes)
        for oi, obj in enumerate(objectives):
            dc = replace(base, m=psize, objective=obj, kernel=kernel,
                         seed=cell_seed(seeds[0], oi, si))
            try:
                coreset, _ = distill(train, dc)
            except (DistillationError, DataError) as exc:
                log.warning("projection coreset for %s failed: %s", obj.kind, exc)
                continue
            rows = projection_report(train, [(f"{obj.kind}_m{psize}", coreset)])
            out.write(f"projection_{obj.kind}.csv", report_csv(rows))
    print(f"sweep: {len(result)} rows ({n_err} failed) -> {out.path / 'sweep.csv'}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, out: RunDir, jobs: int = 1) -> int:
    ds = standardize(load_dataset(cfg))
    a, b, rows = calibrate_g(
        ds, cfg.get_list("calibrate", "grid_alpha", float),
        cfg.get_list("calibrate", "grid_beta", float), cfg.seed,
        m=cfg.get_int("calibrate", "m"), epochs=cfg.get_int("calibrate", "epochs"),
        val_fraction=cfg.get_float("calibrate", "val_fraction"),
        gamma=cfg.get_float("objective", "gamma"), lam=cfg.get_float("distill", "lam"),
        jobs=jobs)
    out.write("calibration.json", _io.dumps({"alpha_g": a, "beta_g": b, "grid": rows}))
    print(f"calibrate: alpha_g={a!r} beta_g={b!r} over {len(rows)} pairs")
    return EXIT_OK


def _parse_coresets(spec: str):
    items = []
    for i, entry in enumerate(x.strip() for x in spec.split(",") if x.strip()):
        label, _, path = entry.rpartition("=")
        items.append((label or f"coreset{i}", path))
    return items


def cmd_project(cfg: RunConfig, out: RunDir) -> int:
    original = standardize(load_dataset(cfg))
    std = original.standardization
    coresets = []
    for label, path in _parse_coresets(cfg.raw("project", "coresets")):
        s = read_coreset(path)
        if s.d != original.d:
            raise DataError(f"coreset {path} has {s.d} features, original has {original.d}")
        coresets.append((label, SyntheticSet(std.apply(s.X_s), s.y_s, s.y_class,
                                             s.feature_names)))
    rows = projection_report(original, coresets)
    out.write("projection.csv", report_csv(rows))
    print(f"project: {len(rows)} rows -> {out.path / 'projection.csv'}")
    return EXIT_OK


COMMANDS = {
    "gen": (cmd_gen, "write a synthetic two-Gaussian dataset (CSV + JSON sidecar)"),
    "distill": (cmd_distill, "distill one coreset and export it with its loss trace"),
    "sweep": (cmd_sweep, "run the objective x size x classifier x seed evaluation grid"),
    "calibrate": (cmd_calibrate, "grid-search the asig shift pair (alpha_g, beta_g)"),
    "project": (cmd_project, "PCA-project the original data and coreset files"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--out", type=Path, required=True, help="output run directory")
    common.add_argument("--seed", type=int, help="overrides [run] seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel grid cells")
    common.add_argument("--force", action="store_true", help="replace an existing --out")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="tabkip", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"run.seed={args.seed}")
        cfg = RunConfig.load(args.config, overrides)
        out = RunDir(args.out, args.force, args.command)
        fn = COMMANDS[args.command][0]
        if args.command in ("sweep", "calibrate"):
            code = fn(cfg, out, jobs=max(1, args.jobs))
        else:
            code = fn(cfg, out)
        if code == EXIT_OK:
            out.finish(cfg)
        return code
    except ConfigError as exc:
        print(f"tabkip {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"tabkip {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DistillationError, KernelSolveError, FloatingPointError) as exc:
        print(f"tabkip {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
