"""Command-line front end.

Subcommands::

    superiorize simulate     --config run.cfg
    superiorize reconstruct  --config run.cfg
    superiorize compare      --config a.cfg --config b.cfg --data scan.txt
    superiorize verify-trace metrics.csv

Configs are flat ``key = value`` text files; every key can also be given
as a flag (``grid_side`` becomes ``--grid-side``), and flags win.  Exit
status is 0 on success, 2 when the output is undefined (the iteration cap
was hit before reaching epsilon), 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .criteria import PixelImage, TotalVariation
from .linear import algorithm_r, efficient_view_order, res
from .superiorize import (SuperiorizationConfig, interleaved_run, plain_run, read_trace,
                          superiorized_run, verify_trace, write_trace)
from .tomo import (BRAIN, HEAD_EXTENT, ImageGrid, NoiseModel, ScanGeometry, assemble_problem,
                   head_phantom, load_projection_data, rasterize_phantom, save_projection_data,
                   simulate_projections, system_matrices, uniform_disk)

log = logging.getLogger("superiorization")

EXIT_OK, EXIT_ERROR, EXIT_UNDEFINED = 0, 1, 2

NARROW_WINDOW = (0.204, 0.21675)
# HU -> attenuation needs a water value the scan description does not give;
# 0.1837 /cm (water near 60 keV) is an assumption, see the README
WATER_ATTENUATION = 0.1837
SOFT_TISSUE_WINDOW = (WATER_ATTENUATION * (1 - 0.429), WATER_ATTENUATION * (1 + 0.429))
WINDOW_PRESETS = {"narrow": NARROW_WINDOW, "soft-tissue": SOFT_TISSUE_WINDOW}

# pixels * rays above which a run is expected to take hours
LARGE_WORK = 2e8


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    label: str = "run"
    # phantom and image grid
    phantom: str = "head"
    grid_side: int = 64
    pixel_size: float | None = None
    # scan
    views: int = 15
    angular_increment: float = 12.0
    rays_per_view: int = 96
    ray_spacing: float = 0.27
    detector_subrays: int = 11
    photons_per_ray: int | None = 2_000_000
    scatter_fraction: float = 0.05
    seed: int = 0
    # algorithm
    algorithm: str = "R"
    apply_nonneg: bool = True
    ordering: str = "efficient"
    method: str = "superiorized"
    n_steering: int = 20
    gamma_base: float = 0.99995
    epsilon: str = "phantom*0.3626"
    max_iterations: int = 100_000
    # output
    window: str = "narrow"
    output_dir: str = "."
    data_file: str = "data.txt"

    def __post_init__(self):
        choices = {"phantom": ("head", "disk", "empty"), "algorithm": ("R", "ART", "SIRT"),
                   "ordering": ("efficient", "sequential"),
                   "method": ("plain", "superiorized", "interleaved")}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {', '.join(allowed)}")
        if self.method == "interleaved" and self.algorithm != "R":
            raise ConfigError("the interleaved variant applies to algorithm R only")
        positive = ("grid_side", "views", "rays_per_view", "detector_subrays", "n_steering",
                    "max_iterations")
        for key in positive:
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.pixel_size is not None and self.pixel_size <= 0:
            raise ConfigError("pixel_size must be positive")
        if not 0 < self.gamma_base < 1:
            raise ConfigError("gamma_base must lie in (0, 1)")
        parse_epsilon(self.epsilon)
        self.window_bounds()

    # derived objects

    @property
    def extent(self) -> float:
        return HEAD_EXTENT

    def make_phantom(self):
        if self.phantom == "head":
            return head_phantom(self.extent)
        if self.phantom == "disk":
            return uniform_disk(0.4 * self.extent, BRAIN, self.extent)
        return uniform_disk(0.4 * self.extent, 0.0, self.extent)

    def grid(self) -> ImageGrid:
        size = self.pixel_size if self.pixel_size is not None else self.extent / self.grid_side
        return ImageGrid(self.grid_side, size)

    def geometry(self) -> ScanGeometry:
        return ScanGeometry(self.views, self.angular_increment, self.rays_per_view,
                            self.ray_spacing, self.detector_subrays)

    def noise(self) -> NoiseModel:
        if self.photons_per_ray is None:
            return NoiseModel.exact()
        return NoiseModel(self.photons_per_ray, self.scatter_fraction, self.seed)

    def window_bounds(self) -> tuple[float, float]:
        if self.window in WINDOW_PRESETS:
            low, high = WINDOW_PRESETS[self.window]
        else:
            try:
                low, high = (float(v) for v in self.window.split(","))
            except ValueError:
                raise ConfigError(
                    f"window must be a preset or 'low,high', got {self.window!r}") from None
        if not low < high:
            raise ConfigError("window low must be below window high")
        return low, high

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def work(self) -> float:
        return self.grid_side ** 2 * self.views * self.rays_per_view


def parse_epsilon(text: str):
    """``0.33``, ``phantom``, ``phantom*F`` or ``plain:K``; returns ``(kind, value)``."""
    text = str(text).strip()
    try:
        if text.startswith("plain:"):
            k = int(text[6:])
            if k < 0:
                raise ValueError
            return "plain", k
        if text == "phantom":
            return "phantom", 1.0
        if text.startswith("phantom*"):
            factor = float(text[8:])
            if not factor >= 0:
                raise ValueError
            return "phantom", factor
        value = float(text)
    except ValueError:
        raise ConfigError(f"cannot read epsilon {text!r}") from None
    if not value >= 0:
        raise ConfigError("epsilon must be nonnegative")
    return "value", value


def _convert(field, raw: str):
    raw = raw.strip()
    kind = field.type
    if field.name == "photons_per_ray":
        return None if raw.lower() in ("none", "noiseless") else int(raw)
    if field.name == "pixel_size":
        return None if raw.lower() in ("none", "auto") else float(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


FIELDS = {f.name: f for f in fields(RunConfig)}


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from ``key = value`` lines (``#`` starts a comment)."""
    values = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {number}: expected key = value")
        values[key] = raw
    values.update(overrides or {})
    kwargs = {}
    for key, raw in values.items():
        if key not in FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = _convert(FIELDS[key], str(raw))
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return RunConfig(**kwargs)


def format_config(config: RunConfig) -> str:
    out = []
    for name in FIELDS:
        value = getattr(config, name)
        if value is None:
            value = "noiseless" if name == "photons_per_ray" else "auto"
        out.append(f"{name} = {value}")
    return "\n".join(out) + "\n"


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    text = ""
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    return parse_config(text, overrides)


# -- images ------------------------------------------------------------------

def window_levels(values, window) -> np.ndarray:
    """Linear map of ``[low, high]`` onto 0..255, clipped, rounding halves up."""
    low, high = window
    if not low < high:
        raise ValueError("window low must be below window high")
    scaled = (np.asarray(values, dtype=np.float64) - low) * (255.0 / (high - low))
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def write_image(image, window, path) -> None:
    """Write a square image as 8-bit binary PGM (P5), row 0 first."""
    if not isinstance(image, PixelImage):
        image = PixelImage.from_array(image)
    levels = window_levels(image.grid, window)
    side = image.side
    with open(path, "wb") as fh:
        fh.write(f"P5\n{side} {side}\n255\n".encode("ascii"))
        fh.write(levels.tobytes())


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8).reshape(height, width)


# -- pipeline ----------------------------------------------------------------

def runtime_warning(config: RunConfig) -> str | None:
    if config.work() <= LARGE_WORK:
        return None
    message = (f"config {config.label}: {config.work():.1e} pixel-rays; "
               "expect runs of hours rather than minutes")
    log.warning(message)
    return message


def simulate(config: RunConfig):
    runtime_warning(config)
    data = simulate_projections(config.make_phantom(), config.geometry(), config.noise())
    truth = rasterize_phantom(config.make_phantom(), config.grid_side)
    return data, truth


def _check_data(config: RunConfig, data) -> None:
    if data.geometry != config.geometry():
        raise ConfigError(f"config {config.label}: scan geometry differs from the data file "
                          f"({data.geometry} vs {config.geometry()})")


def build_problem(config: RunConfig, data):
    _check_data(config, data)
    grid = config.grid()
    order = efficient_view_order(config.views) if config.ordering == "efficient" else None
    problem = assemble_problem(data, grid, order, system_matrices(data.geometry, grid))
    if config.algorithm == "ART":
        problem = problem.regrouped("art")
    elif config.algorithm == "SIRT":
        problem = problem.regrouped("sirt")
    return problem


def resolve_epsilon(config: RunConfig, problem, algorithm) -> float:
    kind, value = parse_epsilon(config.epsilon)
    if kind == "value":
        return value
    if kind == "phantom":
        truth = rasterize_phantom(config.make_phantom(), config.grid_side)
        return value * res(problem, truth.values)
    if value == 0:
        return problem.proximity()(np.zeros(problem.dimension))
    return plain_run(algorithm, problem.proximity(), 0.0, max_iterations=value).trace[-1].res


@dataclass
class Outcome:
    label: str
    method: str
    algorithm: str
    epsilon: float
    defined: bool
    iterations: int
    res: float
    tv: float
    seconds: float
    image: PixelImage | None
    run: object = dataclasses.field(repr=False, default=None)


def reconstruct(config: RunConfig, data) -> Outcome:
    runtime_warning(config)
    problem = build_problem(config, data)
    algorithm = algorithm_r(problem, config.apply_nonneg)
    criterion = TotalVariation(config.grid_side)
    epsilon = resolve_epsilon(config, problem, algorithm)
    started = time.perf_counter()
    if config.method == "plain":
        run = plain_run(algorithm, problem.proximity(), epsilon, criterion=criterion,
                        max_iterations=config.max_iterations)
    else:
        n = 1 if config.method == "interleaved" else config.n_steering
        sup = SuperiorizationConfig(criterion, n, config.gamma_base, keep_vectors=False)
        if config.method == "interleaved":
            run = interleaved_run(problem, sup, epsilon, config.apply_nonneg,
                                  config.max_iterations)
        else:
            run = superiorized_run(algorithm, problem.proximity(), sup, epsilon,
                                   config.max_iterations)
    elapsed = time.perf_counter() - started
    last = run.trace[-1]
    image = None
    if run.output.defined:
        image = PixelImage(run.output.point, config.grid_side, config.grid().pixel_size)
    return Outcome(config.label, config.method, config.algorithm, epsilon, run.output.defined,
                   last.k, last.res, last.phi, elapsed, image, run)


def trace_metadata(config: RunConfig, outcome: Outcome) -> dict:
    meta = {"label": config.label, "method": config.method, "algorithm": config.algorithm,
            "epsilon": repr(outcome.epsilon), "gamma_base": repr(config.gamma_base),
            "criterion": "TV", "defined": outcome.defined}
    records = outcome.run.records
    if records:
        # the interleaved variant steers once per block
        meta["n_steering"] = len(records[0].betas)
    return meta


def summary_line(outcome: Outcome) -> str:
    status = "output" if outcome.defined else "UNDEFINED (iteration cap reached)"
    return (f"{outcome.label}: {status}; iterations {outcome.iterations}, "
            f"res {outcome.res:.6g} (epsilon {outcome.epsilon:.6g}), TV {outcome.tv:.6g}")


# -- subcommands -------------------------------------------------------------

def cmd_simulate(config: RunConfig) -> int:
    os.makedirs(config.output_dir, exist_ok=True)
    data, truth = simulate(config)
    data_path = config.path(config.data_file)
    save_projection_data(data, data_path)
    image_path = config.path(f"{config.label}_phantom.pgm")
    write_image(truth, config.window_bounds(), image_path)
    if data.floored_rays:
        print(f"warning: {data.floored_rays} rays recorded no photons", file=sys.stderr)
    print(f"wrote {data_path} and {image_path}")
    return EXIT_OK


def cmd_reconstruct(config: RunConfig, data_path: str | None) -> int:
    os.makedirs(config.output_dir, exist_ok=True)
    data = load_projection_data(data_path or config.path(config.data_file))
    outcome = reconstruct(config, data)
    metrics = config.path(f"{config.label}_metrics.csv")
    write_trace(outcome.run.trace, metrics, trace_metadata(config, outcome))
    print(summary_line(outcome))
    if not outcome.defined:
        print(f"partial trace saved to {metrics}", file=sys.stderr)
        return EXIT_UNDEFINED
    image_path = config.path(f"{config.label}.pgm")
    write_image(outcome.image, config.window_bounds(), image_path)
    print(f"wrote {image_path} and {metrics}")
    return EXIT_OK


TABLE_COLUMNS = ("label", "method", "algorithm", "epsilon", "defined", "iterations", "res", "tv",
                 "seconds")


def format_table(outcomes) -> str:
    rows = [TABLE_COLUMNS]
    for o in outcomes:
        rows.append((o.label, o.method, o.algorithm, f"{o.epsilon:.6g}", str(o.defined),
                     str(o.iterations), f"{o.res:.6g}", f"{o.tv:.6g}", f"{o.seconds:.1f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(TABLE_COLUMNS))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def compare(configs, data):
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    for config in configs:
        _check_data(config, data)
    return [reconstruct(config, data) for config in configs]


def cmd_compare(configs, data_path: str, table_path: str | None) -> int:
    outcomes = compare(configs, load_projection_data(data_path))
    print(format_table(outcomes))
    if table_path:
        with open(table_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TABLE_COLUMNS)
            for o in outcomes:
                writer.writerow([o.label, o.method, o.algorithm, repr(o.epsilon), o.defined,
                                 o.iterations, repr(o.res), repr(o.tv), f"{o.seconds:.3f}"])
    return EXIT_OK if all(o.defined for o in outcomes) else EXIT_UNDEFINED


def cmd_verify_trace(path: str, n_steering=None, gamma_base=None, epsilon=None) -> int:
    trace, meta = read_trace(path)
    if n_steering is None:
        n_steering = int(meta.get("n_steering", 1))
    gamma_base = gamma_base if gamma_base is not None else float(meta.get("gamma_base", 0.99995))
    if epsilon is None and meta.get("defined") == "True" and "epsilon" in meta:
        epsilon = float(meta["epsilon"])
    problems = verify_trace(trace, n_steering, gamma_base, epsilon)
    for p in problems:
        print(p)
    print(f"{path}: {len(trace)} rows, {len(problems)} problems")
    return EXIT_OK if not problems else EXIT_ERROR


# -- argument parsing --------------------------------------------------------

def _add_config_flags(parser):
    parser.add_argument("--config", help="key = value config file")
    for name in FIELDS:
        parser.add_argument("--" + name.replace("_", "-"), dest="set_" + name, metavar="VALUE",
                            help=argparse.SUPPRESS)


def _overrides(args) -> dict:
    return {name: getattr(args, "set_" + name) for name in FIELDS
            if getattr(args, "set_" + name, None) is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superiorize", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate projection data and the phantom image")
    _add_config_flags(p)

    p = sub.add_parser("reconstruct", help="run one reconstruction")
    _add_config_flags(p)
    p.add_argument("--data", help="projection data file (default: data_file in output_dir)")

    p = sub.add_parser("compare", help="run several configs on the same data")
    p.add_argument("--config", action="append", required=True, dest="configs")
    p.add_argument("--data", required=True)
    p.add_argument("--table", help="also write the table as CSV")

    p = sub.add_parser("verify-trace", help="re-check the bookkeeping of a metrics CSV")
    p.add_argument("trace")
    p.add_argument("--n-steering", type=int)
    p.add_argument("--gamma-base", type=float)
    p.add_argument("--epsilon", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(load_config(args.config, _overrides(args)))
        if args.command == "reconstruct":
            return cmd_reconstruct(load_config(args.config, _overrides(args)), args.data)
        if args.command == "compare":
            return cmd_compare([load_config(c) for c in args.configs], args.data, args.table)
        return cmd_verify_trace(args.trace, args.n_steering, args.gamma_base, args.epsilon)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
