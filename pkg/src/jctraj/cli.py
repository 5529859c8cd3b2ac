"""Command-line front end: figure presets, custom runs, CSV/JSON output.

Every output file starts with the canonical JSON of the resolved
configuration (``# {...}`` in CSV, a ``"config"`` member in JSON); ``jctraj
replay FILE`` re-runs it and reproduces the data section byte for byte.

Exit codes: 0 success, 2 invalid configuration, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import SimParams, no_jump_series, run_trajectory, uniform_times
from .ensemble import run_ensemble, trajectory_seed
from .errors import InvalidParams, TruncationError
from .observables import atom_entropies, bloch_vector, joint_summary, leaked_information
from .hilbert import partial_trace

PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "custom")
GAMMA_SWEEP = [0.02, 0.2, 2.0, 20.0, 200.0]
DEFAULT_TRAJECTORIES = 10_000
DEFAULT_SEED = 42
# Base seed of the fig5 trajectory; picked once because its trajectory at
# gamma = 2 detects several photons (5 over a full Rabi cycle).
FIG5_SEED = 1
DEFAULT_G_HZ = 10_000.0

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COLUMNS = {
    "fig1": ["gamma", "t", "delta", "delta_s", "delta_f", "F_c"],
    "fig2": ["gamma", "t", "x", "y", "z"],
    "fig3": ["gamma", "t", "mean_entropy", "entropy_se"],
    "fig4": ["gamma", "t", "x", "y", "z"],
    "fig5": ["gamma", "t", "entropy", "jump_count"],
    "fig6": ["gamma", "t_star", "entropy_before", "entropy_after", "delta_e",
             "mean_jump_count", "jump_count_se", "e_leak"],
    "trajectory": ["gamma", "t", "event", "entropy", "jump_count"],
    "ensemble": ["gamma", "t", "delta", "delta_s", "delta_f", "F_c", "x", "y", "z",
                 "mean_entropy", "entropy_se", "mean_jump_count", "jump_count_se"],
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str
    gamma_list: list = field(default_factory=list)
    F: float | None = None
    trajectories: int | None = None
    seed: int | None = None
    fock_dim: int = 16
    dt: float | None = None
    t_final: float | None = None
    t_star: float | None = None
    samples: int = 200
    output_format: str = "csv"
    g_hz: float | None = None
    output_path: str | None = None

    def params(self, gamma: float) -> SimParams:
        F = gamma / 2 if self.F is None else self.F
        return SimParams(g=1.0, F=F, gamma=gamma, fock_dim=self.fock_dim, dt=self.dt, t_final=self.t_final)

    @property
    def table(self) -> str:
        if self.preset != "custom":
            return self.preset
        return "trajectory" if self.trajectories == 1 else "ensemble"


def resolve(config: ExperimentConfig) -> ExperimentConfig:
    """Fill preset defaults and validate; raises ``ConfigError`` naming the bad field."""
    c = replace(config, gamma_list=list(config.gamma_list or []))
    if c.preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {c.preset!r}; choose from {', '.join(PRESETS)}")
    if not c.gamma_list:
        if c.preset == "custom":
            raise ConfigError("gamma: custom runs need --gamma")
        c.gamma_list = [2.0] if c.preset == "fig5" else list(GAMMA_SWEEP)
    c.gamma_list = [float(g) for g in c.gamma_list]
    if c.t_final is None:
        c.t_final = math.pi
    if c.preset == "fig6" and c.t_star is None:
        c.t_star = math.pi / 4
    if c.preset == "fig4":
        c.trajectories, c.seed = None, None
    elif c.preset == "fig5":
        c.trajectories = 1
        c.seed = FIG5_SEED if c.seed is None else c.seed
    else:
        c.trajectories = DEFAULT_TRAJECTORIES if c.trajectories is None else c.trajectories
        c.seed = DEFAULT_SEED if c.seed is None else c.seed

    if c.output_format not in ("csv", "json"):
        raise ConfigError(f"format: must be csv or json, got {c.output_format!r}")
    if c.trajectories is not None and c.trajectories < 1:
        raise ConfigError(f"trajectories: must be >= 1, got {c.trajectories}")
    if c.preset == "fig6" and c.trajectories < 100:
        raise ConfigError("trajectories: fig6 needs at least 100 trajectories")
    if c.seed is not None and c.seed < 0:
        raise ConfigError(f"seed: must be >= 0, got {c.seed}")
    if c.samples < 2:
        raise ConfigError(f"samples: must be >= 2, got {c.samples}")
    if c.g_hz is not None and c.g_hz <= 0:
        raise ConfigError(f"g_hz: must be > 0, got {c.g_hz}")
    for gamma in c.gamma_list:
        if gamma < 0:
            raise ConfigError(f"gamma: rates must be >= 0, got {gamma}")
        if gamma == 0:
            raise ConfigError("gamma: gamma = 0 leaves the initial coherent amplitude 2F/(i gamma) undefined")
        try:
            params = c.params(gamma)
            params.alpha
        except InvalidParams as exc:
            name = "dt" if "dt" in str(exc) else "params"
            raise ConfigError(f"{name}: {exc} (gamma={gamma:g})") from exc
        if c.t_star is not None and not 0 < c.t_star <= params.t_final:
            raise ConfigError(f"t_star: must lie in (0, t_final], got {c.t_star}")
    return c


def describe(config: ExperimentConfig) -> dict:
    """Canonical dictionary of a resolved configuration, including per-gamma derived values."""
    out = asdict(config)
    # where the output went is not part of the experiment
    del out["output_path"]
    out["F_rule"] = "gamma/2" if config.F is None else "fixed"
    runs = []
    for gamma in config.gamma_list:
        p = config.params(gamma)
        runs.append({"gamma": gamma, "F": p.F, "dt": p.dt, "n_steps": p.n_steps,
                     "alpha": [p.alpha.real, p.alpha.imag]})
    out["runs"] = runs
    return out


def validate_and_echo(config: ExperimentConfig) -> str:
    """Resolve ``config`` and return its canonical single-line JSON."""
    return json.dumps(describe(resolve(config)), sort_keys=True)


def config_from_header(header: dict) -> ExperimentConfig:
    fields = {k: v for k, v in header.items() if k in ExperimentConfig.__dataclass_fields__}
    return ExperimentConfig(**fields)


def _time_rows(gamma, times, values, g_hz):
    rows = []
    for i, t in enumerate(times):
        row = [gamma, float(t)] + [v[i] for v in values]
        if g_hz is not None:
            row.append(float(t) / g_hz)
        rows.append(row)
    return rows


def _ensemble_rows(config, params, workers):
    result = run_ensemble(params, config.trajectories, config.seed,
                          uniform_times(params, config.samples), workers=workers)
    summaries = [joint_summary(rho, params.alpha) for rho in result.mean_density]
    return result, summaries


def run_preset(config: ExperimentConfig, workers: int = 1, progress=None) -> tuple[list, list]:
    """Compute the data table of a resolved configuration.

    Returns ``(columns, rows)``.  ``progress`` is called with
    ``(index, total, gamma)`` before each rate of the sweep.
    """
    table = config.table
    columns = list(COLUMNS[table])
    g_hz = config.g_hz
    if g_hz is not None and table != "fig6":
        columns.append("t_seconds")
    rows = []
    total = len(config.gamma_list)
    for i, gamma in enumerate(config.gamma_list):
        if progress is not None:
            progress(i + 1, total, gamma)
        params = config.params(gamma)
        try:
            rows += _rows_for(config, table, gamma, params, g_hz, workers)
        except TruncationError as exc:
            exc.gamma = gamma
            raise
    return columns, rows


def _rows_for(config, table, gamma, params, g_hz, workers):
    times = uniform_times(params, config.samples)
    if table in ("fig1", "fig2", "fig3", "ensemble"):
        result, s = _ensemble_rows(config, params, workers)
        pick = lambda key: [d[key] for d in s]  # noqa: E731
        if table == "fig1":
            values = [pick("delta"), pick("delta_s"), pick("delta_f"), pick("F_c")]
        elif table == "fig2":
            values = [pick("x"), pick("y"), pick("z")]
        elif table == "fig3":
            values = [list(result.mean_entropy), list(result.entropy_se)]
        else:
            values = [pick(k) for k in ("delta", "delta_s", "delta_f", "F_c", "x", "y", "z")]
            values += [list(result.mean_entropy), list(result.entropy_se),
                       list(result.mean_jump_count), list(result.jump_count_se)]
        return _time_rows(gamma, result.sample_times, [[float(x) for x in v] for v in values], g_hz)

    if table == "fig4":
        grid, states = no_jump_series(params, times)
        blochs = [bloch_vector(partial_trace(s.density(), "atom")) for s in states]
        values = [[b.x for b in blochs], [b.y for b in blochs], [b.z for b in blochs]]
        return _time_rows(gamma, grid, values, g_hz)

    if table == "fig5":
        record = run_trajectory(params, trajectory_seed(config.seed, 0))
        amps = np.array([s.amplitudes for s in record.states])
        ent = [float(e) for e in atom_entropies(amps, params.fock_dim)]
        return _time_rows(gamma, record.times, [ent, [int(c) for c in record.counts]], g_hz)

    if table == "fig6":
        leap = leaked_information(params, config.t_star, config.trajectories, config.seed, workers=workers)
        return [[gamma, leap.t_star, leap.entropy_before, leap.entropy_after, leap.delta_e,
                 leap.mean_jump_count, leap.jump_count_se, leap.e_leak]]

    # custom single trajectory: the sample grid plus one row per detected photon
    record = run_trajectory(params, trajectory_seed(config.seed, 0))
    sample_steps = set(params.sample_steps(times).tolist())
    jump_steps = set(np.rint(record.jump_times / params.dt).astype(int).tolist())
    amps = np.array([s.amplitudes for s in record.states])
    ent = atom_entropies(amps, params.fock_dim)
    rows = []
    for k, t in enumerate(record.times):
        for event, steps in (("sample", sample_steps), ("jump", jump_steps)):
            if k in steps:
                row = [gamma, float(t), event, float(ent[k]), int(record.counts[k])]
                if g_hz is not None:
                    row.append(float(t) / g_hz)
                rows.append(row)
    return rows


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(config: ExperimentConfig, columns, rows) -> str:
    header = describe(config)
    if config.output_format == "json":
        return json.dumps({"config": header, "columns": columns, "rows": rows}, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def read_header(path: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    if text.startswith("# "):
        return json.loads(text.splitlines()[0][2:])
    return json.loads(text)["config"]


def _gamma_values(items):
    out = []
    for item in items or []:
        out += [float(x) for x in str(item).split(",") if x.strip()]
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jctraj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_options(p):
        p.add_argument("preset", choices=PRESETS)
        p.add_argument("--gamma", nargs="+", help="decay rates in units of g (comma or space separated)")
        p.add_argument("--F", type=float, dest="F", help="drive amplitude; default gamma/2 per rate")
        p.add_argument("--trajectories", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--fock-dim", type=int, default=16)
        p.add_argument("--dt", type=float, help="largest accepted step (units 1/g)")
        p.add_argument("--t-final", type=float)
        p.add_argument("--t-star", type=float)
        p.add_argument("--samples", type=int, default=200, help="points of the time grid")
        p.add_argument("--format", choices=("csv", "json"), default="csv", dest="output_format")
        p.add_argument("--g-hz", type=float, nargs="?", const=DEFAULT_G_HZ,
                       help="add a t_seconds column using this coupling in Hz (default 10000)")
        p.add_argument("--output", dest="output_path", help="output file; stdout if omitted")

    run_p = sub.add_parser("run", help="run a preset or a custom experiment")
    add_options(run_p)
    run_p.add_argument("--workers", type=int, default=1)
    cfg_p = sub.add_parser("config", help="print the resolved configuration as JSON")
    add_options(cfg_p)
    replay_p = sub.add_parser("replay", help="re-run the configuration embedded in an output file")
    replay_p.add_argument("file")
    replay_p.add_argument("--output", dest="output_path")
    replay_p.add_argument("--workers", type=int, default=1)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        preset=args.preset,
        gamma_list=_gamma_values(args.gamma),
        F=args.F,
        trajectories=args.trajectories,
        seed=args.seed,
        fock_dim=args.fock_dim,
        dt=args.dt,
        t_final=args.t_final,
        t_star=args.t_star,
        samples=args.samples,
        output_format=args.output_format,
        g_hz=args.g_hz,
        output_path=args.output_path,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            config = config_from_header(read_header(args.file))
            config.output_path = args.output_path
        else:
            config = _config_from_args(args)
        config = resolve(config)
    except (ConfigError, InvalidParams, ValueError, KeyError, OSError) as exc:
        print(f"jctraj: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "config":
        print(json.dumps(describe(config), sort_keys=True))
        return 0

    def progress(i, n, gamma):
        print(f"[{i}/{n}] gamma={gamma:g}", file=sys.stderr)

    try:
        columns, rows = run_preset(config, workers=args.workers, progress=progress)
    except TruncationError as exc:
        print(f"jctraj: truncation guard tripped at gamma={exc.gamma:g}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    text = render(config, columns, rows)
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
