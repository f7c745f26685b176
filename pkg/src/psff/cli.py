"""Command-line experiment runner.

Configuration is a flat TOML file (top-level ``key = value`` pairs only);
command-line flags override file values. Every command writes its CSV
outputs, a ``manifest.json`` with SHA-256 checksums and a ``plot.py``
script into the output directory. Numbers are written with 17 significant
digits, so files round-trip bit for bit.

Recognized keys
---------------
model            floquet_v3 | floquet_v2 | ising | rmt
ensemble         CUE | COE | GUE | GOE (rmt model; rmt-curves list)
n_sites          number of spins, 1..14
J, tau, alpha, W model parameters (defaults from the model)
masks            list of N-character bitstrings, site 1 first
n_a              list of subsystem sizes (centred blocks / averaged estimators)
times            explicit time list, or t_start, t_stop, t_step
time_unit        "tau" (default) or "absolute"
n_realizations   disorder realizations for exact curves
shots            protocol runs M
seed             master seed (unsigned 64-bit)
design           clifford | haar
depolarization   per-period strength p
decorrelation    final-rotation error strength eta
plateau_from     start of the plateau average (absolute time)
shift_time       time of the shift readout (absolute; default ramp midpoint)
w_values, alpha_values   scan grid
epsilon, delta, V_tilde  budget inputs
threads          worker threads (default from PSFF_THREADS, else 1)
max_memory_mb    cap for the D**2 * n_realizations memory estimate
out              output directory
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time as _time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, hilbert, noise, rmt, simulate, spectral, stats
from .protocol import TwoDesignKind, write_shots
from .spectral import SubsystemMask

THREADS_ENV = "PSFF_THREADS"
MANIFEST = "manifest.json"
PLOT_SCRIPT = "plot.py"

EXACT_HEADER = ("time", "value", "stderr", "n_realizations", "mask")
PROTOCOL_HEADER = ("time", "estimate", "stderr", "M")
NOISE_HEADER = ("time", "estimate", "stderr", "M", "alpha", "rescaled", "rescaled_stderr")
ANALYZE_HEADER = ("n_a", "P_B", "Q_B", "delta_P_B", "Delta_P_B", "K_plateau_times_DA")
SHIFT_HEADER = ("n_a", "t0", "shift", "shift_times_DA", "delta_P_B")
GAP_HEADER = ("mean_r", "stderr", "n_realizations")
SCAN_HEADER = ("w_over_j", "alpha", "mean_r", "n_realizations")
RMT_HEADER = ("time", "n_a", "value")
BUDGET_HEADER = ("n_a", "V_tilde", "epsilon", "delta", "M_required")
TEXT_COLUMNS = ("mask", "bitstring")


class ConfigError(ValueError):
    pass


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Columns of a CSV written by :func:`write_csv`; numeric columns become arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] for r in body]
        if name in TEXT_COLUMNS:
            out[name] = col
            continue
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = col
    return out


@dataclass
class RunConfig:
    model: str = hilbert.FLOQUET_V3
    ensemble: str = None
    n_sites: int = 4
    J: float = 1.0
    tau: float = None
    alpha: float = 1.2
    W: float = 1.0
    masks: list = field(default_factory=list)
    n_a: list = field(default_factory=list)
    times: list = None
    t_start: float = None
    t_stop: float = None
    t_step: float = None
    time_unit: str = "tau"
    n_realizations: int = 100
    shots: int = 1000
    seed: int = 0
    design: str = "clifford"
    depolarization: float = 0.0
    decorrelation: float = 0.0
    plateau_from: float = None
    shift_time: float = None
    w_values: list = field(default_factory=lambda: [1.0, 10.0])
    alpha_values: list = field(default_factory=lambda: [1.2])
    epsilon: float = 0.1
    delta: float = 0.1
    V_tilde: float = None
    threads: int = None
    max_memory_mb: float = 4096.0
    out: str = "psff_out"

    _lines: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls) if not f.name.startswith("_")]

    def echo(self):
        d = asdict(self)
        d.pop("_lines")
        return d

    def _fail(self, key, msg):
        line = self._lines.get(key)
        where = f"line {line}, " if line else ""
        raise ConfigError(f"{where}field '{key}': {msg}")

    def validate(self):
        if self.model not in hilbert.VARIANTS:
            self._fail("model", f"expected one of {hilbert.VARIANTS}")
        if not isinstance(self.n_sites, int) or not 1 <= self.n_sites <= hilbert.SpinRegister.max_sites:
            self._fail("n_sites", f"expected an integer in 1..{hilbert.SpinRegister.max_sites}")
        for key in ("J", "alpha"):
            if not getattr(self, key) > 0:
                self._fail(key, "must be positive")
        if self.tau is not None and not self.tau > 0:
            self._fail("tau", "must be positive")
        if self.W < 0:
            self._fail("W", "must be non-negative")
        if self.model == hilbert.RMT and self.ensemble is None:
            self._fail("ensemble", "required for the rmt model")
        if self.ensemble is not None:
            for e in np.atleast_1d(self.ensemble):
                try:
                    rmt.EnsembleKind(str(e).upper())
                except ValueError:
                    self._fail("ensemble", f"unknown ensemble {e!r}")
        for m in self.masks:
            if not isinstance(m, str) or len(m) != self.n_sites or set(m) - {"0", "1"}:
                self._fail("masks", f"{m!r} is not a {self.n_sites}-character bitstring")
        for k in self.n_a:
            if not isinstance(k, int) or not 0 <= k <= self.n_sites:
                self._fail("n_a", f"{k!r} outside 0..{self.n_sites}")
        if self.time_unit not in ("tau", "absolute"):
            self._fail("time_unit", "expected 'tau' or 'absolute'")
        if self.times is None and None in (self.t_start, self.t_stop, self.t_step):
            self._fail("times", "give a times list or t_start, t_stop and t_step")
        if self.times is None and not self.t_step > 0:
            self._fail("t_step", "must be positive")
        for key in ("n_realizations", "shots"):
            v = getattr(self, key)
            if not isinstance(v, int) or v < 1:
                self._fail(key, "must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            self._fail("seed", "must be an unsigned 64-bit integer")
        try:
            TwoDesignKind(self.design)
        except ValueError:
            self._fail("design", "expected 'clifford' or 'haar'")
        if not 0 <= self.depolarization <= 1:
            self._fail("depolarization", "must lie in [0, 1]")
        if self.decorrelation < 0:
            self._fail("decorrelation", "must be non-negative")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            self._fail("threads", "must be a positive integer")
        est = 16 * 4 ** self.n_sites * self.n_realizations / 2 ** 20
        if est > self.max_memory_mb:
            self._fail("n_realizations", f"memory estimate {est:.0f} MB exceeds max_memory_mb")
        try:
            self.time_grid()
        except ValueError as exc:
            self._fail("times", str(exc))
        return self

    def model_spec(self, **override):
        kw = dict(variant=self.model, J=self.J, tau=self.tau, alpha=self.alpha, W=self.W,
                  ensemble=None if self.ensemble is None else str(np.atleast_1d(self.ensemble)[0]))
        kw.update(override)
        return hilbert.ModelSpec(**kw)

    def register(self):
        return hilbert.SpinRegister(self.n_sites)

    def time_grid(self, spec=None):
        spec = self.model_spec() if spec is None else spec
        if self.times is not None:
            t = np.asarray(self.times, dtype=float)
        else:
            n = int(np.floor((self.t_stop - self.t_start) / self.t_step + 1e-9)) + 1
            t = self.t_start + self.t_step * np.arange(max(n, 0))
        if t.size == 0 or np.any(t < 0):
            raise ValueError("time grid must be non-empty and non-negative")
        if self.time_unit == "tau":
            if spec.is_floquet and np.any(np.abs(t - np.rint(t)) > 1e-9):
                raise ValueError("Floquet times must be integer multiples of tau")
            t = (np.rint(t) if spec.is_floquet else t) * spec.tau
        return t

    def mask_list(self, default_full=True):
        out = [SubsystemMask.from_bitstring(m) for m in self.masks]
        out += [SubsystemMask.middle(self.n_sites, k) for k in self.n_a]
        if not out and default_full:
            out = [SubsystemMask.full(self.n_sites)]
        seen, uniq = set(), []
        for m in out:
            if m not in seen:
                seen.add(m)
                uniq.append(m)
        return uniq

    def n_threads(self):
        if self.threads is not None:
            return self.threads
        return int(os.environ.get(THREADS_ENV, "1"))


def _key_lines(text):
    lines = {}
    for k, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s and not s.startswith("#") and "=" in s:
            lines.setdefault(s.split("=", 1)[0].strip(), k)
    return lines


def load_config(path=None, overrides=None):
    """Build a validated :class:`RunConfig` from a file and flag overrides."""
    data, lines = {}, {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = fh.read()
        try:
            data = tomllib.loads(raw.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        lines = _key_lines(raw.decode())
        for k, v in data.items():
            if isinstance(v, dict):
                raise ConfigError(f"{path}: line {lines.get(k, '?')}: tables are not allowed, keys must be flat")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = set(RunConfig.keys())
    for k in data:
        if k not in known:
            where = f"line {lines[k]}, " if k in lines else ""
            raise ConfigError(f"{where}unknown field '{k}'")
    cfg = RunConfig(**data)
    cfg._lines = lines
    return cfg.validate()


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = tomllib.loads(f"v = {v}")["v"]
        except tomllib.TOMLDecodeError:
            out[k.strip()] = v
    return out


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, cfg, outputs, wall_time):
    """Config echo, version, wall time and checksums of every output file."""
    entry = {
        "command": command,
        "version": __version__,
        "config": cfg.echo(),
        "wall_time_s": wall_time,
        "outputs": {os.path.basename(p): _sha256(p) for p in sorted(outputs)},
    }
    path = os.path.join(out_dir, MANIFEST)
    with open(path, "w") as fh:
        json.dump(entry, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def verify_manifest(out_dir, manifest=None):
    """Names of outputs whose current checksum differs from the manifest."""
    if manifest is None:
        with open(os.path.join(out_dir, MANIFEST)) as fh:
            manifest = json.load(fh)
    bad = []
    for name, digest in manifest["outputs"].items():
        p = os.path.join(out_dir, name)
        if not os.path.exists(p) or _sha256(p) != digest:
            bad.append(name)
    return bad


def emit_plot_script(out_dir, outputs):
    """Matplotlib script drawing every CSV on log-log and linear axes."""
    names = sorted(os.path.basename(p) for p in outputs if p.endswith(".csv"))
    script = f'''import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = {names!r}
X = ("time", "n_a", "w_over_j")
Y = ("value", "estimate", "rescaled", "K_plateau_times_DA", "mean_r", "M_required")


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


for name in FILES:
    rows = load(name)
    if not rows:
        continue
    xk = next((k for k in X if k in rows[0]), None)
    yk = next((k for k in Y if k in rows[0]), None)
    if xk is None or yk is None:
        continue
    groups = {{}}
    for r in rows:
        key = r.get("n_a") if xk == "time" and "n_a" in r else ""
        groups.setdefault(key, []).append((float(r[xk]), float(r[yk])))
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, log in zip(axes, (True, False)):
        for key, pts in groups.items():
            pts.sort()
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, marker=".", label=f"n_a={{key}}" if key else None)
        if log:
            ax.set_xscale("symlog", linthresh=1.0)
            ax.set_yscale("log")
        ax.set_xlabel(xk)
        ax.set_ylabel(yk)
        if any(groups):
            ax.legend()
    fig.suptitle(name)
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, name[:-4] + ".png"), dpi=120)
    plt.close(fig)
'''
    path = os.path.join(out_dir, PLOT_SCRIPT)
    with open(path, "w") as fh:
        fh.write(script)
    return path


def _out(cfg, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def cmd_exact(cfg):
    spec, reg = cfg.model_spec(), cfg.register()
    times = cfg.time_grid(spec)
    masks = cfg.mask_list()
    samples = spectral.sample_ensemble(spec, reg, masks, times, cfg.n_realizations, cfg.seed,
                                       threads=cfg.n_threads())
    paths = []
    for m in masks:
        s = samples.series(m)
        rows = [(t, v, e, s.n_realizations, m.bitstring)
                for t, v, e in zip(s.times, s.values, s.stderr)]
        paths.append(write_csv(_out(cfg, f"exact_{m.bitstring}.csv"), EXACT_HEADER, rows))
    return paths


def _protocol_rows(series):
    return [(t, v, e, series.n_realizations)
            for t, v, e in zip(series.times, series.values, series.stderr)]


def _simulate(cfg):
    spec, reg = cfg.model_spec(), cfg.register()
    times = cfg.time_grid(spec)
    shots = simulate.simulate_shots(spec, reg, times, cfg.shots, cfg.seed, design=cfg.design,
                                    depolarization=cfg.depolarization, eta=cfg.decorrelation,
                                    threads=cfg.n_threads())
    return spec, shots


def cmd_protocol(cfg):
    _, shots = _simulate(cfg)
    paths = [_out(cfg, "shots.csv")]
    write_shots(paths[0], shots)
    for m in cfg.mask_list():
        s = simulate.estimate_series(shots, mask=m)
        paths.append(write_csv(_out(cfg, f"protocol_{m.bitstring}.csv"), PROTOCOL_HEADER,
                               _protocol_rows(s)))
    for k in cfg.n_a:
        s = simulate.estimate_series(shots, n_a=k)
        paths.append(write_csv(_out(cfg, f"protocol_avg_na{k}.csv"), PROTOCOL_HEADER,
                               _protocol_rows(s)))
    return paths


def cmd_noise(cfg):
    """Noisy protocol run with depolarization undone through the state purity.

    The purity of the globally depolarized state is taken in closed form;
    the coherent weight alpha follows from it and rescales each estimate.
    """
    spec, shots = _simulate(cfg)
    paths = [_out(cfg, "shots.csv")]
    write_shots(paths[0], shots)
    d = 2 ** cfg.n_sites
    n_periods = shots.times / spec.tau
    if cfg.depolarization > 0:
        purity = noise.purity_under_depolarization(n_periods, cfg.depolarization, d)
        alpha = np.atleast_1d(noise.alpha_from_purity(purity, d))
    else:
        alpha = np.ones(shots.times.size)
    targets = [(m, simulate.estimate_series(shots, mask=m), f"noise_{m.bitstring}.csv")
               for m in cfg.mask_list()]
    targets += [(SubsystemMask.middle(cfg.n_sites, k), simulate.estimate_series(shots, n_a=k),
                 f"noise_avg_na{k}.csv") for k in cfg.n_a]
    for m, s, name in targets:
        resc = noise.rescale_psff(s.values, alpha, m.d_a)
        rows = [(t, v, e, s.n_realizations, a, r, e / a)
                for t, v, e, a, r in zip(s.times, s.values, s.stderr, alpha, np.atleast_1d(resc))]
        paths.append(write_csv(_out(cfg, name), NOISE_HEADER, rows))
    return paths


def _heisenberg_time(spec, samples, dim):
    if spec.is_floquet:
        return dim * spec.tau
    spacing = np.median(np.concatenate([np.diff(e) for e in samples.energies]))
    return 2 * np.pi / spacing


def cmd_analyze(cfg):
    spec, reg = cfg.model_spec(), cfg.register()
    times = cfg.time_grid(spec)
    sizes = cfg.n_a or list(range(1, cfg.n_sites + 1))
    masks = [SubsystemMask.middle(cfg.n_sites, k) for k in sizes]
    full = SubsystemMask.full(cfg.n_sites)
    samples = spectral.sample_ensemble(spec, reg, list(dict.fromkeys(masks + [full])), times,
                                       cfg.n_realizations, cfg.seed, threads=cfg.n_threads(),
                                       keep_energies=True)
    t_h = _heisenberg_time(spec, samples, reg.dim)
    start = 4 * t_h if cfg.plateau_from is None else cfg.plateau_from
    late = times >= start
    k_full = samples.series(full)
    if cfg.shift_time is not None:
        t0 = times[k_full.at(cfg.shift_time)]
    else:
        t0 = spectral.detect_ramp_window(k_full, t_max=t_h).midpoint
        t0 = times[np.argmin(np.abs(times - t0))]
    rows, shift_rows = [], []
    for k, m in zip(sizes, masks):
        diag = samples.diagnostics(m)
        s = samples.series(m)
        plateau = float(s.values[late].mean()) * m.d_a if late.any() else float("nan")
        rows.append((k, diag.P_B, diag.Q_B, diag.delta_P_B, diag.Delta_P_B, plateau))
        shift = spectral.shift_extract(s, k_full, t0)
        shift_rows.append((k, t0, shift, shift * m.d_a, diag.delta_P_B))
    r = samples.gap_ratio[np.isfinite(samples.gap_ratio)]
    r_err = r.std(ddof=1) / np.sqrt(r.size) if r.size > 1 else 0.0
    return [
        write_csv(_out(cfg, "analyze.csv"), ANALYZE_HEADER, rows),
        write_csv(_out(cfg, "shift.csv"), SHIFT_HEADER, shift_rows),
        write_csv(_out(cfg, "gap_ratio.csv"), GAP_HEADER, [(r.mean(), r_err, r.size)]),
    ]


def cmd_scan(cfg):
    reg = cfg.register()
    rows = []
    for w in cfg.w_values:
        for a in cfg.alpha_values:
            spec = cfg.model_spec(variant=hilbert.ISING, W=float(w) * cfg.J, alpha=float(a))
            h = np.array([hilbert.sample_disorder(spec, reg, cfg.seed, i).fields["z"]
                          for i in range(cfg.n_realizations)])
            e = np.linalg.eigvalsh(hilbert.ising_from_fields(spec, h, reg))
            r = np.array([spectral.gap_ratio_mean(x) for x in e])
            rows.append((float(w), float(a), float(np.mean(r)), cfg.n_realizations))
    return [write_csv(_out(cfg, "scan.csv"), SCAN_HEADER, rows)]


def cmd_rmt(cfg):
    kinds = np.atleast_1d(cfg.ensemble if cfg.ensemble is not None else [k.value for k in rmt.EnsembleKind])
    d = 2 ** cfg.n_sites
    sizes = sorted(set(cfg.n_a) | {cfg.n_sites})
    paths = []
    for kind in kinds:
        kind = rmt.EnsembleKind(str(kind).upper())
        tau = cfg.model_spec().tau if cfg.tau is None else cfg.tau
        params = rmt.AnalyticParams.default(kind, d, tau)
        times = cfg.time_grid(hilbert.ModelSpec(hilbert.RMT, J=cfg.J, tau=tau, ensemble=kind.value))
        rows = []
        for k in sizes:
            vals = rmt.psff_analytic(kind, params, 2 ** k, 2 ** (cfg.n_sites - k), times)
            rows += [(t, k, v) for t, v in zip(times, np.atleast_1d(vals))]
        paths.append(write_csv(_out(cfg, f"rmt_{kind.value.lower()}.csv"), RMT_HEADER, rows))
    return paths


def budget_rows(cfg):
    sizes = cfg.n_a or [cfg.n_sites]
    rows = []
    for k in sizes:
        if cfg.V_tilde is not None:
            v = float(cfg.V_tilde)
        else:
            n = max(cfg.n_sites, k)
            mask = SubsystemMask.middle(n, k)
            v = stats.rmt_rescaled_variance(rmt.EnsembleKind.CUE, n, mask, 1.0, tau=1.0)
        rep = stats.measurement_budget(v, cfg.epsilon, cfg.delta)
        rows.append((k, rep.V_tilde, rep.epsilon, rep.delta, rep.M_required))
    return rows


def cmd_budget(cfg):
    """Chebyshev run budget; by default the rescaled variance at the CUE dip."""
    rows = budget_rows(cfg)
    for row in rows:
        print("n_a={} V_tilde={} epsilon={} delta={} M_required={}".format(*row))
    return [write_csv(_out(cfg, "budget.csv"), BUDGET_HEADER, rows)]


COMMANDS = {
    "exact": cmd_exact,
    "protocol": cmd_protocol,
    "analyze": cmd_analyze,
    "scan": cmd_scan,
    "rmt-curves": cmd_rmt,
    "budget": cmd_budget,
    "noise": cmd_noise,
}


def build_parser():
    p = argparse.ArgumentParser(prog="psff", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat TOML configuration file")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--depolarization", type=float, help="per-period depolarization p")
        s.add_argument("--decorrelation", type=float, help="final-rotation error eta")
        s.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config field (TOML value syntax)")
        s.add_argument("--verify", action="store_true",
                       help="rerun and compare checksums with the existing manifest")
    return p


def run(command, cfg, verify=False):
    """Execute a command; with ``verify`` return the outputs that changed."""
    previous = None
    if verify:
        with open(os.path.join(cfg.out, MANIFEST)) as fh:
            previous = json.load(fh)
    t0 = _time.perf_counter()
    outputs = list(COMMANDS[command](cfg))
    outputs.append(emit_plot_script(cfg.out, outputs))
    write_manifest(cfg.out, command, cfg, outputs, _time.perf_counter() - t0)
    return verify_manifest(cfg.out, previous) if verify else []


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = _parse_set(args.set)
    for key in ("seed", "threads", "out", "depolarization", "decorrelation"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    bad = run(args.command, cfg, verify=args.verify)
    if args.verify:
        if bad:
            print("checksum mismatch: " + ", ".join(bad), file=sys.stderr)
            return 1
        print("all checksums match")
    return 0


if __name__ == "__main__":
    sys.exit(main())
