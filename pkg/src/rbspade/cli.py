"""Command-line front end: ``rbspade <command> [options]``.

Commands
--------
calibrate     fit widths and report the Rayleigh limit of calibration curves
simulate      draw a synthetic dataset for a one- or two-source scene
discriminate  RB comparison of src1 / src2 / combined for a dataset
sweep         Monte Carlo success probability versus separation
estimate      RB map over a grid of separations and/or centroids

Every option can also be given in a JSON ``--config`` file under its long
name with dashes replaced by underscores.  Precedence is command line, then
config file, then the built-in default.  The effective settings are echoed
into each JSON output.  Outputs go to ``--out-dir``, which defaults to
``$RBSPADE_OUTPUT_DIR`` or the working directory; they appear only when the
whole command succeeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import presets
from .analysis import (critical_distance, expansion_coefficients, mc_success_sweep,
                       mismatch_study, plausible_map, success_threshold)
from .calibration import (fit_gaussian, load_calibration, rayleigh_limit, synth_calibration,
                          write_calibration)
from .errors import (ConfigurationError, DegenerateDataError, DomainError, FitError,
                     InputError, UndefinedRBError)
from .inference import DiscriminationConfig, Prior1D, discriminate
from .scene import DATASET_COLUMNS, SceneParams, read_dataset, simulate_dataset

OUTPUT_ENV = "RBSPADE_OUTPUT_DIR"
_NOT_ECHOED = {"config", "out_dir", "workers"}
_ERRORS = (InputError, ConfigurationError, DomainError, FitError, DegenerateDataError,
           UndefinedRBError)


# -- option plumbing ---------------------------------------------------------

class _Command:
    """Subparser plus the built-in defaults of its options."""

    def __init__(self, sub, name, help, run):
        self.name = name
        self.run = run
        self.defaults: dict = {}
        self.parser = sub.add_parser(name, help=help, description=help)
        self.parser.set_defaults(_command=self)

    def add(self, *flags, default=None, help="", **kw):
        action = self.parser.add_argument(*flags, default=argparse.SUPPRESS, help=help, **kw)
        self.defaults[action.dest] = default
        if default is not None and action.help and not isinstance(default, bool):
            action.help += f" (default: {_fmt_default(default)})"
        return action

    def actions(self) -> dict:
        return {a.dest: a for a in self.parser._actions if a.dest in self.defaults}


def _fmt_default(value) -> str:
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return str(value)


def _coerce(action, value, key):
    if isinstance(action, argparse._StoreTrueAction):
        if not isinstance(value, bool):
            raise ConfigurationError(f"config field {key!r} must be true or false")
        return value
    if value is None:
        return None
    conv = action.type or str
    try:
        if action.nargs is None:
            if isinstance(value, (list, dict)):
                raise TypeError
            out = conv(value)
        else:
            if not isinstance(value, list):
                raise TypeError
            if isinstance(action.nargs, int) and len(value) != action.nargs:
                raise ConfigurationError(f"config field {key!r} needs {action.nargs} values")
            if not value:
                raise TypeError
            out = [conv(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigurationError(f"config field {key!r} has an invalid value {value!r}") from None
    if action.choices is not None and out not in action.choices:
        raise ConfigurationError(f"config field {key!r} must be one of {list(action.choices)}")
    return out


def _read_config(path, cmd: _Command) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: configuration must be a JSON object")
    actions = cmd.actions()
    extra = sorted(set(doc) - (set(actions) - {"config"}))
    if extra:
        raise ConfigurationError(f"{path}: unknown configuration fields {extra}")
    out = {}
    for key, value in doc.items():
        if key == "hypotheses" and isinstance(value, dict):
            out[key] = value
        else:
            out[key] = _coerce(actions[key], value, key)
    return out


def _effective(cmd: _Command, ns: argparse.Namespace) -> dict:
    given = {k: v for k, v in vars(ns).items() if k in cmd.defaults}
    cfg = _read_config(given["config"], cmd) if given.get("config") else {}
    eff = {**cmd.defaults, **cfg, **given}
    if eff.get("workers") is None:
        eff["workers"] = os.cpu_count() or 1
    if eff["workers"] < 1:
        raise ConfigurationError("--workers must be positive")
    return eff


def _echo(eff: dict) -> dict:
    out = {k: v for k, v in sorted(eff.items()) if k not in _NOT_ECHOED}
    if eff.get("config"):
        out["config_file"] = str(eff["config"])
    return out


def _add_common(cmd: _Command, name: str, stochastic: bool = False):
    cmd.add("--config", metavar="PATH", help="JSON file with option values")
    cmd.add("--out-dir", metavar="DIR",
            help=f"output directory (default: ${OUTPUT_ENV} or the working directory)")
    cmd.add("--name", metavar="STEM", default=name, help="stem of the output file names")
    cmd.add("--workers", type=int, metavar="N",
            help="worker threads; results do not depend on it (default: CPU count)")
    if stochastic:
        cmd.add("--seed", type=int, metavar="INT",
                help="master random seed (required, no clock-based default)")


def _add_sources(cmd: _Command):
    cmd.add("--cal1", metavar="PATH", help="calibration CSV of source 1 (x in um)")
    cmd.add("--cal2", metavar="PATH", help="calibration CSV of source 2 (x in um)")
    cmd.add("--preset", choices=("experiment", "identical"), default="experiment",
            help="synthetic calibrations used when no CSVs are given")
    cmd.add("--variances", nargs=4, type=float, metavar="V",
            help="per-mode noise variances I0..I3 (intensity units squared)")


# -- shared helpers ----------------------------------------------------------

def _sources(eff: dict):
    if eff["cal1"] or eff["cal2"]:
        if not (eff["cal1"] and eff["cal2"]):
            raise ConfigurationError("--cal1 and --cal2 must be given together")
        cals = (load_calibration(eff["cal1"], "src1"), load_calibration(eff["cal2"], "src2"))
    elif eff["preset"] == "identical":
        cals = presets.identical_pair()
    else:
        cals = presets.source_pair()
    if eff["variances"] is not None:
        cals = tuple(c.with_variances(eff["variances"]) for c in cals)
    return cals


def _require_seed(eff: dict) -> int:
    if eff.get("seed") is None:
        raise ConfigurationError("--seed is required for this command")
    return int(eff["seed"])


def _variances(eff, cals, meta) -> np.ndarray:
    if eff["variances"] is not None:
        return np.asarray(eff["variances"], dtype=float)
    if "variances" in meta:
        return np.asarray(meta["variances"], dtype=float)
    return (cals[0].variances + cals[1].variances) / 2


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def _write_outputs(out_dir: Path, files: dict) -> list[Path]:
    """Stage every file in a scratch directory, then move them into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".rbspade-", dir=out_dir))
    done = []
    try:
        for name, writer in files.items():
            writer(stage / name)
        for name in files:
            os.replace(stage / name, out_dir / name)
            done.append(out_dir / name)
    except BaseException:
        for p in done:
            p.unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return done


def _text(content: str):
    def write(path):
        path.write_text(content, encoding="utf-8")
    return write


# -- calibrate ---------------------------------------------------------------

def _spline_diagnostics(cal) -> dict:
    knots = cal.curves.knots
    gaps = np.diff(knots)
    inner = knots[1:-1]
    eps = 1e-6 * float(gaps.min())
    jump = np.abs(cal(inner + eps, 2) - cal(inner - eps, 2)).max() if inner.size else 0.0
    scale = float(np.abs(cal(knots, 2)).max()) or 1.0
    return {
        "n_knots": int(knots.size),
        "domain_um": [float(knots[0]), float(knots[-1])],
        "knot_spacing_um": [float(gaps.min()), float(gaps.max())],
        "knot_residual": float(np.abs(cal(knots) - cal.curves.values).max()),
        "second_derivative_jump_rel": float(jump / scale),
        "min_intensity": cal.min_intensity(),
        "peak_intensity": [float(v) for v in cal(knots).max(axis=0)],
    }


def run_calibrate(eff: dict) -> dict:
    if eff["cal"]:
        if len(eff["cal"]) > 2:
            raise ConfigurationError("--cal takes one or two files")
        cals = [load_calibration(p, f"src{i + 1}") for i, p in enumerate(eff["cal"])]
    elif eff["synthetic"]:
        widths = eff["width"]
        if len(widths) > 2:
            raise ConfigurationError("--width takes one or two values")
        inten = eff["intensity"] or [1.0] * len(widths)
        if len(inten) != len(widths):
            raise ConfigurationError("--intensity needs one value per width")
        var = eff["variances"] or [1.0] * 4
        cals = [synth_calibration(w, t, eff["offset"], var, domain=tuple(eff["domain"]),
                                  step=eff["step"], source_id=f"src{i + 1}")
                for i, (w, t) in enumerate(zip(widths, inten))]
    else:
        raise ConfigurationError("give calibration files with --cal or use --synthetic")
    if eff["variances"] is not None:
        cals = [c.with_variances(eff["variances"]) for c in cals]

    sources = []
    for cal in cals:
        fit = fit_gaussian(cal.modes[0], eff["fit_threshold"])
        sources.append({
            "source_id": cal.source_id,
            "fit": {"amplitude": fit.amplitude, "center_um": fit.center, "width_um": fit.width},
            "spline": _spline_diagnostics(cal),
            "variances": [float(v) for v in cal.variances],
        })
    summary = {"command": "calibrate", "config": _echo(eff), "sources": sources}
    if len(cals) == 2:
        summary["rayleigh_limit_um"] = rayleigh_limit(sources[0]["fit"]["width_um"],
                                                      sources[1]["fit"]["width_um"])
    files = {f"{eff['name']}.json": _text(_json(summary))}
    if eff["export"]:
        for cal in cals:
            files[f"{eff['name']}_{cal.source_id}.csv"] = (
                lambda path, cal=cal: write_calibration(cal, path))
    return files


def _setup_calibrate(sub):
    cmd = _Command(sub, "calibrate", "fit calibration curves and report the Rayleigh limit",
                   run_calibrate)
    _add_common(cmd, "calibration")
    cmd.add("--cal", nargs="+", metavar="PATH",
            help="one or two calibration CSVs (x_um, I0..I3, var0..var3)")
    cmd.add("--synthetic", action="store_true", default=False,
            help="use displaced-vacuum model curves instead of files")
    cmd.add("--width", nargs="+", type=float, metavar="UM",
            default=[presets.SRC1_WIDTH, presets.SRC2_WIDTH],
            help="synthetic Gaussian widths (um)")
    cmd.add("--intensity", nargs="+", type=float, metavar="I",
            help="synthetic total intensities (detector units; default: 1 each)")
    cmd.add("--offset", type=float, metavar="UM", default=0.0,
            help="synthetic offset of the beam axis from the mode axis (um)")
    cmd.add("--domain", nargs=2, type=float, metavar=("LO", "HI"), default=[-1000.0, 1000.0],
            help="synthetic scan range (um)")
    cmd.add("--step", type=float, metavar="UM", default=2.0, help="synthetic scan step (um)")
    cmd.add("--variances", nargs=4, type=float, metavar="V",
            help="per-mode noise variances I0..I3 (intensity units squared)")
    cmd.add("--fit-threshold", type=float, metavar="FRAC", default=0.01,
            help="fit only points above this fraction of the mode-0 peak (dimensionless)")
    cmd.add("--export", action="store_true", default=False,
            help="also write the curves as calibration CSVs")
    return cmd


# -- simulate ----------------------------------------------------------------

def run_simulate(eff: dict) -> dict:
    seed = _require_seed(eff)
    cal1, cal2 = _sources(eff)
    q, d = eff["q"], eff["d"]
    if eff["scene"] == "src1":
        q, d = 1.0, 0.0
    elif eff["scene"] == "src2":
        q, d = 0.0, 0.0
    params = SceneParams(q, eff["x_c"], d)
    v = _variances(eff, (cal1, cal2), {})
    data = simulate_dataset(cal1, cal2, params, v, eff["n"], seed)
    meta = dict(data.metadata, config=_echo(eff), scene=eff["scene"])
    rows = [dict(zip(DATASET_COLUMNS, map(float, r))) for r in data.samples]
    stem = eff["name"]
    return {f"{stem}.csv": _text(_csv(DATASET_COLUMNS, rows)),
            f"{stem}.json": _text(_json(meta))}


def _setup_simulate(sub):
    cmd = _Command(sub, "simulate", "draw a synthetic dataset", run_simulate)
    _add_common(cmd, "dataset", stochastic=True)
    _add_sources(cmd)
    cmd.add("--scene", choices=("src1", "src2", "combined"), default="combined",
            help="src1 / src2 force q = 1 / 0 and d = 0")
    cmd.add("--q", type=float, metavar="FRAC", default=presets.IMBALANCE,
            help="brightness share of source 1 (dimensionless, 0..1)")
    cmd.add("--x-c", type=float, metavar="UM", default=presets.CENTROID, help="centroid (um)")
    cmd.add("--d", type=float, metavar="UM", default=presets.SEPARATION, help="separation (um)")
    cmd.add("--n", type=int, metavar="N", default=10000, help="number of samples (count)")
    return cmd


# -- discriminate ------------------------------------------------------------

def run_discriminate(eff: dict) -> dict:
    data = read_dataset(eff["data"])
    cal1, cal2 = _sources(eff)
    v = _variances(eff, (cal1, cal2), data.metadata)
    base = DiscriminationConfig.default_for(cal1, cal2, eff["d_max"])
    doc = eff["hypotheses"]
    if isinstance(doc, str):
        cfg = DiscriminationConfig.load(doc, base)
    elif isinstance(doc, dict):
        cfg = DiscriminationConfig.from_dict(doc, base)
    else:
        cfg = base
    hyps = cfg.hypotheses()
    result = discriminate(data, hyps, cal1, cal2, v, cfg.grids)
    out = {"command": "discriminate", "config": _echo(eff), "hypothesis_config": cfg.to_dict(),
           "variances": [float(x) for x in v], "n_samples": len(data),
           "result": result.to_dict()}
    if eff["chunk"]:
        if eff["chunk"] < 1:
            raise ConfigurationError("--chunk must be positive")
        parts = data.chunks(eff["chunk"])

        def one(part):
            return discriminate(part, hyps, cal1, cal2, v, cfg.grids)

        with ThreadPoolExecutor(max_workers=eff["workers"]) as ex:
            results = list(ex.map(one, parts))
        labels = [list(r.selected) for r in results]
        counts: dict = {}
        for lab in labels:
            key = "|".join(map(str, lab))
            counts[key] = counts.get(key, 0) + 1
        out["chunks"] = {
            "size": eff["chunk"],
            "count": len(parts),
            "argmax": labels,
            "label_counts": counts,
            "unanimous": len(counts) == 1,
            "results": [r.to_dict() for r in results],
        }
    return {f"{eff['name']}.json": _text(_json(out))}


def _setup_discriminate(sub):
    cmd = _Command(sub, "discriminate", "RB discrimination of src1 / src2 / combined",
                   run_discriminate)
    _add_common(cmd, "discrimination")
    _add_sources(cmd)
    cmd.add("--data", metavar="PATH", help="dataset CSV (I0..I3 per row)")
    cmd.add("--hypotheses", metavar="PATH",
            help="JSON hypothesis document (q0, priors, x_c and d priors in um, grids)")
    cmd.add("--d-max", type=float, metavar="UM", default=200.0,
            help="upper end of the default uniform separation prior (um)")
    cmd.add("--chunk", type=int, metavar="N", default=0,
            help="also decide on consecutive chunks of N samples (count; 0 = off)")
    return cmd


# -- sweep -------------------------------------------------------------------

def _separations(eff) -> np.ndarray:
    if eff["separations"] is not None:
        return np.asarray(eff["separations"], dtype=float)
    start, stop, count = eff["d_range"]
    count = int(count)
    if count < 1 or count != eff["d_range"][2]:
        raise ConfigurationError("--d-range count must be a positive integer")
    return np.linspace(start, stop, count)


def run_sweep(eff: dict) -> dict:
    seed = _require_seed(eff)
    cal1, cal2 = _sources(eff)
    v = _variances(eff, (cal1, cal2), {})
    seps = _separations(eff)
    scene = SceneParams(eff["q"], eff["x_c"], 0.0)
    eps = eff["epsilon"]
    if not 0.0 < eps < 0.5:
        raise ConfigurationError("--epsilon must lie in (0, 0.5)")
    if eff["trials"] < 1:
        raise ConfigurationError("--trials must be positive")
    common = dict(samples_per_trial=eff["samples_per_trial"], workers=eff["workers"])
    avg = dict(q0=eff["q0"], n_q=eff["n_q"], n_x=eff["n_x"], x_span=eff["x_span"])
    mode = eff["mode"]
    sweeps = {}
    if mode == "mismatch":
        assumed = cal1 if eff["assumed"] == "src1" else cal2
        inner = eff["mismatch_decision"]
        extra = avg if inner == "averaged" else {}
        sweeps["matched"] = mc_success_sweep(seps, eff["trials"], inner, scene, cal1, cal2, v,
                                             seed, **common, **extra)
        sweeps["mismatched"] = mismatch_study(seps, eff["trials"], (cal1, cal2), assumed, v,
                                              seed, scene, mode=inner, **common, **extra)
    else:
        extra = avg if mode == "averaged" else {}
        sweeps["matched"] = mc_success_sweep(seps, eff["trials"], mode, scene, cal1, cal2, v,
                                             seed, **common, **extra)

    rows = []
    for model, sw in sweeps.items():
        for r in sw.rows():
            rows.append({"mode": mode, "model": model, "d_um": r["d"],
                         "success_fraction": r["success_fraction"],
                         "theory": r["theory"], "trials": r["trials"]})
    widths = [fit_gaussian(c.modes[0]).width for c in (cal1, cal2)]
    summary = {
        "command": "sweep",
        "config": _echo(eff),
        "epsilon": eps,
        "rayleigh_limit_um": rayleigh_limit(*widths),
        "thresholds_um": {m: sw.threshold(eps) for m, sw in sweeps.items()},
        "variances": [float(x) for x in v],
    }
    c2 = expansion_coefficients(cal1, cal2, eff["q"], eff["x_c"]).c2
    try:
        summary["critical_distance_um"] = critical_distance(eps, c2, v)
    except InputError:
        summary["critical_distance_um"] = None
    theory = sweeps["matched"].theory
    if theory is not None:
        summary["theory_threshold_um"] = success_threshold(seps, theory, eps)
    columns = ("mode", "model", "d_um", "success_fraction", "theory", "trials")
    stem = eff["name"]
    return {f"{stem}.csv": _text(_csv(columns, rows)), f"{stem}.json": _text(_json(summary))}


def _setup_sweep(sub):
    cmd = _Command(sub, "sweep", "Monte Carlo success probability versus separation",
                   run_sweep)
    _add_common(cmd, "sweep", stochastic=True)
    _add_sources(cmd)
    cmd.add("--mode", choices=("known", "averaged", "mismatch"), default="known",
            help="known nuisances, nuisances averaged over priors, or calibration mismatch")
    cmd.add("--separations", nargs="+", type=float, metavar="UM",
            help="separations to simulate (um, increasing)")
    cmd.add("--d-range", nargs=3, type=float, metavar=("START", "STOP", "COUNT"),
            default=[0.0, 40.0, 21], help="evenly spaced separations (um, um, count)")
    cmd.add("--trials", type=int, metavar="N", default=1000,
            help="simulated experiments per separation (count)")
    cmd.add("--samples-per-trial", type=int, metavar="N", default=1,
            help="samples averaged in each experiment (count)")
    cmd.add("--epsilon", type=float, metavar="P", default=presets.EPSILON,
            help="tolerated error probability (dimensionless)")
    cmd.add("--q", type=float, metavar="FRAC", default=presets.IMBALANCE,
            help="brightness share of source 1 (dimensionless)")
    cmd.add("--x-c", type=float, metavar="UM", default=presets.CENTROID, help="centroid (um)")
    cmd.add("--q0", type=float, metavar="FRAC", default=0.05,
            help="averaged mode: q prior is uniform on (q0, 1 - q0) (dimensionless)")
    cmd.add("--x-span", type=float, metavar="UM", default=3.0,
            help="averaged mode: half-width of the centroid prior (um)")
    cmd.add("--n-q", type=int, metavar="N", default=41,
            help="averaged mode: q grid size for the plain grid rule (count)")
    cmd.add("--n-x", type=int, metavar="N", default=81,
            help="averaged mode: initial centroid grid size (count)")
    cmd.add("--assumed", choices=("src1", "src2"), default="src2",
            help="mismatch mode: calibration assumed for both sources")
    cmd.add("--mismatch-decision", choices=("known", "averaged"), default="known",
            help="mismatch mode: decision rule used for both sweeps")
    return cmd


# -- estimate ----------------------------------------------------------------

def _axis_spec(eff, fixed_key, grid_key, meta_key, meta):
    grid, fixed = eff[grid_key], eff[fixed_key]
    if grid is not None:
        lo, hi, n = grid
        if n != int(n) or n < 1:
            raise ConfigurationError(f"--{grid_key.replace('_', '-')} count must be a "
                                     "positive integer")
        n = int(n)
        if n > 1 and not hi > lo:
            raise ConfigurationError(f"--{grid_key.replace('_', '-')} needs LO < HI")
        return np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    if fixed is not None:
        return float(fixed)
    params = meta.get("params", {})
    if meta_key in params:
        return float(params[meta_key])
    raise ConfigurationError(f"give --{fixed_key.replace('_', '-')} or "
                             f"--{grid_key.replace('_', '-')}")


def _check_domain(cal1, cal2, d, x_c):
    dd = np.atleast_1d(d)
    xx = np.atleast_1d(x_c)
    if np.any(dd < 0):
        raise ConfigurationError("separations must be nonnegative")
    p1 = (xx.min() - dd.max() / 2, xx.max() - dd.min() / 2)
    p2 = (xx.min() + dd.min() / 2, xx.max() + dd.max() / 2)
    for (lo, hi), cal, name in ((p1, cal1, "source 1"), (p2, cal2, "source 2")):
        a, b = cal.domain
        if lo < a or hi > b:
            raise ConfigurationError(f"grid puts {name} at [{lo}, {hi}] um, outside its "
                                     f"calibration domain [{a}, {b}] um")


def run_estimate(eff: dict) -> dict:
    data = read_dataset(eff["data"])
    cal1, cal2 = _sources(eff)
    v = _variances(eff, (cal1, cal2), data.metadata)
    meta = data.metadata
    q = eff["q"] if eff["q"] is not None else meta.get("params", {}).get("q")
    if q is None:
        raise ConfigurationError("give --q (the dataset has no metadata)")
    d = _axis_spec(eff, "d", "d_grid", "d", meta)
    x_c = _axis_spec(eff, "x_c", "x_grid", "x_c", meta)
    scanned = [(n, a) for n, a in (("d", d), ("x_c", x_c)) if np.ndim(a)]
    if not scanned:
        raise ConfigurationError("give at least one of --d-grid, --x-grid")
    _check_domain(cal1, cal2, d, x_c)

    priors = {}
    if eff["prior"] == "gaussian":
        var = eff["prior_variance"]
        if var is None or len(var) != len(scanned):
            raise ConfigurationError("a gaussian prior needs one --prior-variance (um^2) per "
                                     "scanned axis")
        centers = eff["prior_center"] or [float((a[0] + a[-1]) / 2) for _, a in scanned]
        if len(centers) != len(scanned):
            raise ConfigurationError("give one --prior-center (um) per scanned axis")
        for (name, arr), c, s2 in zip(scanned, centers, var):
            hi = arr[-1] if arr[-1] > arr[0] else arr[0] + 1.0
            priors[name] = Prior1D.gaussian(c, s2, arr[0], hi)
    elif eff["prior_variance"] or eff["prior_center"]:
        raise ConfigurationError("--prior-center / --prior-variance need --prior gaussian")
    pmap = plausible_map(data, cal1, cal2, v, d=d, x_c=x_c, q=float(q),
                         d_prior=priors.get("d"), x_c_prior=priors.get("x_c"))
    rows = pmap.rows()
    columns = list(pmap.axes) + ["prior", "posterior", "rb", "plausible"]
    summary = {"command": "estimate", "config": _echo(eff), "n_samples": len(data),
               "variances": [float(x) for x in v], **pmap.summary()}
    stem = eff["name"]
    return {f"{stem}.csv": _text(_csv(columns, rows)), f"{stem}.json": _text(_json(summary))}


def _setup_estimate(sub):
    cmd = _Command(sub, "estimate", "RB map over separation and/or centroid hypotheses",
                   run_estimate)
    _add_common(cmd, "estimate")
    _add_sources(cmd)
    cmd.add("--data", metavar="PATH", help="dataset CSV (I0..I3 per row)")
    cmd.add("--q", type=float, metavar="FRAC",
            help="brightness share of source 1, held fixed (dimensionless; "
                 "default: dataset metadata)")
    cmd.add("--d", type=float, metavar="UM",
            help="fixed separation when not scanned (um; default: dataset metadata)")
    cmd.add("--x-c", type=float, metavar="UM",
            help="fixed centroid when not scanned (um; default: dataset metadata)")
    cmd.add("--d-grid", nargs=3, type=float, metavar=("LO", "HI", "N"),
            help="scan N separations from LO to HI (um, um, count)")
    cmd.add("--x-grid", nargs=3, type=float, metavar=("LO", "HI", "N"),
            help="scan N centroids from LO to HI (um, um, count)")
    cmd.add("--prior", choices=("uniform", "gaussian"), default="uniform",
            help="prior over the scanned lattice")
    cmd.add("--prior-center", nargs="+", type=float, metavar="UM",
            help="gaussian prior centre per scanned axis, d first (um; default: grid middle)")
    cmd.add("--prior-variance", nargs="+", type=float, metavar="UM2",
            help="gaussian prior variance per scanned axis, d first (um^2)")
    return cmd


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbspade",
        description="Relative-belief source discrimination for mode-sorted measurements. "
                    "Positions and separations are in um.",
        epilog=f"Outputs default to ${OUTPUT_ENV} or the working directory.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for setup in (_setup_calibrate, _setup_simulate, _setup_discriminate, _setup_sweep,
                  _setup_estimate):
        setup(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cmd: _Command = ns._command
    try:
        eff = _effective(cmd, ns)
        for key in ("data",):
            if key in eff and not eff[key]:
                raise ConfigurationError(f"--{key} is required")
        files = cmd.run(eff)
        out_dir = Path(eff["out_dir"] or os.environ.get(OUTPUT_ENV) or ".")
        written = _write_outputs(out_dir, files)
    except _ERRORS as exc:
        print(f"rbspade {cmd.name}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        where = f" {exc.filename}:" if exc.filename else ""
        print(f"rbspade {cmd.name}: error:{where} {exc.strerror or exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"rbspade {cmd.name}: error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def cmd_calibrate(args=()) -> int:
    """``rbspade calibrate`` with argv-style ``args``; returns the exit code."""
    return main(["calibrate", *args])


def cmd_simulate(args=()) -> int:
    """``rbspade simulate`` with argv-style ``args``; returns the exit code."""
    return main(["simulate", *args])


def cmd_discriminate(args=()) -> int:
    """``rbspade discriminate`` with argv-style ``args``; returns the exit code."""
    return main(["discriminate", *args])


def cmd_sweep(args=()) -> int:
    """``rbspade sweep`` with argv-style ``args``; returns the exit code."""
    return main(["sweep", *args])


def cmd_estimate(args=()) -> int:
    """``rbspade estimate`` with argv-style ``args``; returns the exit code."""
    return main(["estimate", *args])


if __name__ == "__main__":
    raise SystemExit(main())
