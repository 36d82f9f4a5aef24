"""Command-line scenario runner.

    flowlab list
    flowlab run CONFIG [CONFIG ...] [--strict] [--out-dir D] [--quiet] [--jobs N]

CONFIG is a JSON file or the name of a bundled scenario. Each run writes
``<scenario>.<trace>.csv`` files and ``summary.json`` to the output
directory (``--out-dir``, else the config's ``output.directory``, else
``$FLOWLAB_OUT``, else ``./flowlab-out``).

Exit codes: 0 success, 1 verdict failure under ``--strict``, 2 bad config,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, diagnostics, elliptic, scenarios
from .errors import ConfigError, FlowlabError, GridError
from .flow import (
    BLOW_DOWN,
    CURVATURE,
    DIRICHLET,
    BoundarySpec,
    FlowConfig,
    constant_schedule,
    run,
)
from .geometry import make_cylinder, make_disk

log = logging.getLogger("flowlab")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": props,
        "required": list(required),
    }


DOMAIN_SCHEMA = _obj(
    {
        "kind": {"enum": ["disk", "cylinder"]},
        "L": _POS,
        "n_r": {"type": "integer", "minimum": 8},
        "n_theta": {"type": "integer", "minimum": 1},
    },
    ["kind", "n_r"],
)
INITIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "builtin": {"enum": ["liouville", "constant", "exact_disk"]},
        "params": {"type": "object"},
        "file": {"type": "string"},
    },
    "oneOf": [{"required": ["builtin"]}, {"required": ["file"]}],
}
BOUNDARY_SCHEMA = _obj(
    {
        "mode": {"enum": [DIRICHLET, CURVATURE]},
        "schedule": {"enum": ["constant", "low_speed", "fast_growth"]},
        "params": {"type": "object"},
    },
    ["mode", "schedule"],
)
TIME_SCHEMA = _obj(
    {
        "dt0": _POS,
        "t_end": {"type": "number", "minimum": 0},
        "du_max": _POS,
        "dt_max": _POS,
        "snapshot_stride": {"type": "integer", "minimum": 0},
        "output_step": _POS,
        "form": {"enum": ["u", "v"]},
    },
    ["t_end"],
)
DIAGNOSTICS_SCHEMA = _obj(
    {
        "traces": {
            "type": "array",
            "items": {"enum": ["sup_inf", "curvature", "ln_distance", "final_field"]},
            "uniqueItems": True,
        },
        "compact": _POS,
    }
)
OUTPUT_SCHEMA = _obj({"directory": {"type": "string"}})

BLOCKS = {
    "domain": DOMAIN_SCHEMA,
    "initial": INITIAL_SCHEMA,
    "boundary": BOUNDARY_SCHEMA,
    "time": TIME_SCHEMA,
    "diagnostics": DIAGNOSTICS_SCHEMA,
    "output": OUTPUT_SCHEMA,
}


# -- building blocks ---------------------------------------------------------------


def _domain(cfg):
    d = cfg["domain"]
    if d["kind"] == "disk":
        if "L" in d:
            raise ConfigError("domain.L applies to the cylinder only")
        return make_disk(d["n_r"], d.get("n_theta", 1))
    return make_cylinder(d.get("L", math.pi), d["n_r"], d.get("n_theta", 1))


def _check_params(params, allowed, where):
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown parameter(s) {', '.join(extra)}")


def _initial(cfg, bg, base_dir, default_level=0.0):
    spec = cfg.get("initial", {"builtin": "liouville", "params": {"level": default_level}})
    if "file" in spec:
        path = (base_dir / spec["file"]).resolve()
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except OSError as exc:
            raise ConfigError(f"cannot read initial field {path}: {exc}") from exc
        if data.shape[0] != bg.size or data.shape[1] != 3:
            raise ConfigError(f"initial field {path} does not match the grid")
        return bg.as_field(data[:, 2].reshape(bg.shape))
    name, params = spec["builtin"], spec.get("params", {})
    if name == "liouville":
        _check_params(params, ["level"], "initial.params")
        return elliptic.solve_liouville_dirichlet(bg, float(params.get("level", default_level)))
    if name == "constant":
        _check_params(params, ["value"], "initial.params")
        return bg.as_field(float(params.get("value", 0.0)))
    _check_params(params, ["m"], "initial.params")
    if bg.kind != "disk":
        raise ConfigError("exact_disk initial data need a disk domain")
    _, profile = elliptic.exact_disk_dirichlet(float(params.get("m", 1.0)))
    return bg.sample_radial(profile)


def _boundary(cfg, shift=0.0) -> BoundarySpec:
    spec = cfg["boundary"]
    mode, name, params = spec["mode"], spec["schedule"], spec.get("params", {})
    if name == "constant":
        _check_params(params, ["value"], "boundary.params")
        return BoundarySpec(
            mode, constant_schedule(float(params.get("value", 0.0)) + shift), constant_schedule(0.0)
        )
    if mode != DIRICHLET:
        raise ConfigError(f"schedule {name!r} is Dirichlet data")
    if name == "low_speed":
        _check_params(params, ["kind", "alpha"], "boundary.params")
        kind = params.get("kind", scenarios.LOG_SHIFT)
        extra = {"alpha": params["alpha"]} if "alpha" in params else {}
        try:
            bc = scenarios.low_speed_phi(kind, extra)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        _check_params(params, ["y0"], "boundary.params")
        try:
            bc = scenarios.fast_growth_phi(float(params.get("y0", 1.0)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if shift:
        f, df = bc.schedule, bc.time_derivative
        bc = BoundarySpec(
            DIRICHLET, lambda t, th: f(t, th) + shift, df, bc.growth_class, bc.name
        )
    return bc


def _output_times(time_cfg):
    step = time_cfg.get("output_step")
    if step is None:
        return None
    n = int(math.floor(time_cfg["t_end"] / step + 1e-9))
    return tuple(round(step * i, 12) for i in range(1, n + 1))


def _flow_config(cfg, bg, u0, bc, form_default="u", **over):
    t = cfg.get("time", {"t_end": 1.0})
    kw = dict(
        dt0=t.get("dt0", 1e-3),
        t_end=t["t_end"],
        du_max=t.get("du_max", 0.05),
        dt_max=t.get("dt_max", 0.25),
        snapshot_stride=t.get("snapshot_stride", 0 if "output_step" in t else 10),
        output_times=_output_times(t),
        form=t.get("form", form_default),
    )
    kw.update(over)
    return FlowConfig(bg, u0, bc, **kw)


def _requested(cfg, default=("sup_inf", "curvature", "ln_distance")):
    return cfg.get("diagnostics", {}).get("traces", list(default))


def _standard_traces(cfg, traj, bg):
    out = {}
    want = _requested(cfg)
    if "sup_inf" in want:
        sup, inf = diagnostics.sup_inf_trace(traj)
        out["sup_inf"] = diagnostics.TimeSeries(
            sup.times, np.column_stack([sup.column(), inf.column()]), ("sup", "inf")
        )
    if "curvature" in want:
        ks = diagnostics.boundary_curvature_trace(traj)
        cols, vals = [], []
        for name, ts in ks.items():
            cols += [f"k_min:{name}", f"k_max:{name}"]
            vals.append(ts.values)
        out["curvature"] = diagnostics.TimeSeries(traj.times, np.hstack(vals), tuple(cols))
    if "ln_distance" in want:
        out["ln_distance"] = diagnostics.ln_distance_trace(
            traj, elliptic.exact_ln(bg), _compact(cfg)
        )
    if "final_field" in want:
        out["final_field"] = ("field", bg, traj.final)
    return out


def _compact(cfg):
    return cfg.get("diagnostics", {}).get("compact")


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _first_time_after(times, ok):
    """First time from which ``ok`` holds through the end, or None."""
    bad = np.nonzero(~np.asarray(ok))[0]
    if bad.size == 0:
        return float(times[0])
    if bad[-1] + 1 >= len(times):
        return None
    return float(times[bad[-1] + 1])


# -- scenarios --------------------------------------------------------------------


def _ln_disk(cfg, base_dir):
    bg = _domain(cfg)
    ex = cfg.get("experiment", {})
    sched = elliptic.LNSchedule(
        tuple(float(n) for n in range(1, int(ex.get("N_max", 40)) + 1)),
        float(ex.get("stop_delta", 1e-6)),
    )
    u, info = elliptic.loewner_nirenberg(bg, sched, full_output=True)
    tol = float(ex.get("tol", 1e-4))
    exact = elliptic.exact_ln(bg)
    r = bg.r
    if bg.kind == "disk":
        probes = {"r=0": 0.0, "r=0.5": 0.5}
    else:
        probes = {"r=L/2": bg.L / 2}
    metrics, verdicts = {"settled_level": info["levels"][-1]}, {}
    for label, x in probes.items():
        got = float(np.interp(x, r, u[:, 0]))
        want = float(np.interp(x, r, exact[:, 0]))
        metrics[f"u({label})"] = got
        metrics[f"error({label})"] = abs(got - want)
        verdicts[f"matches_closed_form({label})"] = abs(got - want) <= tol
    ladder = diagnostics.TimeSeries(info["levels"][1:], info["changes"], ("sup_change",))
    traces = {"ladder": ladder, "profile": ("field", bg, u)}
    return traces, "Converged", metrics, verdicts


def _cd_lowspeed(cfg, base_dir):
    bg = _domain(cfg)
    bc = _boundary(cfg)
    u0 = _initial(cfg, bg, base_dir, default_level=float(bc.values(bg, 0, 0.0)[0]))
    traj = run(_flow_config(cfg, bg, u0, bc, form_default="v"), name="cd-lowspeed")
    ex = cfg.get("experiment", {})
    tol, t_max = float(ex.get("k_tol", 0.05)), float(ex.get("T_max", 100.0))
    d = traj.diagnostics
    dev = np.max([np.abs(d[k] - 1.0) for k in d if k.startswith("k_")], axis=0)
    t_star = _first_time_after(d["t"], dev <= tol)
    metrics = {"T_star": t_star, "final_k_deviation": float(dev[-1])}
    verdicts = {"curvature_settles": t_star is not None and t_star <= t_max}
    traces = _standard_traces(cfg, traj, bg)
    if "ln_distance" in traces:
        metrics["final_ln_distance"] = float(traces["ln_distance"].column()[-1])
    return traces, traj.status, metrics, verdicts


def _cd_fastgrowth(cfg, base_dir):
    bg = _domain(cfg)
    bc = _boundary(cfg)
    u0 = _initial(cfg, bg, base_dir, default_level=float(bc.values(bg, 0, 0.0)[0]))
    traj = run(_flow_config(cfg, bg, u0, bc, form_default="v"), name="cd-fastgrowth")
    ex = cfg.get("experiment", {})
    d = traj.diagnostics
    k = np.min([d[key] for key in d if key.startswith("k_min")], axis=0)
    phi = np.array([bc.values(bg, 0, t)[0] for t in d["t"]])
    C, holds, worst = diagnostics.fit_fast_growth_constant(
        d["t"], k, phi, t_min=float(ex.get("t_min", 1.0))
    )
    metrics = {"C": _finite(C), "worst_margin": _finite(worst)}
    return _standard_traces(cfg, traj, bg), traj.status, metrics, {"lower_bound_holds": holds}


def _divergence(cfg, base_dir):
    bg = _domain(cfg)
    ex = cfg.get("experiment", {})
    try:
        u0, bc = scenarios.divergence_example(
            bg, float(ex.get("eps0", 0.1)), float(ex.get("psi", 1.0)), float(ex.get("margin", 0.05))
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fc = _flow_config(cfg, bg, u0, bc, blowdown_drop=float(ex.get("blowdown_drop", 20.0)))
    traj = run(fc, name="divergence-sec2")
    t0, t1 = ex.get("window", [1.0, 5.0])
    d = traj.diagnostics
    sup = diagnostics.TimeSeries(d["t"], d["sup"], ("sup",))
    slope = sup.slope(t0, t1)
    rates = np.diff(d["sup"]) / np.diff(d["t"])
    lo, hi = ex.get("band", [-1.05, -0.95])
    metrics = {
        "final_time": float(d["t"][-1]),
        "slope_window": _finite(slope),
        "slope_overall": _finite(sup.slope()),
        "max_step_rate": _finite(np.max(rates)) if rates.size else None,
    }
    verdicts = {
        "blow_down": traj.status == BLOW_DOWN,
        "slope_in_band": bool(math.isfinite(slope) and lo <= slope <= hi),
        "rate_at_most_minus_one": bool(rates.size and np.max(rates) <= -1.0),
    }
    return _standard_traces(cfg, traj, bg), traj.status, metrics, verdicts


def _steady_counterexample(cfg, base_dir):
    bg = _domain(cfg)
    ex = cfg.get("experiment", {})
    try:
        u0, bc = scenarios.steady_radial_example(bg, float(ex.get("b", 0.5)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    traj = run(_flow_config(cfg, bg, u0, bc), name="steady-counterexample-sec3")
    rise = max(float(np.max(u - u0)) for u in traj.snapshots)
    gap = diagnostics.ln_distance_trace(traj, elliptic.exact_ln(bg), _compact(cfg))
    min_gap = float(np.min(gap.column()))
    metrics = {"final_time": float(traj.times[-1]), "max_rise": rise, "min_ln_distance": min_gap}
    verdicts = {
        "stays_below_initial": rise <= float(ex.get("tol", 1e-6)),
        "never_converges": min_gap >= float(ex.get("gap", 0.6)),
    }
    traces = _standard_traces(cfg, traj, bg)
    traces["ln_distance"] = gap
    return traces, traj.status, metrics, verdicts


def _comparison_pair(cfg, base_dir):
    bg = _domain(cfg)
    ex = cfg.get("experiment", {})
    offset, shift = float(ex.get("offset", 0.1)), float(ex.get("data_offset", 0.1))
    if offset < 0 or shift < 0:
        raise ConfigError("comparison offsets must be non-negative")
    bc_lo, bc_hi = _boundary(cfg), _boundary(cfg, shift)
    u_lo = _initial(cfg, bg, base_dir, default_level=float(bc_lo.values(bg, 0, 0.0)[0]))
    t = cfg.get("time", {"t_end": 1.0})
    over = {} if "output_step" in t else {"output_times": (t["t_end"],)}
    lo = run(_flow_config(cfg, bg, u_lo, bc_lo, **over), name="lower")
    hi = run(_flow_config(cfg, bg, u_lo + offset, bc_hi, **over), name="upper")
    a, b = (hi, lo) if ex.get("swap", False) else (lo, hi)
    rep = diagnostics.comparison_check(a, b, float(ex.get("tol", 1e-6)))
    metrics = {
        "max_violation": rep.max_violation,
        "first_violation_time": rep.first_violation_time,
        "times_compared": rep.times_compared,
    }
    gap = diagnostics.TimeSeries(
        a.times[: rep.times_compared],
        [float(np.max(x - y)) for x, y in zip(a.snapshots, b.snapshots)][: rep.times_compared],
        ("max_difference",),
    )
    status = lo.status if lo.status == hi.status else f"{lo.status}/{hi.status}"
    return {"difference": gap}, status, metrics, {"ordered": rep.verdict == diagnostics.ORDERED}


def _window_experiment(cfg, base_dir):
    bg = _domain(cfg)
    ex = cfg.get("experiment", {})
    y = scenarios.fast_growth_y(float(ex.get("y0", 1.0)))
    u0 = elliptic.solve_liouville_dirichlet(bg, 0.0)
    aux = run(_flow_config(cfg, bg, u0, scenarios.low_speed_phi(), form_default="v"), name="u1")
    win = scenarios.psi_window(aux, y)
    bc = scenarios.window_psi(win, float(ex.get("gap", 0.05)), float(ex.get("ramp", 0.1)))
    traj = run(_flow_config(cfg, bg, u0, bc, form_default="v"), name="u")
    u2_init = elliptic.solve_liouville_dirichlet(bg, float(y(0.0)))
    top = run(
        _flow_config(cfg, bg, u2_init, scenarios.fast_growth_phi(y.y0), form_default="v"),
        name="u2",
    )
    tol = float(ex.get("tol", 1e-6))
    low = diagnostics.comparison_check(aux, traj, tol)
    high = diagnostics.comparison_check(traj, top, tol)
    dist = diagnostics.ln_distance_trace(traj, elliptic.exact_ln(bg), _compact(cfg))
    hit = np.nonzero(dist.column() < float(ex.get("ln_tol", 0.05)))[0]
    t_conv = float(dist.times[hit[0]]) if hit.size else None
    metrics = {
        "window_opens": win.first_time,
        "lower_violation": low.max_violation,
        "upper_violation": high.max_violation,
        "ln_convergence_time": t_conv,
        "final_ln_distance": float(dist.column()[-1]),
    }
    verdicts = {
        "above_low_speed_run": low.verdict == diagnostics.ORDERED,
        "below_fast_growth_run": high.verdict == diagnostics.ORDERED,
        "converges_to_ln": t_conv is not None,
    }
    psi_series = diagnostics.TimeSeries(
        traj.diagnostics["t"],
        np.column_stack(
            [
                win.lower(traj.diagnostics["t"]),
                [bc.values(bg, 0, t)[0] for t in traj.diagnostics["t"]],
                win.upper(traj.diagnostics["t"]),
            ]
        ),
        ("lower", "psi", "upper"),
    )
    traces = _standard_traces(cfg, traj, bg)
    traces["ln_distance"] = dist
    traces["window"] = psi_series
    status = traj.status
    return traces, status, metrics, verdicts


_ALL_FLOW = ("domain", "time", "diagnostics", "output", "experiment")

# name -> (description, runner, accepted blocks, experiment schema)
SCENARIOS = {
    "ln-disk": (
        "Loewner-Nirenberg ladder checked against the closed-form complete hyperbolic solution",
        _ln_disk,
        ("domain", "output", "experiment"),
        {"N_max": {"type": "integer", "minimum": 1}, "stop_delta": _POS, "tol": _POS},
    ),
    "cd-lowspeed": (
        "Dirichlet flow with slowly growing data; boundary curvature tends to 1",
        _cd_lowspeed,
        _ALL_FLOW + ("initial", "boundary"),
        {"k_tol": _POS, "T_max": _POS},
    ),
    "cd-fastgrowth": (
        "Dirichlet flow with data y' = 3y + 1; curvature lower bound y^(1/3) - 1",
        _cd_fastgrowth,
        _ALL_FLOW + ("initial", "boundary"),
        {"t_min": _NUM},
    ),
    "divergence-sec2": (
        "Curvature data near 1 with a small interior bump; the sup decreases at unit rate",
        _divergence,
        _ALL_FLOW,
        {
            "eps0": _POS,
            "psi": _POS,
            "margin": _POS,
            "blowdown_drop": _POS,
            "window": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            "band": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        },
    ),
    "steady-counterexample-sec3": (
        "Steady start with curvature data decreasing to 1; the flow stays below its start",
        _steady_counterexample,
        _ALL_FLOW,
        {"b": _POS, "tol": _POS, "gap": _NUM},
    ),
    "comparison-pair": (
        "Two ordered runs; checks that the ordering persists",
        _comparison_pair,
        _ALL_FLOW + ("initial", "boundary"),
        {
            "offset": _NUM,
            "data_offset": _NUM,
            "swap": {"type": "boolean"},
            "tol": _POS,
        },
    ),
    "main-theorem-window": (
        "Curvature data inside the window between slow and fast Dirichlet runs",
        _window_experiment,
        _ALL_FLOW,
        {"y0": _POS, "gap": {"type": "number", "minimum": 0}, "ramp": _POS, "tol": _POS, "ln_tol": _POS},
    ),
}


def list_builtins() -> str:
    width = max(map(len, SCENARIOS))
    return "\n".join(f"{name:<{width}}  {desc}" for name, (desc, *_) in SCENARIOS.items())


# -- config handling -----------------------------------------------------------------


def _schema_for(name):
    _, _, blocks, ex = SCENARIOS[name]
    props = {"scenario": {"const": name}}
    for b in blocks:
        props[b] = _obj(ex) if b == "experiment" else BLOCKS[b]
    return _obj(props, ["scenario", "domain"])


def _format_path(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def load_config(source) -> tuple[dict, Path]:
    """Read and validate a config file or bundled scenario name."""
    path = Path(source)
    if path.exists():
        text, base = _read(path), path.parent
    elif source in SCENARIOS:
        text = resources.files("flowlab.configs").joinpath(f"{source}.json").read_text("utf-8")
        base = Path.cwd()
    else:
        raise ConfigError(f"no such config file or bundled scenario: {source}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict) or not isinstance(cfg.get("scenario"), str):
        raise ConfigError(f"{source}: config must be an object with a 'scenario' string")
    if cfg["scenario"] not in SCENARIOS:
        raise ConfigError(
            f"{source}: unknown scenario {cfg['scenario']!r} (see 'flowlab list')"
        )
    errors = sorted(
        jsonschema.Draft7Validator(_schema_for(cfg["scenario"])).iter_errors(cfg),
        key=lambda e: list(e.absolute_path),
    )
    if errors:
        e = errors[0]
        raise ConfigError(f"{source}: {_format_path(e)}: {e.message}")
    return cfg, base


def _read(path):
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _out_dir(cfg, cli_dir):
    if cli_dir:
        return Path(cli_dir)
    if "output" in cfg and "directory" in cfg["output"]:
        return Path(cfg["output"]["directory"])
    return Path(os.environ.get("FLOWLAB_OUT", "flowlab-out"))


def _write_outputs(out, name, traces, summary):
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for trace, obj in traces.items():
        target = out / f"{name}.{trace}.csv"
        if isinstance(obj, tuple):
            _, bg, u = obj
            diagnostics.write_csv(u, target, bg)
        else:
            diagnostics.write_csv(obj, target)
        files.append(target.name)
    summary["files"] = sorted(files)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def run_scenario(source, out_dir=None, strict=False, quiet=False, subdir=None) -> int:
    """Run one config; returns the process exit code.

    ``subdir`` nests the outputs one level down, so several configs can
    share an output directory.
    """
    try:
        cfg, base = load_config(source)
        name = cfg["scenario"]
        runner = SCENARIOS[name][1]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            traces, status, metrics, verdicts = runner(cfg, base)
        if not quiet:
            for w in caught:
                log.warning("%s", w.message)
        summary = {
            "scenario": name,
            "status": status,
            "metrics": metrics,
            "verdicts": {k: bool(v) for k, v in verdicts.items()},
            "version": __version__,
        }
        out = _out_dir(cfg, out_dir)
        _write_outputs(out / subdir if subdir else out, name, traces, summary)
    except (ConfigError, GridError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (FlowlabError, FloatingPointError) as exc:
        log.error("solver failure: %s: %s", type(exc).__name__, exc)
        return EXIT_SOLVER
    except ValueError as exc:
        # parameter checks in the library constructors
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        log.error("solver failure: %s: %s", type(exc).__name__, exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    passed = all(summary["verdicts"].values())
    if not quiet:
        marks = ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in summary["verdicts"].items())
        print(f"{name}: {status}; {marks}")
    if strict and not passed:
        return EXIT_VERDICT
    return EXIT_OK


def _run_job(args):
    source, out_dir, strict, quiet, subdir = args
    _setup_logging(quiet)
    return run_scenario(source, out_dir, strict, quiet, subdir)


def _setup_logging(quiet):
    logging.basicConfig(
        level=logging.ERROR if quiet else logging.WARNING,
        format="flowlab: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="flowlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"flowlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list bundled scenarios")
    p = sub.add_parser("run", help="run scenario configs")
    p.add_argument("configs", nargs="+", help="JSON config file or bundled scenario name")
    p.add_argument("--strict", action="store_true", help="exit 1 when a verdict fails")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    p.add_argument("--jobs", type=int, default=1, help="configs to run concurrently")
    args = parser.parse_args(argv)

    if args.command == "list":
        print(list_builtins())
        return EXIT_OK
    _setup_logging(args.quiet)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    if len(args.configs) == 1:
        return run_scenario(args.configs[0], args.out_dir, args.strict, args.quiet)
    # several configs: one sub-directory each, named after the config
    stems = [Path(c).stem for c in args.configs]
    if len(set(stems)) != len(stems):
        parser.error("configs must have distinct names")
    jobs = [(c, args.out_dir, args.strict, args.quiet, st) for c, st in zip(args.configs, stems)]
    if args.jobs == 1:
        codes = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_job, jobs))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
