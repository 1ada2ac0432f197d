"""
Command-line front end.

    fluorcorr <spectrum|g2|filtered-g2|fit|dephasing-scan> --config FILE [--preset NAME] [--out DIR] [--svg]

Exit codes: 0 success, 2 bad configuration, 3 solver failure,
4 epsilon extrapolation not converged, 5 cascade fit diverged.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__, correlations, oracle, scenario as scen
from .errors import (
    EpsilonNotConverged,
    FitDivergence,
    FluorcorrError,
    InsufficientWindow,
    InvalidParams,
)
from .svg import line_plot

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_EPSILON, EXIT_FIT = 0, 2, 3, 4, 5


class StageError(Exception):
    """A library error tagged with the operation that raised it."""

    def __init__(self, op: str, exc: Exception):
        super().__init__(f"{op}: {exc}")
        self.op = op
        self.exc = exc


def _run(op: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FluorcorrError as exc:
        raise StageError(op, exc) from exc


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, complex):
        return f"{fmt(x.real)}{'+' if x.imag >= 0 else '-'}{fmt(abs(x.imag))}j"
    if x is None:
        return "none"
    return str(x)


def _flatten(prefix: str, obj) -> list[tuple[str, object]]:
    if is_dataclass(obj):
        return [(f"{prefix}.{f.name}", getattr(obj, f.name)) for f in fields(obj)]
    return [(prefix, obj)]


def scenario_meta(command: str, sc: scen.Scenario) -> list[tuple[str, object]]:
    meta: list[tuple[str, object]] = [("fluorcorr_version", __version__), ("command", command)]
    meta += _flatten("system", sc.system)
    if sc.sensors is not None:
        meta += _flatten("sensors", sc.sensors)
    meta.append(("homodyne.f", ",".join(fmt(h.f) for h in sc.homodyne)))
    for name in ("tau", "omega"):
        grid = getattr(sc, name)
        if grid is not None:
            meta += _flatten(name, grid)
    if sc.sweep_parameter:
        meta.append(("sweep.parameter", sc.sweep_parameter))
        meta.append(("sweep.values", ",".join(fmt(v) for v in sc.sweep_values)))
    if sc.gamma_phi_list:
        meta.append(("dephasing.gamma_phi", ",".join(fmt(v) for v in sc.gamma_phi_list)))
    return meta


def write_csv(path: Path, meta, header: list[str], rows) -> Path:
    lines = [f"# {k} = {fmt(v)}" for k, v in meta]
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], np.ndarray]:
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = [h.strip() for h in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise scen.ConfigError(f"{path}: no header row")
    return meta, header, np.array(rows, dtype=float).reshape(-1, len(header))


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_svg(path: Path, series, xlabel, ylabel, log_y=False, markers=()):
    path.write_text(line_plot(series, xlabel, ylabel, log_y=log_y, markers=markers), encoding="utf-8", newline="\n")
    return path


def _default_omega_grid(p) -> np.ndarray:
    reach = 1.5 * np.hypot(p.delta, 2.0 * p.omega_drive) + 10.0 * (p.gamma_sigma + 2.0 * p.gamma_phi)
    return np.linspace(-reach, reach, 4001)


def cmd_spectrum(sc: scen.Scenario, out: Path, svg: bool = False, jobs: int = 1) -> list[Path]:
    p = sc.system
    grid = sc.omega.points() if sc.omega else _default_omega_grid(p)
    s = _run("spectrum", correlations.spectrum, p, grid)
    meta = scenario_meta("spectrum", sc) + [
        ("coherent_weight", s.coherent_weight),
        ("total_incoherent", s.total_incoherent),
        ("population", s.population),
    ]
    files = [write_csv(out / f"{sc.name}_spectrum.csv", meta, ["omega", "incoherent_density"],
                       zip(s.omega_grid, s.incoherent_density))]
    if svg or sc.svg:
        files.append(_write_svg(out / f"{sc.name}_spectrum.svg", [("incoherent", s.omega_grid, s.incoherent_density)],
                                "omega / gamma_sigma", "S(omega)", log_y=sc.log_y, markers=(0.0,)))
    return files


def _tau_grid(sc: scen.Scenario, p, sensors=None) -> np.ndarray:
    if sc.tau is not None:
        return sc.tau.points()
    if sensors is not None:
        return correlations.default_tau_grid(p, *sensors)
    return np.linspace(-10.0 / p.gamma_sigma, 10.0 / p.gamma_sigma, 1001)


def cmd_g2(sc: scen.Scenario, out: Path, svg: bool = False, jobs: int = 1) -> list[Path]:
    p = sc.system
    fs = list(sc.sweep_values) if sc.sweep_parameter == "f" else [h.f for h in sc.homodyne]
    tau = _tau_grid(sc, p)
    traces = _pmap(lambda f: _run(f"g2_homodyned(f={fmt(f)})", correlations.g2_homodyned, p, f, tau), fs, jobs)
    meta = scenario_meta("g2", sc) + [("epsilon", "unused (sensor-free)")]
    meta += [(f"intensity.f={fmt(f)}", t.meta["intensity"]) for f, t in zip(fs, traces)]
    rows = [(f, t_, g) for f, tr in zip(fs, traces) for t_, g in zip(tr.tau, tr.values)]
    files = [write_csv(out / f"{sc.name}_g2.csv", meta, ["f", "tau", "g2"], rows)]
    if svg or sc.svg:
        series = [(f"F={fmt(f)}", tr.tau, tr.values) for f, tr in zip(fs, traces)]
        files.append(_write_svg(out / f"{sc.name}_g2.svg", series, "tau gamma_sigma", "g2", log_y=sc.log_y))
    return files


def _filtered_point(point, sc: scen.Scenario):
    value, p, sensors, homodyne = point
    s1, s2 = (sensors or scen.SensorSpec()).resolve(p)
    tau = _tau_grid(sc, p, (s1, s2))
    label = f"filtered_g2({sc.sweep_parameter}={fmt(value)})" if value is not None else "filtered_g2"
    return _run(label, correlations.filtered_g2, p, s1, s2, homodyne, tau)


def cmd_filtered_g2(sc: scen.Scenario, out: Path, svg: bool = False, jobs: int = 1) -> list[Path]:
    points = sc.points()
    traces = _pmap(lambda pt: _filtered_point(pt, sc), points, jobs)
    meta = scenario_meta("filtered-g2", sc)
    for i, ((value, _, _, _), tr) in enumerate(zip(points, traces)):
        s1, s2 = tr.meta["sensors"]
        meta += [
            (f"point.{i}.{sc.sweep_parameter or 'value'}", value),
            (f"point.{i}.omega1", s1.omega),
            (f"point.{i}.omega2", s2.omega),
            (f"point.{i}.gamma_filter", s1.gamma_filter),
            (f"point.{i}.epsilon", ",".join(fmt(e) for e in tr.meta["epsilon"])),
            (f"point.{i}.discrepancy", tr.meta["discrepancy"]),
        ]
    if sc.sweep_parameter:
        header = [sc.sweep_parameter, "tau", "g2"]
        rows = [(v, t_, g) for (v, *_), tr in zip(points, traces) for t_, g in zip(tr.tau, tr.values)]
    else:
        header = ["tau", "g2"]
        rows = zip(traces[0].tau, traces[0].values)
    files = [write_csv(out / f"{sc.name}_filtered_g2.csv", meta, header, rows)]
    if svg or sc.svg:
        series = [(f"{sc.sweep_parameter}={fmt(v)}" if v is not None else "g2", tr.tau, tr.values)
                  for (v, *_), tr in zip(points, traces)]
        files.append(_write_svg(out / f"{sc.name}_filtered_g2.svg", series, "tau gamma_sigma", "g2",
                                log_y=sc.log_y))
    return files


def load_trace(path, select: float | None = None) -> tuple[correlations.CorrelationTrace, dict]:
    meta, header, data = read_csv(path)
    if "tau" not in header or "g2" not in header:
        raise scen.ConfigError(f"{path}: expected 'tau' and 'g2' columns, got {header}")
    ti, gi = header.index("tau"), header.index("g2")
    extra = [i for i in range(len(header)) if i not in (ti, gi)]
    selected: dict[str, float] = {}
    if extra:
        col = extra[0]
        values = np.unique(data[:, col])
        if select is None:
            if values.size > 1:
                raise scen.ConfigError(f"{path} holds {values.size} blocks of {header[col]!r}; set [fit].select")
            select = float(values[0])
        keep = np.isclose(data[:, col], select)
        if not keep.any():
            raise scen.ConfigError(f"{path}: no block with {header[col]} = {select}")
        data = data[keep]
        selected[header[col]] = select
    trace = correlations.CorrelationTrace(data[:, ti], data[:, gi], {"source": str(path)})
    return trace, {"meta": meta, "selected": selected}


def _fit_gamma_filter(sc: scen.Scenario, info: dict) -> float | None:
    if sc.fit_gamma_filter is not None:
        return sc.fit_gamma_filter
    if "gamma_filter" in info["selected"]:
        return info["selected"]["gamma_filter"]
    raw = info["meta"].get("sensors.gamma_filter")
    return float(raw) if raw not in (None, "none") else None


def cmd_fit(sc: scen.Scenario, out: Path, svg: bool = False, jobs: int = 1, stream=None) -> oracle.CascadeFit:
    stream = sys.stdout if stream is None else stream
    if sc.fit_input is None:
        raise scen.ConfigError("[fit].input is required")
    trace, info = load_trace(sc.fit_input, sc.fit_select)
    gamma_filter = _fit_gamma_filter(sc, info)
    try:
        fit = oracle.fit_cascade(trace, sc.fit_window, gamma_filter=gamma_filter)
    except FitDivergence as exc:
        if getattr(exc, "fit", None) is not None:
            print(exc.fit.report(), file=stream)
        raise StageError("fit_cascade", exc) from exc
    print(fit.report(), file=stream)
    return fit


def cmd_dephasing_scan(sc: scen.Scenario, out: Path, svg: bool = False, jobs: int = 1) -> list[Path]:
    if not sc.gamma_phi_list:
        raise scen.ConfigError("[dephasing].gamma_phi list is required")
    p = sc.system
    grid = sc.omega.points() if sc.omega else _default_omega_grid(p.replace(gamma_phi=max(sc.gamma_phi_list)))
    spectra = _pmap(
        lambda g: _run(f"spectrum(gamma_phi={fmt(g)})", correlations.spectrum, p.replace(gamma_phi=g), grid),
        sc.gamma_phi_list, jobs,
    )
    rows = _run("dephasing_summary", correlations.dephasing_summary, spectra)
    meta = scenario_meta("dephasing-scan", sc)
    spec_rows = [(s.params.gamma_phi, w, d) for s in spectra for w, d in zip(s.omega_grid, s.incoherent_density)]
    files = [
        write_csv(out / f"{sc.name}_dephasing_spectra.csv", meta, ["gamma_phi", "omega", "incoherent_density"],
                  spec_rows),
        write_csv(out / f"{sc.name}_dephasing_summary.csv", meta,
                  ["gamma_phi", "asymmetry_ratio", "total_incoherent"],
                  [(r.gamma_phi, r.asymmetry_ratio, r.total_incoherent) for r in rows]),
    ]
    if svg or sc.svg:
        series = [(f"gamma_phi={fmt(s.params.gamma_phi)}", s.omega_grid, s.incoherent_density) for s in spectra]
        files.append(_write_svg(out / f"{sc.name}_dephasing.svg", series, "omega / gamma_sigma", "S(omega)",
                                log_y=True, markers=(0.0,)))
    return files


COMMANDS = {
    "spectrum": cmd_spectrum,
    "g2": cmd_g2,
    "filtered-g2": cmd_filtered_g2,
    "fit": cmd_fit,
    "dephasing-scan": cmd_dephasing_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluorcorr", description=__doc__.splitlines()[1].strip())
    parser.add_argument("--version", action="version", version=f"fluorcorr {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="scenario file (TOML)")
    parser.add_argument("--preset", help="built-in scenario, e.g. fig2, fig3a, fig4d")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--svg", action="store_true", help="also write SVG plots")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None and args.preset is None:
            raise scen.ConfigError("one of --config or --preset is required")
        sc = scen.load(args.config, args.preset)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](sc, out, svg=args.svg, jobs=max(1, args.jobs))
    except (InvalidParams, InsufficientWindow) as exc:
        print(f"fluorcorr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as err:
        print(f"fluorcorr: {err.op} failed: {err.exc}", file=sys.stderr)
        if isinstance(err.exc, EpsilonNotConverged):
            return EXIT_EPSILON
        if isinstance(err.exc, FitDivergence):
            return EXIT_FIT
        if isinstance(err.exc, (InvalidParams, InsufficientWindow)):
            return EXIT_CONFIG
        return EXIT_SOLVER
    if isinstance(result, list):
        for path in result:
            print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
