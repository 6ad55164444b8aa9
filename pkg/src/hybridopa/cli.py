"""Command line runner: spectra, channel reports, oracle checks, saturation scans.

Exit codes: 0 success, 1 physics/validation error, 2 oracle failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .compound_cavity import mode_splitting, splitting_hz
from .config import (ScenarioConfig, config_schema, load_config, preset_names,
                     preset_text, report_schema)
from .errors import ConfigError, HybridOpaError, NoSplitting
from .model_params import CavityKind, GridSpec, PumpDrive, SqueezedInput
from .oracle import McConfig, mc_variance, scattering_variance
from .spectra import (SpectrumCurve, quadrature_variance, spectrum_curve,
                      spectrum_params_at)
from .windows import channel_report, saturation_scan, uncertainty_check, value_at

EXIT_OK, EXIT_PHYSICS, EXIT_ORACLE, EXIT_IO = 0, 1, 2, 3
CSV_COLUMNS = ["delta", "delta_mhz", "omega", "var_x", "var_y", "var_x_db", "var_y_db"]
STATUS_RANK = {"pass": 0, "inconclusive": 1, "fail": 2}


def _fmt(v):
    return "" if v is None else f"{v:.12e}"


def curve_csv(curve: SpectrumCurve) -> str:
    """CSV payload of a curve; fixed formatting so identical inputs give identical bytes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    mhz = curve.delta_hz
    dbx, dby = curve.db("X"), curve.db("Y")
    for i, d in enumerate(curve.detunings):
        w.writerow([_fmt(d), _fmt(None if mhz is None else mhz[i] / 1e6), _fmt(curve.omega),
                    _fmt(curve.var_x[i]), _fmt(curve.var_y[i]), _fmt(dbx[i]), _fmt(dby[i])])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _dump(obj):
    return json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _f_tag(f):
    return f"f{f:.4f}".rstrip("0").rstrip(".")


def _meta(cfg: ScenarioConfig, command, files):
    return {
        "command": command,
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": cfg.to_dict(),
        "files": files,
    }


def _splitting_record(cfg):
    if cfg.cavity.kind is not CavityKind.HYBRID:
        return None
    try:
        d = mode_splitting(cfg.cavity)
    except NoSplitting:
        return None
    return {"delta": d, "mhz": splitting_hz(cfg.cavity) / 1e6}


def analyze(cfg: ScenarioConfig):
    """Curves and channel reports for every pump value of a scenario."""
    out = []
    for pump in cfg.pumps:
        curve = spectrum_curve(cfg.cavity, pump, cfg.squeeze, cfg.grid)
        worst, where = uncertainty_check(curve)
        chans = {k: [c.as_dict() for c in channel_report(curve, k, cfg.analysis.min_prominence_db)]
                 for k in cfg.quadratures}
        out.append((pump, curve, {
            "f": pump.f,
            "theta": pump.theta,
            "center_db": {k: value_at(curve, k, 0.0) for k in ("X", "Y")},
            "uncertainty_min": {"product": worst, "delta": where},
            "channels": chans,
        }))
    return out


def run_spectrum(cfg: ScenarioConfig, out_dir: Path, write_curves=True, quiet=False):
    results = analyze(cfg)
    prefix = cfg.file_prefix
    files = []
    if write_curves:
        for pump, curve, _ in results:
            name = f"{prefix}_{_f_tag(pump.f)}.csv"
            _write(out_dir / name, curve_csv(curve))
            files.append(name)
    report = {
        "report_type": "channels",
        "name": cfg.name,
        "s": cfg.squeeze.s,
        "tau": cfg.cavity.tau,
        "mode_splitting": _splitting_record(cfg),
        "curves": [r for _, _, r in results],
    }
    rname = f"{prefix}_channels.json"
    _write(out_dir / rname, _dump(report))
    files.append(rname)
    _write(out_dir / f"{prefix}.meta.json", _dump(_meta(cfg, "spectrum" if write_curves else "channels", files)))
    if not quiet:
        for r in report["curves"]:
            print(f"{cfg.name} f={r['f']:g} theta={r['theta']:.4f}: "
                  f"X(0)={r['center_db']['X']:+.2f} dB  Y(0)={r['center_db']['Y']:+.2f} dB")
            for k, chans in r["channels"].items():
                sup = [c for c in chans if c["kind"] == "dip" and c["depth_db"] < 0]
                print(f"  {k}: {len(chans)} extrema, {len(sup)} below SNL")
    return report


def default_checkpoints():
    """Resonant checkpoints over cavity kind, pump phase, input and pump level."""
    cavities = {"single": load_config("fig2a").cavity, "hybrid": load_config("fig2c").cavity}
    pts = []
    for kind, cav in cavities.items():
        for theta in (0.0, math.pi):
            for s in (0.0, 0.5):
                for f in (0.2, 0.5, 0.65):
                    label = f"{kind} theta={'pi' if theta else '0'} s={s:g} f={f:g}"
                    pts.append((label, spectrum_params_at(cav, PumpDrive(f, theta),
                                                          SqueezedInput(s), 0.0, 0.0)))
    return pts


def config_checkpoints(cfg: ScenarioConfig):
    return [(f"{cfg.name} f={p.f:g} delta=0",
             spectrum_params_at(cfg.cavity, p, cfg.squeeze, 0.0, cfg.grid.omega))
            for p in cfg.pumps]


def _zscore(est, ref, err):
    if err > 0:
        return abs(est - ref) / err
    return 0.0 if est == ref else math.inf


def run_verify(cfg: ScenarioConfig, checkpoints=None, closed_form=quadrature_variance,
               monte_carlo=None, n_traj=None, scattering=True, quiet=False):
    """Compare closed form, scattering solve and Monte Carlo at each checkpoint.

    Status per checkpoint: "fail" on a disagreement beyond tolerance,
    "inconclusive" when the Monte Carlo standard error is too wide to judge,
    else "pass".  The report status is the worst checkpoint status.
    """
    o = cfg.oracle
    mc_on = o.monte_carlo if monte_carlo is None else monte_carlo
    n_traj = o.n_traj if n_traj is None else n_traj
    pts = default_checkpoints() if checkpoints is None else checkpoints
    rows = []
    for i, (label, params) in enumerate(pts):
        cf = (float(closed_form("X", params)), float(closed_form("Y", params)))
        row = {"label": label, "closed_form": list(cf)}
        status = "pass"
        rel = None
        if scattering:
            sc = scattering_variance(params)
            rel = max(abs(cf[j] - sc[j]) / abs(sc[j]) for j in range(2))
            status = "pass" if rel <= o.closed_form_rtol else "fail"
            row.update({"scattering": list(sc), "closed_vs_scattering_rel": rel})
        if mc_on:
            mcc = McConfig.for_params(params, n_traj=n_traj, seed=cfg.seed + i,
                                      decay_times=o.decay_times, n_segments=o.n_segments,
                                      batch=o.batch)
            res = mc_variance(params, mcc)
            z = max(_zscore(res.var_x, cf[0], res.stderr_x), _zscore(res.var_y, cf[1], res.stderr_y))
            row.update({"mc": [res.var_x, res.var_y], "mc_stderr": [res.stderr_x, res.stderr_y],
                        "mc_rel_stderr": res.rel_stderr(), "mc_z": z})
            if status == "pass":
                if res.rel_stderr() > o.max_rel_stderr:
                    status = "inconclusive"
                elif z > o.n_sigma:
                    status = "fail"
        row["status"] = status
        row["params"] = {"delta": float(params.delta), "omega": float(params.omega),
                         "gamma_in": float(params.gamma_in), "gamma_out": params.gamma_out,
                         "gamma_0": params.gamma_0, "p": params.p, "theta": params.theta,
                         "s": params.squeeze.s}
        rows.append(row)
        if not quiet:
            extra = "" if rel is None else f"  rel={rel:.2e}"
            if "mc" in row:
                extra += f"  mc z={row['mc_z']:.2f} rel.se={row['mc_rel_stderr']:.3f}"
            print(f"[{status:>12}] {label}:{extra}")
    worst = max(rows, key=lambda r: (STATUS_RANK[r["status"]], r.get("mc_z", 0.0),
                                     r.get("closed_vs_scattering_rel", 0.0)))
    return {"report_type": "verify", "name": cfg.name, "monte_carlo": mc_on,
            "status": worst["status"], "worst": worst["label"], "checkpoints": rows}


def run_saturation(cfg: ScenarioConfig, out_dir: Path, quiet=False):
    a = cfg.analysis
    f_grid = a.f_grid if a.f_grid is not None else tuple(p.f for p in cfg.pumps)
    res = saturation_scan(cfg.cavity, cfg.squeeze, cfg.pumps[0].theta, f_grid,
                          quadrature=a.quadrature, zoom=a.zoom, n=a.zoom_n, eps_db=a.eps_db)
    prefix = cfg.file_prefix
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f", "prominence_db"])
    for f, p in res.table:
        w.writerow([_fmt(f), _fmt(p)])
    _write(out_dir / f"{prefix}_saturation.csv", buf.getvalue())
    report = {"report_type": "saturation", "name": cfg.name, "quadrature": res.quadrature,
              "eps_db": res.eps_db, "saturated": res.saturated, "f_star": res.f_star,
              "reference_f": 0.65, "table": [{"f": f, "prominence_db": p} for f, p in res.table]}
    _write(out_dir / f"{prefix}_saturation.json", _dump(report))
    _write(out_dir / f"{prefix}.meta.json",
           _dump(_meta(cfg, "saturation", [f"{prefix}_saturation.csv", f"{prefix}_saturation.json"])))
    if not quiet:
        for f, p in res.table:
            print(f"  f={f:.3f}  prominence={p:.4f} dB")
        if res.saturated:
            print(f"feature vanishes at f* = {res.f_star:.4f} (reference 0.65)")
        else:
            print("NotSaturated: the feature persists over the scanned pump range")
    return report


def _common(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="config path, preset name or inline JSON")
    parser.add_argument("--out-dir", default=d if suppress else ".", help="output directory")
    parser.add_argument("--seed", type=int, default=d, help="override the config seed")
    parser.add_argument("--grid-n", type=int, default=d, help="override the grid point count")
    parser.add_argument("--quiet", action="store_true", default=d if suppress else False)


def build_parser():
    ap = argparse.ArgumentParser(prog="hybridopa", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    _common(ap, False)
    common = argparse.ArgumentParser(add_help=False)
    _common(common, True)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="write curves and channel reports")
    sub.add_parser("channels", parents=[common], help="channel report only")
    v = sub.add_parser("verify", parents=[common], help="oracle comparison")
    v.add_argument("--checkpoints", choices=["default", "config"], default="default")
    g = v.add_mutually_exclusive_group()
    g.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo route")
    g.add_argument("--mc-only", action="store_true",
                   help="Monte Carlo statistics only (closed form still used as reference)")
    v.add_argument("--n-traj", type=int, default=None)
    sub.add_parser("saturation", parents=[common], help="pump saturation scan")
    sub.add_parser("presets", parents=[common], help="list shipped presets")
    s = sub.add_parser("schema", parents=[common], help="print a JSON schema")
    s.add_argument("--report", action="store_true", help="print the report schema instead")
    return ap


def _apply_overrides(cfg: ScenarioConfig, args):
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.grid_n is not None:
        g = cfg.grid
        cfg = dataclasses.replace(cfg, grid=GridSpec(g.delta_min, g.delta_max, args.grid_n, g.omega))
    return cfg


def _error(exc, code):
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("delta", "line", "column", "path", "step", "seed", "details"):
        v = getattr(exc, attr, None)
        if v is not None:
            rec[attr] = v if not isinstance(v, tuple) else list(v)
    print(json.dumps(rec, default=str), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    try:
        if args.command == "presets":
            for name in preset_names():
                desc = json.loads(preset_text(name)).get("description", "")
                print(f"{name:12s} {desc}")
            return EXIT_OK
        if args.command == "schema":
            print(json.dumps(report_schema() if args.report else config_schema(), indent=2))
            return EXIT_OK
        if args.config is None:
            raise ConfigError("--config is required for this command")
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command in ("spectrum", "channels"):
            run_spectrum(cfg, out_dir, write_curves=args.command == "spectrum", quiet=args.quiet)
            return EXIT_OK
        if args.command == "saturation":
            run_saturation(cfg, out_dir, quiet=args.quiet)
            return EXIT_OK
        if args.command == "verify":
            pts = config_checkpoints(cfg) if args.checkpoints == "config" else None
            mc = False if args.no_mc else (True if args.mc_only else None)
            report = run_verify(cfg, pts, monte_carlo=mc, n_traj=args.n_traj,
                                scattering=not args.mc_only, quiet=args.quiet)
            _write(out_dir / f"{cfg.file_prefix}_verify.json", _dump(report))
            if not args.quiet:
                print(f"overall: {report['status']} (worst: {report['worst']})")
            return EXIT_ORACLE if report["status"] == "fail" else EXIT_OK
    except OSError as exc:
        return _error(exc, EXIT_IO)
    except (HybridOpaError, ValueError) as exc:
        return _error(exc, EXIT_PHYSICS)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
