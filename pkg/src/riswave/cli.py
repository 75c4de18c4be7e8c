"""Command-line experiment runner.

Every subcommand validates the scenario file first, writes plain CSV files
into ``--out`` and finishes with ``manifest.json`` listing those files.
Exit codes: 0 success, 2 usage or configuration error, 3 infeasible target
or measurement outside the window.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .exceptions import InfeasibleTargetError, MeasurementOutOfWindowError, RisWaveError
from .field import default_half_window, march, reflect, write_map_csv
from .localization import BeamwidthTable, PolarGrid, localize, resolution_table, rss_measure
from .metrics import (
    argmax_trajectory,
    beam_metrics,
    caustic_trajectory,
    correlation_curve,
    footprint_for_focal_size,
    reconstruction_distance,
    transverse_fwhm,
)
from .phase import focusing_phase, quantize, self_accelerating_phase, self_healing_phase, steering_phase
from .scenario import load_scenario
from .scene import RisGeometry, incident_field_on_ris

PROFILE_KINDS = ("steering", "focusing", "self_healing", "self_accelerating")


# ---------------------------------------------------------------------------
# Output helpers


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class _Outputs:
    def __init__(self, out_dir):
        self.dir = out_dir
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.dir, name)

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def imap(self, name, imap):
        write_map_csv(imap, self.path(name))

    def manifest(self, args, seed, started):
        entries = []
        for name in self.files:
            with open(os.path.join(self.dir, name), "rb") as fh:
                entries.append({"file": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        params = {k: v for k, v in vars(args).items() if k not in ("func",)}
        record = {
            "tool": "riswave",
            "version": __version__,
            "subcommand": args.command,
            "scenario": getattr(args, "scenario", None),
            "parameters": params,
            "output_dir": os.path.abspath(self.dir),
            "seed": seed,
            "wall_clock_s": round(time.time() - started, 3),
            "outputs": entries,
        }
        with open(os.path.join(self.dir, "manifest.json"), "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _scaled(scenario, scale):
    """Desk-scale copy of the scenario: element counts multiplied by ``scale``."""
    if scale == 1.0:
        return scenario
    ris = scenario.ris
    small = RisGeometry(max(2, round(ris.nx * scale)), max(2, round(ris.ny * scale)), ris.pitch)
    return replace(scenario, ris=small)


def _load(args):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return _scaled(scenario, args.grid_scale)


def _workers(args):
    return 1 if args.serial else (os.cpu_count() or 1)


def _z_grid(args):
    nz = max(2, round(args.nz * args.grid_scale)) if args.grid_scale != 1.0 else args.nz
    return np.linspace(args.z_min, args.z_max, nz)


def _window(args, source=None, obstacles=(), excursion=0.0):
    """User window, or the default for ``source`` covering every obstacle and the last z."""
    if args.window is not None:
        return tuple(args.window)
    if source is None:
        return None
    return default_half_window(source, obstacles, excursion, args.z_max)


# ---------------------------------------------------------------------------
# Subcommands


def _profile(scenario, args):
    ris, med = scenario.ris, scenario.medium
    theta_i = scenario.incident.incidence_angle
    if args.kind == "steering":
        prof = steering_phase(ris, med, theta_i, math.radians(args.theta_r))
    elif args.kind == "focusing":
        prof = focusing_phase(ris, med, args.f0)
    elif args.kind == "self_healing":
        prof = self_healing_phase(ris, med, args.C, 1.0 if args.gamma is None else args.gamma)
    else:
        prof = self_accelerating_phase(ris, med, args.C, 1.5 if args.gamma is None else args.gamma)
    if args.bits is not None:
        prof = quantize(prof, args.bits)
    return prof


def cmd_beam(args, out):
    scenario = _load(args)
    if args.kind == "focusing" and args.f0 is None:
        raise _usage("--f0 is required for kind=focusing")
    if args.kind in ("self_healing", "self_accelerating") and args.C is None:
        raise _usage(f"--C is required for kind={args.kind}")
    prof = _profile(scenario, args)
    src = reflect(incident_field_on_ris(scenario.ris, scenario.incident, scenario.medium), prof)
    excursion = 0.0
    if args.kind == "self_accelerating":
        ca = caustic_trajectory(args.C, prof.params["gamma"], scenario.medium, [args.z_max], scenario.ris.x[0],
                                scenario.ris.aperture)
        excursion = abs(ca.x[0])
    imap = march(src, _z_grid(args), scenario.obstacles, window=_window(args), excursion=excursion,
                 workers=_workers(args))
    out.imap("map.csv", imap)
    prof.to_csv(out.path("phase.csv"))
    m = beam_metrics(imap, scenario.medium.wavelength, scenario.ris.aperture)
    row = m.as_row()
    out.csv("metrics.csv", ["kind", "descriptor"] + list(row), [[args.kind, prof.descriptor()] + list(row.values())])
    return scenario.seed


def cmd_localize(args, out):
    scenario = _load(args)
    grid = PolarGrid.from_degrees((args.fov_min, args.fov_max), args.d_max)
    table = BeamwidthTable.build(scenario.ris, scenario.medium)
    res = localize(scenario, grid, args.l1, args.l2, args.overlap, table=table)
    out.csv(
        "scans.csv",
        ["scan", "phase", "level", "index", "sector_lo", "sector_hi", "profile", "rss"],
        [[i + 1, r.phase, r.level, r.index, *_sector_out(r.phase, r.sector), r.descriptor, r.rss]
         for i, r in enumerate(res.log)],
    )
    theta, rng = scenario.ue_angle, scenario.ue_range
    out.csv(
        "result.csv",
        ["theta_deg", "range_m", "theta_lo_deg", "theta_hi_deg", "range_lo_m", "range_hi_m",
         "angular_resolution_deg", "radial_resolution_m", "scans", "ue_theta_deg", "ue_range_m", "contains_ue"],
        [[math.degrees(res.theta), res.range, math.degrees(res.angular_sector.lo), math.degrees(res.angular_sector.hi),
          res.range_sector.lo, res.range_sector.hi, math.degrees(res.angular_resolution), res.radial_resolution,
          res.scans, math.degrees(theta), rng, res.contains(theta, rng)]],
    )
    return scenario.seed


def _sector_out(phase, sector):
    if phase == "angle":
        return math.degrees(sector[0]), math.degrees(sector[1])
    return sector


def cmd_sweep_resolution(args, out):
    fov = args.fov_max - args.fov_min
    if fov <= 0:
        raise _usage("--fov-max must exceed --fov-min")
    if args.d_max <= 0:
        raise _usage("--d-max must be > 0")
    if args.l_min < 1 or args.l_max < args.l_min:
        raise _usage("level range must satisfy 1 <= l_min <= l_max")
    rows = resolution_table(fov, args.d_max, range(args.l_min, args.l_max + 1))
    out.csv("resolution.csv", ["level", "angular_resolution_deg", "radial_resolution_m", "scans"],
            [[lvl, a, r, 2 * lvl] for lvl, a, r in rows])
    return args.seed


def cmd_sweep_footprint(args, out):
    scenario = _load(args)
    rows = []
    for f0 in args.f0:
        for target in args.targets:
            try:
                w = footprint_for_focal_size(scenario.ris, scenario.medium, f0, target)
                rows.append([f0, target, w, "ok", ""])
            except (InfeasibleTargetError, MeasurementOutOfWindowError) as exc:
                rows.append([f0, target, math.nan, "infeasible", str(exc)])
    out.csv("footprint.csv", ["f0_m", "target_major_radius_m", "footprint_radius_m", "status", "detail"], rows)
    return scenario.seed


def cmd_heal(args, out):
    scenario = _load(args)
    ris, med = scenario.ris, scenario.medium
    incident = incident_field_on_ris(ris, scenario.incident, med)
    zs = _z_grid(args)
    beams = {
        "self_healing": self_healing_phase(ris, med, args.C, args.gamma),
        "steering": steering_phase(ris, med, scenario.incident.incidence_angle, math.radians(args.theta_r)),
    }
    rows, curves = [], []
    z_b = scenario.obstacles[0].z_b if scenario.obstacles else None
    for name, prof in beams.items():
        src = reflect(incident, prof)
        window = _window(args, src, scenario.obstacles)
        free = march(src, zs, window=window, workers=_workers(args))
        if z_b is None:
            blocked, dist = free, float(zs[0])
        else:
            blocked = march(src, zs, scenario.obstacles, window=window, workers=_workers(args))
            dist = reconstruction_distance(blocked, free, z_b, args.threshold)
        out.imap(f"{name}_unblocked.csv", free)
        out.imap(f"{name}_blocked.csv", blocked)
        rows.append([name, prof.descriptor(), "none" if z_b is None else z_b, args.threshold, dist, math.isfinite(dist)])
        curves.append(correlation_curve(blocked, free))
    out.csv("reconstruction.csv", ["beam", "profile", "z_b", "threshold", "reconstruction_distance_m", "recovered"], rows)
    out.csv("correlation.csv", ["z"] + list(beams), [[z, *c] for z, *c in zip(zs, *curves)])
    return scenario.seed


def cmd_bend(args, out):
    scenario = _load(args)
    ris, med = scenario.ris, scenario.medium
    incident = incident_field_on_ris(ris, scenario.incident, med)
    zs = _z_grid(args)
    acc = reflect(incident, self_accelerating_phase(ris, med, args.C, args.gamma))
    ca = caustic_trajectory(args.C, args.gamma, med, zs, ris.x[0], ris.aperture)
    excursion = float(np.max(np.abs(ca.x)))
    window = _window(args, acc, scenario.obstacles, excursion)
    free = march(acc, zs, window=window, excursion=excursion, workers=_workers(args))
    out.imap("accelerating_unblocked.csv", free)
    if scenario.obstacles:
        blocked = march(acc, zs, scenario.obstacles, window=window, excursion=excursion,
                        workers=_workers(args))
        out.imap("accelerating_blocked.csv", blocked)
    am = argmax_trajectory(free)
    rows = []
    for z, xc, xa, row in zip(zs, ca.x, am, free.intensity):
        try:
            fw = transverse_fwhm(row, free.dx)
        except MeasurementOutOfWindowError:
            fw = math.nan
        rows.append([z, xc, xa, fw, z <= ca.apex_z])
    out.csv("caustic.csv", ["z", "caustic_x", "argmax_x", "fwhm", "pre_apex"], rows)

    steer = steering_phase(ris, med, scenario.incident.incidence_angle, scenario.ue_angle)
    accel = self_accelerating_phase(ris, med, args.C, args.gamma)
    free_sc = replace(scenario, obstacles=())
    rss = []
    for name, prof in (("self_accelerating", accel), ("steering", steer)):
        rss.append([name, prof.descriptor(), rss_measure(free_sc, prof), rss_measure(scenario, prof)])
    margin = 10 * math.log10(rss[0][3] / rss[1][3]) if rss[1][3] > 0 and rss[0][3] > 0 else math.nan
    out.csv("rss.csv", ["beam", "profile", "rss_unblocked", "rss_blocked"], rss)
    out.csv("bend_summary.csv", ["ue_x", "ue_z", "apex_z", "margin_db"],
            [[*scenario.ue_position, ca.apex_z, margin]])
    return scenario.seed


# ---------------------------------------------------------------------------
# Parser


class _UsageError(RisWaveError):
    exit_code = 2


def _usage(msg):
    return _UsageError(msg)


def _floats(text):
    text = text.strip()
    if not text:
        return []
    return [float(v) for v in text.split(",")]


def build_parser():
    p = argparse.ArgumentParser(prog="riswave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"riswave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario file (YAML or JSON)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--serial", action="store_true", help="single-threaded, bitwise deterministic")
        sp.add_argument("--grid-scale", type=float, default=1.0,
                        help="multiply RIS element counts and z samples (desk-scale runs)")

    def zgrid(sp, z_min, z_max, nz):
        sp.add_argument("--z-min", type=float, default=z_min)
        sp.add_argument("--z-max", type=float, default=z_max)
        sp.add_argument("--nz", type=int, default=nz)
        sp.add_argument("--window", type=float, nargs=2, metavar=("HX", "HY"), default=None,
                        help="simulation window half-widths in metres (default: sizing-rule minimum)")

    sp = sub.add_parser("beam", help="simulate one phase profile and report beam metrics")
    common(sp)
    sp.add_argument("--kind", required=True, choices=PROFILE_KINDS)
    sp.add_argument("--theta-r", type=float, default=0.0, help="steering angle, degrees")
    sp.add_argument("--f0", type=float, default=None, help="focal distance, m")
    sp.add_argument("--C", type=float, default=None, help="power-law coefficient")
    sp.add_argument("--gamma", type=float, default=None, help="power-law exponent")
    sp.add_argument("--bits", type=int, default=None, help="quantize the profile to this many bits")
    zgrid(sp, 0.05, 3.0, 120)
    sp.set_defaults(func=cmd_beam)

    sp = sub.add_parser("localize", help="two-phase hierarchical localization of the scenario UE")
    common(sp)
    sp.add_argument("--fov-min", type=float, default=-60.0, help="degrees")
    sp.add_argument("--fov-max", type=float, default=60.0, help="degrees")
    sp.add_argument("--d-max", type=float, default=5.0)
    sp.add_argument("--l1", type=int, default=5)
    sp.add_argument("--l2", type=int, default=3)
    sp.add_argument("--overlap", type=float, default=0.1)
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("sweep-resolution", help="resolution per hierarchical level")
    common(sp, scenario=False)
    sp.add_argument("--fov-min", type=float, default=-90.0)
    sp.add_argument("--fov-max", type=float, default=90.0)
    sp.add_argument("--d-max", type=float, default=5.0)
    sp.add_argument("--l-min", type=int, default=1)
    sp.add_argument("--l-max", type=int, default=8)
    sp.set_defaults(func=cmd_sweep_resolution)

    sp = sub.add_parser("sweep-footprint", help="footprint needed per focal distance and focal size")
    common(sp)
    sp.add_argument("--f0", type=_floats, default=[2.0, 4.0, 6.0, 8.0, 10.0],
                    help="comma-separated focal distances, m (may be empty)")
    sp.add_argument("--targets", type=_floats, default=[0.1, 0.2, 0.5, 1.0],
                    help="comma-separated focal major radii, m")
    sp.set_defaults(func=cmd_sweep_footprint)

    sp = sub.add_parser("heal", help="self-healing beam versus plain beam behind the scenario obstacles")
    common(sp)
    sp.add_argument("--C", type=float, default=0.06)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--theta-r", type=float, default=0.0, help="steering angle of the reference beam, degrees")
    sp.add_argument("--threshold", type=float, default=0.9)
    zgrid(sp, 0.05, 1.2, 116)
    sp.set_defaults(func=cmd_heal)

    sp = sub.add_parser("bend", help="self-accelerating beam around the scenario obstacles")
    common(sp)
    sp.add_argument("--C", type=float, default=0.85)
    sp.add_argument("--gamma", type=float, default=1.5)
    zgrid(sp, 0.02, 0.5, 97)
    sp.set_defaults(func=cmd_bend)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        out = _Outputs(args.out)
        seed = args.func(args, out)
        out.manifest(args, seed, started)
    except RisWaveError as exc:
        print(f"riswave {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
