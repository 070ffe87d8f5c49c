"""Command-line front end.

Exit codes: 0 success, 1 runtime failure or failed internal check, 2 usage error.

A config file (``--config FILE``, INI syntax) may hold a ``[common]`` section and
one section per subcommand; keys are the long flag names with dashes or
underscores. Command-line flags override file values.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

import numpy as np

from . import __version__
from .aqrm import AqrmSpec, analytic_spectrum_1d, build_aqrm_1d
from .dynamics import MotionalEnsemble, trajectory_rows, run_sequence
from .gates import METRICS, ISwapGate, QuasiBlockadeGate, pair_phase
from .molecule_model import CouplingConstants, PhysicalConfig, khz
from .sweeps import (MOTION_PROTOCOLS, find_minima, motion_infidelity_curve, optimize_iswap,
                     resonance_predictions, resonance_scan)

QB_CANDIDATES = (11.382, 11.832)


class UsageError(Exception):
    pass


class InvariantError(RuntimeError):
    pass


# -- argument types -------------------------------------------------------------------

def _range(text):
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP, got {text!r}") from None
    if not (np.isfinite(a) and np.isfinite(b)):
        raise argparse.ArgumentTypeError("range bounds must be finite")
    return a, b


def _points(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 2:
        raise argparse.ArgumentTypeError("need at least 2 points")
    return n


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _angle(text):
    """Parse ``pi``, ``pi/2``, ``3pi/2``, ``-0.5pi`` or a plain number (radians)."""
    t = text.strip().replace(" ", "").replace("*", "")
    try:
        if "pi" in t:
            num, _, den = t.partition("/")
            coef = num.replace("pi", "")
            coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
            return coef * np.pi / (float(den) if den else 1.0)
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}") from None


def _ensemble(text):
    kind, _, val = text.partition(":")
    try:
        ok = (kind == "fock" and int(val) >= 0) or (kind == "thermal" and float(val) >= 0)
    except ValueError:
        ok = False
    if not ok:
        raise argparse.ArgumentTypeError(f"malformed ensemble {text!r}; use fock:N or thermal:NBAR")
    return text


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- output ----------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _meta_lines(command, args):
    lines = [f"trapdipole {__version__}", f"command: {command}"]
    for k in sorted(vars(args)):
        if k in ("func", "config", "command", "output", "minima", "trace"):
            continue
        lines.append(f"{k} = {getattr(args, k)}")
    return lines


def write_csv(stream, meta, columns, rows):
    for m in meta:
        stream.write(f"# {m}\n")
    stream.write(",".join(columns) + "\n")
    for r in rows:
        stream.write(",".join(_fmt(v) for v in r) + "\n")


def _emit_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def _emit_table(args, command, columns, rows):
    meta = _meta_lines(command, args)
    if args.format == "json":
        _emit_json(args.output, {"metadata": meta, "columns": columns,
                                 "rows": [dict(zip(columns, r)) for r in rows]})
        return
    if args.output in (None, "-"):
        write_csv(sys.stdout, meta, columns, rows)
    else:
        with open(args.output, "w", newline="") as f:
            write_csv(f, meta, columns, rows)


def _require_json(args):
    if args.format != "json":
        raise UsageError("this command only writes JSON (--format json)")


def _check_fidelity(*values):
    for v in values:
        if not (-1e-12 <= v <= 1.0 + 1e-10):
            raise InvariantError(f"fidelity {v} outside [0, 1]")


# -- subcommands ------------------------------------------------------------------------

def cmd_spectrum(args):
    if args.analytic_only and args.numeric_only:
        raise UsageError("--analytic-only and --numeric-only are mutually exclusive")
    if args.truncation < 2:
        raise UsageError("--truncation must be at least 2")
    gs = np.linspace(*args.g_range, args.points)
    rows = []
    w = args.omega_z
    for g in gs:
        spec = AqrmSpec("1D", CouplingConstants(g, -args.j0, {"x": 0.0, "y": 0.0, "z": 0.0}),
                        {"z": w}, args.delta, args.truncation)
        if not args.analytic_only:
            H = build_aqrm_1d(spec).elements
            e, v = np.linalg.eigh(H)
            n = spec.cutoff("z")
            s1 = 2.0 * np.real(np.sum(v[:n].conj() * v[n:], axis=0))
            for i in range(min(args.levels, len(e))):
                rows.append((g, i, "+" if s1[i] >= 0 else "-", e[i], "numeric"))
        if (args.analytic or args.analytic_only) and not args.numeric_only:
            if args.delta != 0:
                raise UsageError("analytic levels need --delta 0")
            lv = analytic_spectrum_1d(spec, args.levels)[: args.levels]
            for i, x in enumerate(lv):
                rows.append((g, i, x.branch, x.energy, "analytic"))
    _emit_table(args, "spectrum", ["parameter_value", "level_index", "branch", "energy", "source"],
                rows)
    return 0


def cmd_resonance(args):
    ens = args.ensemble or ["fock:1"]
    for e in ens:
        try:
            MotionalEnsemble.parse(e, args.fock_cutoff)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    ratios = np.linspace(*args.omega_range, args.points)
    res = resonance_scan(ratios, ens, args.j_ratio, args.ell_z, args.fock_cutoff,
                         args.pop_input, 4, args.metric, args.max_parallel)
    rows, minima = [], {}
    for e in ens:
        d = res[e]
        _check_fidelity(*d["pedersen"], *d["overlap"])
        for i, r in enumerate(ratios):
            rows.append((r, e, d["fidelity"][i], d["pedersen"][i], d["overlap"][i], *d["populations"][i]))
        minima[e] = [{"omega_over_J0": x, "fidelity": y}
                     for x, y in (find_minima(ratios, d["fidelity"]) if len(ratios) >= 3 else [])]
    first, second = resonance_predictions(args.j_ratio, args.ell_z)
    _emit_table(args, "resonance", ["omega_over_J0", "ensemble", "fidelity", "pedersen", "overlap",
                                    "pop_n0", "pop_n1", "pop_n2", "pop_n3"], rows)
    report = {"minima": minima, "predicted": {"first": first, "second": second},
              "metric": args.metric}
    path = args.minima or (args.output + ".minima.json" if args.output not in (None, "-") else None)
    if path:
        _emit_json(path, report)
    else:
        sys.stderr.write(json.dumps(report, default=_json_default) + "\n")
    return 0


def cmd_iswap(args):
    _require_json(args)
    J0 = khz(args.j0)
    Om = khz(args.omega_mu if args.omega_mu is not None
             else (0.641 if args.mode == "one-pulse" else 1.6))
    if args.mode == "optimize":
        cfg = PhysicalConfig(J0=J0, Omega_mu=Om)
        spect = () if args.simulate_all else ("uu", "dd")
        kw = {}
        if args.opt_mode == "omega-scan":
            kw["ratios"] = np.linspace(*args.ratio_range, args.points)
        rep = optimize_iswap(cfg, args.opt_mode, args.metric, spect, args.grid_points,
                             area=args.area, max_parallel=args.max_parallel, **kw)
        _check_fidelity(rep.best_value)
        out = rep.to_dict()
        out["metadata"] = _meta_lines("iswap", args)
        if rep.warning:
            sys.stderr.write(f"warning: {rep.warning}\n")
        _emit_json(args.output, out)
        return 0
    est = ISwapGate(mode=args.mode, Omega_mu=Om, J0=J0, area=args.area,
                    wait_fraction=args.wait_fraction, simulate_all=args.simulate_all,
                    metric=args.metric).fit()
    res = est.evaluate()
    _check_fidelity(res.fidelity, res.overlap_fidelity)
    out = res.to_dict()
    out["metadata"] = _meta_lines("iswap", args)
    _emit_json(args.output, out)
    return 0


def cmd_qb_gate(args):
    _require_json(args)
    Om = 1.0
    echo = {}
    for jr in QB_CANDIDATES:
        _, pop = pair_phase(PhysicalConfig(J0=jr * Om, Omega_mu=Om))
        echo[str(jr)] = pop
    if args.j_ratio == "auto":
        jr = max(QB_CANDIDATES, key=lambda j: echo[str(j)])
    else:
        try:
            jr = float(args.j_ratio)
        except ValueError:
            raise UsageError("--j-ratio must be a number or 'auto'") from None
    theta = args.theta if args.theta == "auto" else _angle(args.theta)
    est = QuasiBlockadeGate(phi=args.phi, theta=theta, Omega_mu=Om, J_ratio=jr,
                            metric=args.metric).fit()
    res = est.evaluate()
    _check_fidelity(res.fidelity, res.overlap_fidelity)
    out = res.to_dict()
    out["theta_over_pi"] = est.theta_ / np.pi
    out["conditional_phase"] = est.conditional_phase()
    out["pair_echo_population"] = echo
    out["J_ratio"] = jr
    out["metadata"] = _meta_lines("qb-gate", args)
    _emit_json(args.output, out)
    if args.trace:
        ev = run_sequence(est.sequence_, args.trace_input, MotionalEnsemble.pure_fock(0, 0),
                          est.config_, est.protocol_space_, sample_dt=args.trace_dt / Om)
        rows = trajectory_rows(ev, args.trace_input)
        with open(args.trace, "w", newline="") as f:
            write_csv(f, _meta_lines("qb-gate", args), ["time", "basis_label", "population", "phase"],
                      rows)
    return 0


def cmd_motion(args):
    ells = np.linspace(*args.ell_range, args.points)
    rows = motion_infidelity_curve(args.protocol, ells, args.nbar_list, args.fock_cutoff,
                                   args.metric, args.max_parallel)
    _check_fidelity(*[r[4] for r in rows], *[r[5] for r in rows])
    _emit_table(args, "motion", ["ell_over_L", "nbar", "fidelity", "infidelity", "pedersen", "overlap"],
                rows)
    return 0


# -- parser ------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


UNITS = ("Units: angular frequencies in 2*pi*kHz unless stated; times in ms; "
         "length ratios ell/L dimensionless.")


def build_parser():
    p = _Parser(prog="trapdipole", description="Two trapped polar molecules: spectra, "
                "trap-dipole resonances and microwave gate fidelities. " + UNITS)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt="csv"):
        sp.add_argument("--config", help="INI file with [common] and per-command sections")
        sp.add_argument("--output", "-o", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt,
                        help=f"output format (default {fmt})")
        sp.add_argument("--max-parallel", type=_positive_int, default=1,
                        help="worker processes for scan points")
        sp.add_argument("--metric", choices=METRICS, default="overlap",
                        help="fidelity reported as primary value: 'overlap' = |Tr M|^2/16, "
                             "'pedersen' = [Tr MM^dag + |Tr M|^2]/20 (both always computed)")

    s = sub.add_parser("spectrum", help="1D AQRM eigenvalues versus g",
                       description="Lowest AQRM levels versus g. All energies share the unit "
                                   "of --omega-z (use 1 for units of hbar*omega_z).")
    common(s)
    s.add_argument("--j0", type=float, default=10.0, help="J0 (same unit as --omega-z); eta = -J0")
    s.add_argument("--omega-z", type=float, default=1.0, help="trap frequency omega_z")
    s.add_argument("--g-range", type=_range, default=(-1.5, 0.0), help="START:STOP for g")
    s.add_argument("--points", type=_points, default=100)
    s.add_argument("--truncation", type=int, default=61, help="Fock dimension (n_max + 1)")
    s.add_argument("--levels", type=_positive_int, default=10)
    s.add_argument("--delta", type=float, default=0.0, help="sigma_3/2 coefficient")
    s.add_argument("--analytic", action="store_true", help="also emit analytic levels")
    s.add_argument("--analytic-only", action="store_true")
    s.add_argument("--numeric-only", action="store_true")
    s.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("resonance", help="blockade-CZ fidelity versus omega_z/J0",
                       description="Blockade CZ with z-motion coupling; abscissa hbar*omega_z/J0 "
                                   "(dimensionless). " + UNITS)
    common(r)
    r.add_argument("--ensemble", type=_ensemble, action="append",
                   help="fock:N or thermal:NBAR (repeatable; default fock:1)")
    r.add_argument("--omega-range", type=_range, default=(0.8, 1.4))
    r.add_argument("--points", type=_points, default=200)
    r.add_argument("--j-ratio", type=float, default=20.0, help="J0/(hbar*Omega_mu)")
    r.add_argument("--ell-z", type=float, default=0.045, help="ell_z/L")
    r.add_argument("--fock-cutoff", type=_positive_int, default=41)
    r.add_argument("--pop-input", choices=("uu", "ud", "du", "dd"), default="ud")
    r.add_argument("--minima", default=None, help="path for the minima JSON")
    r.set_defaults(func=cmd_resonance)

    i = sub.add_parser("iswap", help="pulse-wait-pulse iSWAP (motion-free)",
                       description="iSWAP on down-e. --omega-mu and --j0 are plain frequencies "
                                   "in kHz (converted to 2*pi*kHz). Wait fractions are in units of "
                                   "pi*hbar/(2 J0); pulse areas per pulse in units of pi.")
    common(i, "json")
    i.add_argument("mode", choices=("standard", "modified", "one-pulse", "optimize"))
    i.add_argument("--omega-mu", type=float, default=None,
                   help="Rabi frequency in kHz (default 1.6, or 0.641 for one-pulse)")
    i.add_argument("--j0", type=float, default=0.37, help="J0/h in kHz")
    i.add_argument("--area", type=float, default=None, help="area per pulse / pi")
    i.add_argument("--wait-fraction", type=float, default=None)
    i.add_argument("--mode", dest="opt_mode", default="wait-only",
                   choices=("wait-only", "pulse-and-wait", "omega-scan"),
                   help="optimizer mode for 'optimize'")
    i.add_argument("--grid-points", type=_points, default=200)
    i.add_argument("--ratio-range", type=_range, default=(0.05, 0.65), help="J0/(hbar Omega_mu)")
    i.add_argument("--points", type=_points, default=241, help="omega-scan ratio count")
    i.add_argument("--simulate-all", action="store_true",
                   help="propagate uu and dd too instead of treating them as ideal spectators")
    i.set_defaults(func=cmd_iswap)

    q = sub.add_parser("qb-gate", help="eight-pulse quasi-blockade C(phi)",
                       description="Quasi-blockade gate on up-e; time in units of 1/Omega_mu. "
                                   "Angles accept 'pi', 'pi/2', '-0.04pi' or radians.")
    common(q, "json")
    q.add_argument("--phi", type=_angle, default=np.pi)
    q.add_argument("--theta", default="auto", help="'auto' or a phase per pulse pair")
    q.add_argument("--j-ratio", default="auto",
                   help="J0/(hbar Omega_mu), or 'auto' to pick the better spin echo of 11.382 and 11.832")
    q.add_argument("--trace", default=None, help="write a population/phase trajectory CSV here")
    q.add_argument("--trace-input", choices=("uu", "ud", "du", "dd"), default="uu")
    q.add_argument("--trace-dt", type=float, default=0.05, help="sample step in units of 1/Omega_mu")
    q.set_defaults(func=cmd_qb_gate)

    m = sub.add_parser("motion", help="thermal infidelity versus ell_x/L",
                       description="x-mode coupling, thermal ensembles. " + UNITS)
    common(m)
    m.add_argument("--protocol", choices=MOTION_PROTOCOLS, required=True)
    m.add_argument("--ell-range", type=_range, default=(0.0, 0.12))
    m.add_argument("--points", type=_points, default=25)
    m.add_argument("--nbar-list", type=_float_list, default=[1.0, 2.0, 3.0])
    m.add_argument("--fock-cutoff", type=_positive_int, default=41)
    m.set_defaults(func=cmd_motion)
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(known.config):
        raise UsageError(f"cannot read config file {known.config!r}")
    command = next((a for a in argv if not a.startswith("-")), None)
    sub = parser._subparsers._group_actions[0].choices.get(command)
    if sub is None:
        return
    actions = {a.dest: a for a in sub._actions}
    values = {}
    for section in ("common", command):
        if cp.has_section(section):
            for k, v in cp.items(section):
                dest = k.replace("-", "_")
                if dest not in actions:
                    raise UsageError(f"unknown config key {k!r} in [{section}]")
                act = actions[dest]
                if isinstance(act, (argparse._StoreTrueAction,)):
                    values[dest] = cp.getboolean(section, k)
                elif isinstance(act, argparse._AppendAction):
                    conv = act.type or str
                    try:
                        values[dest] = [conv(x.strip()) for x in v.split(",") if x.strip()]
                    except (argparse.ArgumentTypeError, ValueError) as exc:
                        raise UsageError(f"config key {k!r}: {exc}") from None
                elif act.type is not None:
                    try:
                        values[dest] = act.type(v)
                    except (argparse.ArgumentTypeError, ValueError) as exc:
                        raise UsageError(f"config key {k!r}: {exc}") from None
                else:
                    values[dest] = v
    sub.set_defaults(**values)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        sys.stderr.write(f"trapdipole: error: {exc}\n")
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"trapdipole: error: {exc}\n")
        return 2
    except InvariantError as exc:
        sys.stderr.write(f"trapdipole: invariant violated: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        sys.stderr.write(f"trapdipole: failed: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
