"""Command-line interface.

Every subcommand reads model parameters from ``--params FILE`` (flat
``key = value`` lines, kinetic or engineering keys) with command-line
flags taking precedence.  Tabular output is CSV with a header row and
full-precision scientific notation, written to ``--out`` or stdout.

Exit codes: 0 success, 2 parameter error, 3 accuracy error, 4 resource error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .cf import cf, cf_discrete
from .core import DiscreteParams, Phase, choose_n, load_param_file, run_config_from_mapping
from .density import (
    QuadratureConfig,
    default_grid,
    discrete_mixture_density,
    injected_density,
    invert_cf,
    partial_density,
    write_density_csv,
)
from .errors import KinsorbError, ParameterError
from .mbd import conditional_pmf, partial_pmf, pmf, write_pmf_csv
from .moments import michalak_mu2star, moments_discrete, moments_limit
from .pde import solve, write_fields_csv
from .peaks import (
    FIGURE3_PANELS,
    TABLE1_REFERENCE,
    TABLE1_T_STAR,
    ScanConfig,
    damkohler_scan,
    figure3,
    table1,
    write_profile_csv,
    write_table1_csv,
)
from .simulate import (
    empirical_summary,
    simulate_ctmc,
    simulate_discrete,
    simulate_uniformized,
    write_samples_csv,
)

log = logging.getLogger("kinsorb")

_PARAM_FLAGS = {
    "lambda": "lambda", "mu": "mu", "D": "D", "v": "v", "iota_F": "iota_F", "t": "t", "n": "n",
    "Pe": "Pe", "Da_I": "Da_I", "t_star": "t_star", "R": "R", "L": "L",
}


def _fmt(x: float) -> str:
    return f"{x:.17e}"


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    p.add_argument("--params", default=d(None), help="parameter file (key = value lines)")
    p.add_argument("--out", default=d(None), help="output CSV path (default stdout)")
    p.add_argument("--seed", type=int, default=d(0), help="random seed")
    p.add_argument("--tolerance", type=float, default=d(1e-9), help="quadrature tolerance")
    p.add_argument("--log-level", default=d("WARNING"), help="logging level")


def _add_model(p: argparse.ArgumentParser):
    g = p.add_argument_group("model parameters (override --params)")
    g.add_argument("--lambda", dest="lambda_", type=float, help="adsorption rate")
    g.add_argument("--mu", type=float, help="desorption rate")
    g.add_argument("--D", type=float, help="dispersion coefficient")
    g.add_argument("--v", type=float, help="velocity")
    g.add_argument("--iota-F", dest="iota_F", type=float, help="initial free probability (default 1)")
    g.add_argument("--t", type=float, help="time")
    g.add_argument("--n", type=int, help="number of time steps (default: chosen from --cap)")
    g.add_argument("--cap", type=float, default=0.01, help="upper bound on lambda dt and mu dt when choosing n")
    g.add_argument("--Pe", type=float, help="Peclet number")
    g.add_argument("--Da-I", dest="Da_I", type=float, help="Damkohler number")
    g.add_argument("--t-star", dest="t_star", type=float, help="dimensionless time")
    g.add_argument("--R", type=float, help="retardation coefficient")
    g.add_argument("--L", type=float, help="length scale")


def _config(args):
    values = load_param_file(args.params) if args.params else {}
    for key in _PARAM_FLAGS:
        val = getattr(args, "lambda_" if key == "lambda" else key, None)
        if val is not None:
            values[key] = val
    return run_config_from_mapping(values)


def _steps(args, cfg) -> int:
    return cfg.n if cfg.n is not None else choose_n(cfg.t, cfg.params, cap=args.cap)


def _phase(args) -> Phase:
    return Phase.parse(args.phase)


def cmd_mbd(args):
    cfg = _config(args)
    dp = DiscreteParams.from_kinetic(cfg.params, cfg.t, _steps(args, cfg))
    phase = _phase(args)
    if phase is Phase.TOTAL:
        p = pmf(dp, cfg.iota)
    elif args.partial:
        p = partial_pmf(dp, cfg.iota, phase)
    else:
        p = conditional_pmf(dp, cfg.iota, phase)
    with _output(args.out) as fh:
        write_pmf_csv(p, fh)


def cmd_cf(args):
    cfg = _config(args)
    u = np.linspace(args.u_min, args.u_max, args.points)
    if args.discrete:
        dp = DiscreteParams.from_kinetic(cfg.params, cfg.t, _steps(args, cfg))
        val = cf_discrete(dp, u, cfg.iota, args.phase, cfg.params).value
    else:
        val = cf(cfg.t, u, cfg.iota, args.phase, cfg.params).value
    val = np.broadcast_to(val, u.shape)
    with _output(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["u", "re", "im"])
        for uu, z in zip(u, val):
            w.writerow([_fmt(uu), _fmt(z.real), _fmt(z.imag)])


def cmd_density(args):
    cfg = _config(args)
    phase = _phase(args)
    if args.method == "fourier":
        grid = _grid(args, lambda: default_grid(cfg.t, cfg.iota, phase, cfg.params, nodes=args.nodes))
        quad = QuadratureConfig(tol=args.tolerance)
        d = invert_cf(cfg.t, grid, cfg.iota, phase, cfg.params, quad)
        pF = partial_density(cfg.t, grid, cfg.iota, "F", cfg.params, quad)
        pA = partial_density(cfg.t, grid, cfg.iota, "A", cfg.params, quad)
        with _output(args.out) as fh:
            write_density_csv(fh, d, pF, pA)
        return
    dp = DiscreteParams.from_kinetic(cfg.params, cfg.t, _steps(args, cfg))
    L = args.injection_length
    grid = _grid(args, lambda: default_grid(cfg.t, cfg.iota, phase, cfg.params, nodes=args.nodes, dp=dp, L=L or 0.0))
    if args.method == "injected":
        if L is None:
            raise ParameterError("--injection-length is required for method 'injected'")
        d = injected_density(dp, grid, L, cfg.iota, cfg.params, phase)
    else:
        d = discrete_mixture_density(dp, grid, cfg.iota, cfg.params, phase)
    with _output(args.out) as fh:
        write_density_csv(fh, d)


def _grid(args, fallback):
    if args.x_min is None and args.x_max is None:
        return fallback()
    if args.x_min is None or args.x_max is None:
        raise ParameterError("give both --x-min and --x-max")
    return np.linspace(args.x_min, args.x_max, args.nodes)


def cmd_moments(args):
    cfg = _config(args)
    rows = []
    for phase in Phase:
        lim = moments_limit(cfg.t, cfg.iota, phase, cfg.params)
        row = [phase.value, _fmt(lim.mean), _fmt(lim.variance)]
        if args.discrete:
            dp = DiscreteParams.from_kinetic(cfg.params, cfg.t, _steps(args, cfg))
            dis = moments_discrete(dp, cfg.iota, phase, cfg.params)
            row += [_fmt(dis.mean), _fmt(dis.variance)]
        rows.append(row)
    header = ["phase", "mean", "variance"] + (["mean_discrete", "variance_discrete"] if args.discrete else [])
    with _output(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
        if args.compare_michalak:
            p = cfg.params
            ref = michalak_mu2star(cfg.t, p.lam / p.mu, p.mu, p.D, p.v)
            own = moments_limit(cfg.t, (1.0, 0.0), Phase.FREE, p).variance
            w.writerow([])
            w.writerow(["check", "michalak_mu2star", "free_variance_free_start", "relative_difference"])
            w.writerow(["michalak", _fmt(ref), _fmt(own), _fmt(abs(ref - own) / abs(own))])


def cmd_simulate(args):
    cfg = _config(args)
    if args.model == "discrete":
        dp = DiscreteParams.from_kinetic(cfg.params, cfg.t, _steps(args, cfg))
        s = simulate_discrete(dp, cfg.iota, cfg.params, args.N, args.seed, args.workers)
    elif args.model == "ctmc":
        s = simulate_ctmc(cfg.t, cfg.iota, cfg.params, args.N, args.seed, args.workers)
    else:
        lam = args.Lambda if args.Lambda is not None else max(cfg.params.lam, cfg.params.mu)
        s = simulate_uniformized(cfg.t, lam, cfg.iota, cfg.params, args.N, args.seed, args.workers)
    with _output(args.out) as fh:
        if args.per_particle:
            write_samples_csv(s, fh)
            return
        w = csv.writer(fh)
        w.writerow(["phase", "count", "fraction", "mean", "variance", "se_mean", "se_variance"])
        for phase in Phase:
            try:
                e = empirical_summary(s, phase)
            except KinsorbError:
                w.writerow([phase.value, 0, _fmt(0.0), "", "", "", ""])
                continue
            w.writerow([phase.value, e.count, _fmt(e.fraction), _fmt(e.mean), _fmt(e.variance),
                        _fmt(e.se_mean), _fmt(e.se_variance)])


def cmd_pde(args):
    cfg = _config(args)
    p = cfg.params
    if args.x_min is None or args.x_max is None:
        x = default_grid(cfg.t, cfg.iota, Phase.TOTAL, p, nodes=args.nodes, width=10.0)
    else:
        x = np.linspace(args.x_min, args.x_max, args.nodes)
    times = args.times or [cfg.t]
    fields = solve(p, args.init_width, x, cfg.t, cfg.t / args.steps, cfg.iota, snapshots=times)
    with _output(args.out) as fh:
        write_fields_csv(fields, fh)


def _scan_config(args) -> ScanConfig:
    return ScanConfig(R=args.R_scan, Pe=args.Pe_scan, v=args.v_scan, L=args.L_scan, n=args.n_scan,
                      injection_length=args.injection_length, prominence_rel=args.prominence,
                      nodes=args.grid_nodes)


def cmd_table1(args):
    cfg = _scan_config(args)
    results = table1(args.t_star_list or TABLE1_T_STAR, cfg)
    with _output(args.out) as fh:
        write_table1_csv(results, fh)
    for r in results:
        ref = TABLE1_REFERENCE.get(r.t_star)
        log.info("t*=%g Da_I_max=%s reference=%s", r.t_star, r.Da_I_max, ref)


def cmd_scan(args):
    cfg = _scan_config(args)
    r = damkohler_scan(args.scan_t_star, cfg)
    with _output(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["t_star", "Da_I_max", "monotone"])
        w.writerow([_fmt(r.t_star), "" if r.Da_I_max is None else _fmt(r.Da_I_max), r.monotone])


def cmd_figure3(args):
    cfg = _scan_config(args)
    panel = tuple(args.panel) if args.panel else FIGURE3_PANELS[0]
    fig = figure3(panel, cfg)
    log.info("panel %s: %d peaks (injected slug: %d)", panel, fig.peaks.count, fig.injected_peaks.count)
    with _output(args.out) as fh:
        write_profile_csv(fig, fh)


def _add_scan(p: argparse.ArgumentParser):
    g = p.add_argument_group("scan settings")
    g.add_argument("--R", dest="R_scan", type=float, default=2.0)
    g.add_argument("--Pe", dest="Pe_scan", type=float, default=100.0)
    g.add_argument("--v", dest="v_scan", type=float, default=1.0)
    g.add_argument("--L", dest="L_scan", type=float, default=1.0)
    g.add_argument("--n", dest="n_scan", type=int, default=400)
    g.add_argument("--injection-length", type=float, default=None,
                   help="convolve with a uniform slug of this width (default: point release)")
    g.add_argument("--prominence", type=float, default=ScanConfig.prominence_rel,
                   help="peak prominence relative to the maximum")
    g.add_argument("--grid-nodes", type=int, default=ScanConfig.nodes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinsorb", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mbd", parents=[common], help="occupation-count pmf")
    _add_model(p)
    p.add_argument("--phase", default="total")
    p.add_argument("--partial", action="store_true", help="joint with the terminal phase (not conditional)")
    p.set_defaults(func=cmd_mbd)

    p = sub.add_parser("cf", parents=[common], help="characteristic function on a frequency grid")
    _add_model(p)
    p.add_argument("--phase", default="total")
    p.add_argument("--u-min", type=float, default=-50.0)
    p.add_argument("--u-max", type=float, default=50.0)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--discrete", action="store_true", help="n-step characteristic function")
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("density", parents=[common], help="position density on a grid")
    _add_model(p)
    p.add_argument("--phase", default="F")
    p.add_argument("--method", choices=["fourier", "mixture", "injected"], default="fourier")
    p.add_argument("--injection-length", type=float)
    p.add_argument("--nodes", type=int, default=2001)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("moments", parents=[common], help="means and variances per phase")
    _add_model(p)
    p.add_argument("--discrete", action="store_true", help="also print n-step moments")
    p.add_argument("--compare-michalak", action="store_true")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo particle tracking")
    _add_model(p)
    p.add_argument("--model", choices=["discrete", "ctmc", "uniformized"], default="ctmc")
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--Lambda", type=float, help="uniformization rate (default max(lambda, mu))")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--per-particle", action="store_true", help="write position,phase rows")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pde", parents=[common], help="finite-difference concentration fields")
    _add_model(p)
    p.add_argument("--nodes", type=int, default=2000)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--init-width", type=float)
    p.add_argument("--times", type=float, nargs="*", help="snapshot times (default: final)")
    p.set_defaults(func=cmd_pde)

    p = sub.add_parser("table1", parents=[common], help="Damkohler thresholds for a list of t*")
    _add_scan(p)
    p.add_argument("--t-star", dest="t_star_list", type=float, nargs="*")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("scan", parents=[common], help="Damkohler threshold at one t*")
    _add_scan(p)
    p.add_argument("--t-star", dest="scan_t_star", type=float, required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("figure3", parents=[common], help="normalised free profile of one panel")
    _add_scan(p)
    p.add_argument("--panel", type=float, nargs=2, metavar=("DA_I", "T_STAR"))
    p.set_defaults(func=cmd_figure3)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except KinsorbError as exc:
        print(f"kinsorb: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return 0
    except MemoryError as exc:
        print(f"kinsorb: error: out of memory: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
