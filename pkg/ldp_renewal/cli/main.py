import argparse
import logging
from dataclasses import replace

import numpy as np
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import constants as C
from .config import RunConfig
from .excepthook import make_excepthook
from .export import write_rate_curve, write_rate_grid, write_upsilon_points
from ..ldp.cgf import exponential_moment_condition
from ..ldp.common import encode_real, to_json
from ..ldp.exceptions import ConfigError
from ..ldp.mc import empirical_rate_curve, rate_trend
from ..ldp.model import Family, load_samples, mean_ratio
from ..ldp.rate import GridRow, rate_grid, upsilon_points
from ..ldp.report import BoundReport, RateCurve, report_timestamp
from ..ldp import verify
from ..version import version

logger = logging.getLogger(__name__)

class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(C.EXIT_USAGE, f"{self.prog}: error: {message}\n")

def _write_json(file: Path, content) -> Path:
    file.parent.mkdir(parents=True, exist_ok=True)
    with file.open('w', encoding='utf-8', newline='\n') as f:
        f.write(to_json(content))
        f.write('\n')
    return file

def _row_summary(row: GridRow, value: float):
    return {"w": [float(v) for v in row.w], "value": encode_real(value)}

def cmd_rate(config: RunConfig, progress=False) -> int:
    law = config.make_law()
    params = config.rate_parameters()
    points = config.grid_points()
    explicit = config.upsilon_points()
    if not points and not explicit:
        raise ConfigError("The 'rate' section needs a 'grid' or 'upsilon_points'")
    summary = {
        "law":            law.describe(),
        "tail":           law.tail.encode(),
        "mean_ratio":     None if mean_ratio(law) is None else mean_ratio(law).tolist(),
        "moment_condition": exponential_moment_condition(law).holds,
        "tolerances":     params.encode(),
        "seed":           config.seed,
        "timestamp":      report_timestamp(config.timestamp),
        "tool_version":   str(version),
    }
    converged = True
    if points:
        rows = rate_grid(law, points, params)
        write_rate_grid(config.output_dir / C.RATE_GRID_CSV, rows, law.dim)
        converged = all(r.converged for r in rows)
        finite = [r for r in rows if np.isfinite(r.I_lower)]
        lowest = min(finite, key=lambda r: r.I_lower) if finite else None
        highest = max(finite, key=lambda r: r.I_lower) if finite else None
        summary["grid"] = {
            "rows":            len(rows),
            "converged":       converged,
            "not_converged":   [[float(v) for v in r.w] for r in rows if not r.converged],
            "near_boundary":   [[float(v) for v in r.w] for r in rows if r.near_boundary],
            "argmin_I_lower":  _row_summary(lowest, lowest.I_lower) if finite else None,
            "argmax_I_lower":  _row_summary(highest, highest.I_lower) if finite else None,
            "beta_star":       [encode_real(r.beta_star) for r in rows],
            "gamma_star":      [encode_real(r.gamma_star) for r in rows],
        }
    if explicit:
        values = upsilon_points(law, explicit, params)
        write_upsilon_points(config.output_dir / C.UPSILON_POINTS_CSV, values, law.dim)
        summary["upsilon_points"] = [{"beta": encode_real(b), "w": w.tolist(), **v.encode()} for b, w, v in values]
        converged = converged and all(v.converged for _, _, v in values)
    _write_json(config.output_dir / C.RATE_SUMMARY_JSON, summary)
    if not converged:
        logger.warning("Some rate values did not converge")
        return C.EXIT_NUMERICAL
    return C.EXIT_OK

def cmd_simulate(config: RunConfig, progress=False) -> int:
    law = config.make_law()
    set_ = config.set_descriptor("simulate")
    sim = config.simulation_parameters("simulate")
    entries = empirical_rate_curve(law, set_, config.t_grid("simulate"), sim.n_runs, config.seed, sim=sim,
                                   progress=progress)
    write_rate_curve(config.output_dir / C.RATE_CURVE_CSV, entries)
    RateCurve(law.describe(), set_, entries, config.seed, report_timestamp(config.timestamp)) \
        .save(config.output_dir / C.RATE_CURVE_JSON)
    logger.info(f"Rate trend: {rate_trend(entries)}")
    return C.EXIT_OK

def _s_grid(config: RunConfig) -> List[float]:
    block = config.tails if config.tails else config.verify
    if "s_grid" in block:
        return [float(s) for s in block["s_grid"]]
    if "dyadic" in block:
        lo, hi = block["dyadic"]
        return [2.0 ** k for k in range(int(lo), int(hi) + 1)]
    raise ConfigError("Tail estimation needs an 's_grid' or a 'dyadic' exponent range")

def run_verify(config: RunConfig, which: str, progress=False) -> BoundReport:
    law = config.make_law()
    params = config.rate_parameters()
    section = "verify"
    if which in ("lower", "upper", "convex"):
        sim = config.simulation_parameters(section)
        check = {"lower": verify.check_lower_bound, "upper": verify.check_upper_bound,
                 "convex": verify.check_convex}[which]
        return check(law, config.set_descriptor(section), config.t_grid(section), sim.n_runs, config.seed, sim,
                     params, progress)
    if which == "counterexample-open":
        sim = config.simulation_parameters(section)
        t_grid = config.get(section, "t_grid", (10, 50, 100))
        return verify.counterexample_open(law, [float(t) for t in t_grid], sim.n_runs, config.seed, sim, params,
                                          progress)
    if which == "counterexample-closed":
        sim = config.simulation_parameters(section)
        return verify.counterexample_closed(law, float(config.get(section, "eps", 0.1)),
                                            [int(n) for n in config.get(section, "N_grid", (50, 100, 200, 400))],
                                            sim.n_runs, config.seed, sim, params, config.get(section, "clt_N"),
                                            progress)
    if which == "supermult":
        sim = config.simulation_parameters(section)
        pairs = [(int(m), int(n)) for m, n in config.get(section, "pairs", [(1, 1)])]
        return verify.check_supermultiplicativity(law, config.set_descriptor(section), pairs, sim.n_runs,
                                                  config.seed, sim, progress)
    if which == "prop2":
        w_grid = config.get(section, "w_grid")
        points = [np.atleast_1d(np.asarray(w, dtype=float)) for w in w_grid] if w_grid else config.grid_points()
        if not points:
            raise ConfigError("The sublinear reward check needs a 'w_grid' in 'verify' or a rate grid")
        return verify.check_prop2(law, points, params)
    if which == "tails":
        return verify.check_tails(law, _s_grid(config))
    raise ConfigError(f"Unknown check '{which}', expected one of {C.VERIFY_CHOICES}")

def cmd_verify(config: RunConfig, which: str, progress=False) -> int:
    report = run_verify(config, which, progress)
    report = replace(report, seed=config.seed, timestamp=report_timestamp(config.timestamp))
    config.output_dir.mkdir(parents=True, exist_ok=True)
    report.save(config.output_dir / C.report_json(which))
    expected = verify.expected_verdicts(report)
    if report.verdict not in expected:
        logger.error(f"Unexpected verdict '{report.verdict.value}' for '{which}', "
                     f"expected one of {sorted(v.value for v in expected)}")
        return C.EXIT_UNEXPECTED_VERDICT
    logger.info(f"Verdict '{report.verdict.value}' for '{which}', as expected")
    return C.EXIT_OK

def cmd_tails(config: RunConfig, progress=False) -> int:
    samples = config.tails.get("samples")
    if samples is not None:
        path = Path(samples)
        source = load_samples(path if path.is_absolute() else config.base_dir / path)[0]
        described = {"family": Family.empirical.value, "params": {"path": str(samples)}}
        expected = None
    else:
        law = config.make_law()
        source, described, expected = law, law.describe(), law.tail.encode()
    estimate = verify.estimate_tail_exponents(source, _s_grid(config))
    _write_json(config.output_dir / C.TAILS_JSON, {
        "law":          described,
        "estimate":     estimate.encode(),
        "expected":     expected,
        "seed":         config.seed,
        "timestamp":    report_timestamp(config.timestamp),
        "tool_version": str(version),
    })
    return C.EXIT_OK

def build_parser() -> ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', type=Path, required=True, help="Archivo de configuración (.json)")
    common.add_argument('--seed', type=int, default=None, help="Semilla (reemplaza la del archivo)")
    common.add_argument('--workers', type=int, default=None,
                        help=f"Cantidad de procesos (por defecto, la del archivo o {C.WORKERS_ENV})")
    common.add_argument('--out', '-o', type=Path, default=None, help="Directorio de salida")
    common.add_argument('--progress', action='store_true', help="Mostrar barra de progreso")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help="Mensajes de depuración")
    verbosity.add_argument('--quiet', '-q', action='store_true', help="Sólo advertencias y errores")

    parser = ArgumentParser(prog="ldp_renewal",
                            description="Funciones de tasa de grandes desvíos para procesos de renovación con "
                                        "recompensa")
    parser.add_argument('--version', action='version', version=f"%(prog)s {version}")
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)
    sub.add_parser('rate', parents=[common], help="Evaluar J, Υ e I sobre una grilla")
    sub.add_parser('simulate', parents=[common], help="Curva de tasas empíricas por Monte Carlo")
    p = sub.add_parser('verify', parents=[common], help="Verificar una cota o contraejemplo")
    p.add_argument('which', choices=C.VERIFY_CHOICES)
    sub.add_parser('tails', parents=[common], help="Estimar exponentes de cola")
    return parser

def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    fallback_dir = args.out if args.out is not None else Path(".")
    excepthook = make_excepthook(fallback_dir)
    sys.excepthook = excepthook
    try:
        config = RunConfig.load(args.config, seed=args.seed, workers=args.workers, out=args.out)
        excepthook = make_excepthook(config.output_dir)
        sys.excepthook = excepthook
        if args.command == 'rate':
            return cmd_rate(config, args.progress)
        if args.command == 'simulate':
            return cmd_simulate(config, args.progress)
        if args.command == 'verify':
            return cmd_verify(config, args.which, args.progress)
        return cmd_tails(config, args.progress)
    except Exception:
        return excepthook(*sys.exc_info())

if __name__ == '__main__':
    sys.exit(main())
