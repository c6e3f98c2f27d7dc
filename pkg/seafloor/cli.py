"""
Seafloor Mixture CLI
Batch front end: synthesize, decimate, fit, sweep, PFA export and segmentation

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
"""
import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from config import config
from core.errors import DataError, NumericalError, SeafloorError
from core.mixture_em import sample_mixture, segment
from core.selection import empirical_pfa, model_pfa_curve, render_table, sweep, threshold_grid
from core.tiles import as_linear, load_grid, normalize_rms, preprocess, tile_amplitudes
from seafloor.models import AmplitudePopulation, EmConfig, ImageGrid, Quantity, TileSpec, model_name
from storage import grid_files
from storage.reports import FitReportFile, read_model_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class SeafloorArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this CLI reserves 2 for data errors"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_pair(raw: str) -> Tuple[int, int]:
    try:
        a, b = (int(v) for v in raw.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers like 0,0 got {raw!r}")
    return a, b


# ----------------------------------------------------------------------
# input handling
# ----------------------------------------------------------------------

def _tile_spec(args) -> TileSpec:
    return TileSpec(
        origin=args.origin,
        extent=args.extent,
        decimation_factor=args.decimation_factor,
        decimation_phase=args.decimation_phase,
    )


def _population_record(population: AmplitudePopulation, normalize: bool) -> Tuple[AmplitudePopulation, dict]:
    scale = 1.0
    if normalize:
        population, scale = normalize_rms(population)
    return population, {
        'source_quantity': Quantity.AMPLITUDE.value,
        'tile': None,
        'n_samples': len(population),
        'dropped': population.dropped,
        'normalized': normalize,
        'normalization_scale': scale,
    }


def load_samples(path: str, spec: Optional[TileSpec], normalize: bool) -> Tuple[AmplitudePopulation, dict]:
    """Preprocessed samples from a grid (tile + decimate) or a population file"""
    if grid_files.is_grid(path):
        return preprocess(load_grid(path), spec or TileSpec(), normalize)
    population = grid_files.load_population(path)
    if np.any(np.asarray(population) <= 0):
        a = np.asarray(population)
        keep = a > 0
        logger.warning(f"Dropped {int((~keep).sum())} non-positive samples of {a.size}")
        population = AmplitudePopulation(a[keep], dropped=int((~keep).sum()))
    return _population_record(population, normalize)


def _replay_preprocessing(path: str, fit_report: FitReportFile) -> AmplitudePopulation:
    """Re-run the recorded preprocessing and check the result against the report"""
    record = fit_report.preprocessing
    spec = TileSpec.from_dict(record['tile']) if record.get('tile') else None
    samples, _ = load_samples(path, spec, record.get('normalized', True))
    fit_report.verify_samples(samples)
    return samples


def _em_config(args) -> EmConfig:
    restarts = tuple(args.seed + i for i in range(args.restarts)) if args.restarts else ()
    return EmConfig(tol=args.tol, max_iter=args.max_iter, weight_floor=args.weight_floor, restart_seeds=restarts)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    theta = read_model_spec(args.model)
    n = args.n
    if args.grid is not None:
        height, width = args.grid
        n = height * width
    if n < 1:
        raise UsageError("sample count must be >= 1")

    population, labels = sample_mixture(theta, n, args.seed)
    output = Path(args.output)
    if args.grid is not None:
        values = (np.asarray(population) ** 2).reshape(args.grid)
        grid_files.write_grid(ImageGrid(values, Quantity.INTENSITY), output)
        label_grid = ImageGrid(labels.reshape(args.grid).astype(float), Quantity.LABEL)
        grid_files.write_grid(label_grid, output.with_name(output.stem + ".labels"))
    else:
        grid_files.save_population(population, output)
        grid_files.save_labels(labels, output.with_name(output.stem + ".labels.txt"))
    logger.info(f"✅ Synthesized {n} samples from a {theta.M}-component mixture (seed={args.seed})")
    return EXIT_OK


def cmd_decimate(args) -> int:
    samples, record = load_samples(args.input, _tile_spec(args), not args.no_normalize)
    grid_files.save_population(samples, args.output)
    print(f"samples={record['n_samples']} dropped={record['dropped']} "
          f"scale={record['normalization_scale']!r}")
    return EXIT_OK


def _run_sweep(args, m_range: Tuple[int, int]) -> int:
    samples, record = load_samples(args.input, _tile_spec(args), not args.no_normalize)
    em_config = _em_config(args)
    report = sweep(samples, m_range, em_config, convention=args.k_convention, jobs=args.jobs)

    fit_report = FitReportFile.build(samples, str(args.input), record, em_config, report)
    fit_report.save(args.output)
    print(render_table([report], labels=[Path(args.input).stem]))
    print(f"k convention: {report.k_convention}; N = {report.n_samples}")
    for name, M in (("AIC", report.selected_by_aic), ("BIC", report.selected_by_bic), ("LL", report.selected_by_ll)):
        if M is not None:
            print(f"selected by {name}: {model_name(M)} (M={M})")

    if not any(r.ok for r in report.rows):
        logger.error("Every fit in the sweep failed")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.max_components < args.min_components:
        raise UsageError(
            f"--max-components ({args.max_components}) < --min-components ({args.min_components})"
        )
    return _run_sweep(args, (args.min_components, args.max_components))


def cmd_fit(args) -> int:
    return _run_sweep(args, (args.components, args.components))


def cmd_pfa(args) -> int:
    thresholds = threshold_grid(args.grid)
    fit_report = FitReportFile.load(args.report)
    thetas = fit_report.fitted_thetas(converged_only=False)
    if not thetas:
        raise DataError(f"{args.report} contains no fitted model")
    unconverged = sorted(set(thetas) - set(fit_report.fitted_thetas(converged_only=True)))
    if unconverged:
        logger.warning(f"⚠️ M={unconverged} did not converge; their columns use the last accepted iterate")
    samples = _replay_preprocessing(args.input, fit_report)

    curve = model_pfa_curve(empirical_pfa(samples, thresholds), thetas)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, 'w', newline='') as f:
        writer = csv.writer(f)
        columns = curve.columns()
        writer.writerow(columns if not args.log10 else [columns[0]] + [f"log10_{c}" for c in columns[1:]])
        for row in curve.rows():
            values = row if not args.log10 else [row[0]] + [math.log10(v) if v > 0 else float('-inf') for v in row[1:]]
            writer.writerow([repr(float(v)) for v in values])
    logger.info(f"✅ Wrote {len(thresholds)} PFA rows for M={sorted(thetas)} to {output}")
    return EXIT_OK


def cmd_segment(args) -> int:
    fit_report = FitReportFile.load(args.report)
    theta = fit_report.theta(args.components)
    if not grid_files.is_grid(args.input):
        raise DataError("segment needs a grid input")
    _replay_preprocessing(args.input, fit_report)

    record = fit_report.preprocessing
    grid = as_linear(load_grid(args.input))
    spec = TileSpec.from_dict(record['tile'])
    amplitudes = tile_amplitudes(grid, spec) / record.get('normalization_scale', 1.0)
    labels = segment(amplitudes, theta)

    grid_files.write_grid(ImageGrid(labels.astype(float), Quantity.LABEL, grid.pixel_size), args.output)
    counts = np.bincount(labels.ravel(), minlength=theta.M) / labels.size
    print("label fractions: " + ", ".join(f"{j}={c:.4f}" for j, c in enumerate(counts)))
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = SeafloorArgumentParser(
        prog="seafloor",
        description="Rayleigh + K mixture fitting for sonar image amplitudes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    seafloor synth --model model.json -n 10000 --seed 1 -o samples.txt
    seafloor synth --model model.json --grid 600,600 --seed 1 -o tile
    seafloor sweep tile.f32 -o report.json
    seafloor pfa tile.f32 --report report.json -o pfa.csv
    seafloor segment tile.f32 --report report.json -M 3 -o labels
        """,
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=SeafloorArgumentParser)

    tile = SeafloorArgumentParser(add_help=False)
    tile.add_argument('--origin', type=_int_pair, default=(0, 0), help='Tile origin row,col (default: 0,0)')
    tile.add_argument('--extent', type=_int_pair, default=None, help='Tile size rows,cols (default: whole grid)')
    tile.add_argument('--decimation-factor', type=int, default=config.DECIMATION_FACTOR,
                      help=f'Keep every n-th pixel per axis (default: {config.DECIMATION_FACTOR})')
    tile.add_argument('--decimation-phase', type=_int_pair, default=(0, 0),
                      help='Row,col offset of the first kept pixel (default: 0,0)')
    tile.add_argument('--no-normalize', action='store_true', help='Skip RMS normalization')

    em = SeafloorArgumentParser(add_help=False)
    em.add_argument('--tol', type=float, default=config.EM_TOL, help=f'Relative LL tolerance (default: {config.EM_TOL})')
    em.add_argument('--max-iter', type=int, default=config.EM_MAX_ITER,
                    help=f'EM iteration cap (default: {config.EM_MAX_ITER})')
    em.add_argument('--weight-floor', type=float, default=config.WEIGHT_FLOOR, help='Minimum mixture weight')
    em.add_argument('--seed', type=int, default=0, help='First restart seed (default: 0)')
    em.add_argument('--restarts', type=int, default=0, help='Extra randomly started fits per M (default: 0)')
    em.add_argument('--jobs', type=int, default=config.JOBS, help='Worker processes for the sweep')
    em.add_argument('--k-convention', choices=config.K_CONVENTIONS, default=config.K_CONVENTION,
                    help=f'Parameter count convention (default: {config.K_CONVENTION})')

    p = sub.add_parser('synth', help='Draw samples from a model-spec file')
    p.add_argument('--model', required=True, help='Model-spec JSON {w0, lambda0, components: [{w, sigma, alpha}]}')
    p.add_argument('-n', type=int, default=10_000, help='Sample count (default: 10000)')
    p.add_argument('--grid', type=_int_pair, default=None, help='Write a rows,cols intensity grid instead')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('decimate', parents=[tile], help='Preprocess a grid into a sample file')
    p.add_argument('input')
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_decimate)

    p = sub.add_parser('sweep', parents=[tile, em], help='Fit M = min..max and select by AIC/BIC/LL')
    p.add_argument('input', help='Grid (.f32 + .json) or population file')
    p.add_argument('--min-components', type=int, default=config.MIN_COMPONENTS)
    p.add_argument('--max-components', type=int, default=config.MAX_COMPONENTS)
    p.add_argument('--output', '-o', required=True, help='Fit report JSON')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('fit', parents=[tile, em], help='Fit a single M')
    p.add_argument('input')
    p.add_argument('--components', '-M', type=int, required=True)
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('pfa', help='Empirical and model PFA curves as CSV')
    p.add_argument('input')
    p.add_argument('--report', required=True)
    p.add_argument('--grid', default=config.PFA_GRID, help=f'start:stop:step (default: {config.PFA_GRID})')
    p.add_argument('--log10', action='store_true', help='Write log10 probabilities')
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_pfa)

    p = sub.add_parser('segment', help='Label every tile pixel with its most responsible component')
    p.add_argument('input')
    p.add_argument('--report', required=True)
    p.add_argument('--components', '-M', type=int, required=True)
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_segment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    except NumericalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    except SeafloorError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
