import argparse
import logging
import os
import sys
import numpy as np
import torch

from src.LongRange import __version__
from src.LongRange.errors import DomainError, InputError, LongRangeError
from src.LongRange.ingest import (build_schema, encode_features, gen_grid_city, gen_small_world_city,
                                  load_city, make_split)
from src.LongRange.labeling import label_all
from src.LongRange.netstats import stats_report
from src.LongRange.spectral import PUBLISHED_GRAPHS, bound_lambda, spectral_report
from src.LongRange.training import HOP_GRID, TrainConfig, evaluate, run_experiment, train
from src.LongRange.influence import receptive_field
from src.LongRange.io_operations import (read_bundle, read_config_file, save_checkpoint, load_checkpoint,
                                         store_history, store_json, write_bundle, write_labels, write_manifest)
from src.LongRange.logger import (log_influence_summary, log_stats_summary, log_training_summary,
                                  setup_logging)

logger = logging.getLogger(__name__)


def parse_arguments(argv=None):
    """
    Parse command line arguments.

    Returns:
    - args: Parsed command line arguments.
    """
    parser = argparse.ArgumentParser(description='Long-range graph benchmark toolkit')
    parser.add_argument('-c', '--config', type=str, default=None, help='Path to a TOML/JSON run configuration')
    parser.add_argument('--out', type=str, default=None, help='Output directory (default: results/<config or command>_results)')
    parser.add_argument('--seed', type=int, default=None, help='Master seed (LRGK_SEED overrides it)')
    parser.add_argument('--threads', type=int, default=os.cpu_count() or 1, help='Worker threads (1 for bit-exact runs)')
    commands = parser.add_subparsers(dest='command', required=True)

    def add_labeling(sub):
        sub.add_argument('--label', action='store_true', help='Also compute eccentricity labels')
        sub.add_argument('--hops', type=int, default=16, help='Hop bound of the eccentricity estimate')
        sub.add_argument('--quantiles', type=int, default=10, help='Number of label classes')
        sub.add_argument('--split', type=float, nargs=3, default=[0.1, 0.1, 0.8], help='Train/val/test fractions')

    ingest = commands.add_parser('ingest', help='Build a dataset bundle from nodes/edges CSV files')
    ingest.add_argument('--nodes', type=str, required=True)
    ingest.add_argument('--edges', type=str, required=True)
    add_labeling(ingest)

    generate = commands.add_parser('generate', help='Generate a synthetic dataset bundle')
    shape = generate.add_mutually_exclusive_group(required=True)
    shape.add_argument('--grid', type=str, help='Grid size WIDTHxHEIGHT, e.g. 64x64')
    shape.add_argument('--small-world', type=str, help='Small-world parameters N,K,P, e.g. 4096,4,0.1')
    generate.add_argument('--weight-law', type=str, default='block', choices=['unit', 'uniform', 'lognormal', 'block'])
    generate.add_argument('--perturb', type=float, default=0.0, help='Edge deletion probability for grids')
    add_labeling(generate)

    label = commands.add_parser('label', help='Compute eccentricity labels of a bundle')
    label.add_argument('--bundle', type=str, default=None)
    label.add_argument('--hops', type=int, default=16)
    label.add_argument('--quantiles', type=int, default=10)

    stats = commands.add_parser('stats', help='Network statistics of a bundle')
    stats.add_argument('--bundle', type=str, default=None)

    spectral = commands.add_parser('spectral', help='Spectral bound and eigenvalue estimates')
    spectral.add_argument('--bundle', type=str, default=None)
    spectral.add_argument('--bound-only', action='store_true', help='Evaluate the bound from --dmax and --diam')
    spectral.add_argument('--published', action='store_true', help='Evaluate the bound for the reference graphs')
    spectral.add_argument('--dmax', type=int)
    spectral.add_argument('--diam', type=int)
    spectral.add_argument('--gamma', type=float, default=1.0)
    spectral.add_argument('--decay-length', type=int, default=50)

    train_cmd = commands.add_parser('train', help='Train a model on a labeled bundle')
    train_cmd.add_argument('--bundle', type=str, default=None)

    experiment = commands.add_parser('experiment', help='Accuracy over the (L, H) grid')
    experiment.add_argument('--bundle', type=str, default=None)
    experiment.add_argument('--architectures', type=str, nargs='+', default=['mlp', 'sgc', 'gcn'])
    experiment.add_argument('--hop-grid', type=int, nargs='+', default=list(HOP_GRID))
    experiment.add_argument('--settings', type=str, nargs='+', default=['matched', 'fixed'], choices=['matched', 'fixed'])

    influence = commands.add_parser('influence', help='Influence profile of a trained model')
    influence.add_argument('--bundle', type=str, default=None)
    influence.add_argument('--checkpoint', type=str, required=True)
    influence.add_argument('--hops', type=int, default=None)
    influence.add_argument('--samples', type=int, default=None)

    return parser.parse_args(argv)


def create_results_dir(args, config):
    """
    Create the directory for the results of this run.

    Returns:
    - results_dir (str): Path to the created results directory.
    """
    if args.out:
        results_dir = args.out
    else:
        name = os.path.splitext(os.path.basename(args.config))[0] if args.config else args.command
        results_dir = os.path.join(config.get('IO', {}).get('results', 'results'), f'{name}_results')
    os.makedirs(results_dir, exist_ok=True)
    return results_dir


def resolve_seed(args, config):
    if os.environ.get('LRGK_SEED'):
        try:
            return int(os.environ['LRGK_SEED'])
        except ValueError:
            raise InputError(f"LRGK_SEED must be an integer, got {os.environ['LRGK_SEED']!r}") from None
    if args.seed is not None:
        return args.seed
    return int(config.get('Training', {}).get('seed', 0))


def bundle_path(args, config):
    path = getattr(args, 'bundle', None) or config.get('Dataset', {}).get('bundle')
    if not path:
        raise InputError("No bundle given: pass --bundle or set [Dataset] bundle in the configuration")
    return path


def train_config(config, seed):
    return TrainConfig.from_dict({**config.get('Training', {}), 'seed': seed})


def _finish_bundle(args, g, raw, out, seed):
    # Step 1: Encode features and split the nodes
    schema = build_schema(raw)
    table = encode_features(g, raw, schema)
    table.split = make_split(g.n_nodes, tuple(args.split), seed)
    # Step 2: Eccentricity labels on request
    epsilon_hat = None
    if args.label:
        result = label_all(g, args.hops, args.quantiles, n_jobs=args.threads)
        table.y, epsilon_hat = result.labels, result.epsilon_hat
    # Step 3: Write the bundle and its statistics
    write_bundle(out, g, table, schema, epsilon_hat)
    report = stats_report(g, table.y)
    print(report.table_row(args.command))
    store_json(report.to_dict(), os.path.join(out, 'stats.json'))


def cmd_ingest(args, config, out, seed):
    g, raw = load_city(args.nodes, args.edges)
    _finish_bundle(args, g, raw, out, seed)


def cmd_generate(args, config, out, seed):
    if args.grid:
        try:
            width, height = (int(x) for x in args.grid.lower().split('x'))
        except ValueError:
            raise InputError(f"--grid expects WIDTHxHEIGHT, got {args.grid!r}") from None
        g, raw = gen_grid_city(width, height, args.weight_law, args.perturb, seed)
    else:
        try:
            n, k, p = args.small_world.split(',')
            n, k, p = int(n), int(k), float(p)
        except ValueError:
            raise InputError(f"--small-world expects N,K,P, got {args.small_world!r}") from None
        g, raw = gen_small_world_city(n, k, p, seed, args.weight_law)
    _finish_bundle(args, g, raw, out, seed)


def cmd_label(args, config, out, seed):
    bundle = read_bundle(bundle_path(args, config))
    result = label_all(bundle.graph, args.hops, args.quantiles, n_jobs=args.threads)
    write_labels(os.path.join(out, 'labels.csv'), result.epsilon_hat, result.labels)
    counts = np.bincount(result.labels, minlength=args.quantiles)
    print(f"Labeled {bundle.graph.n_nodes} nodes into {args.quantiles} classes, sizes {counts.tolist()}")


def cmd_stats(args, config, out, seed):
    bundle = read_bundle(bundle_path(args, config))
    report = stats_report(bundle.graph, bundle.table.y)
    store_json(report.to_dict(), os.path.join(out, 'stats.json'))
    log_stats_summary(report)
    print(report.table_row())


def cmd_spectral(args, config, out, seed):
    if args.published:
        rows = {name: bound_lambda(d, diam) for name, (d, diam, _) in PUBLISHED_GRAPHS.items()}
        for name, value in rows.items():
            print(f"{name:<12} {value:.4f}")
        store_json(rows, os.path.join(out, 'spectral.json'))
        return
    if args.bound_only:
        if args.dmax is None or args.diam is None:
            raise InputError("--bound-only needs --dmax and --diam")
        value = bound_lambda(args.dmax, args.diam)
        print(f"{value:.4f}")
        store_json({"d_max": args.dmax, "diam": args.diam, "bound_value": value}, os.path.join(out, 'spectral.json'))
        return
    bundle = read_bundle(bundle_path(args, config))
    report = spectral_report(bundle.graph, args.gamma, args.decay_length, args.diam, seed=seed)
    store_json(report.to_dict(), os.path.join(out, 'spectral.json'))
    print(f"lambda_N = {report.lambda_N.value:.6f}, lambda_N-1 = {report.lambda_N_minus_1.value:.6f}, "
          f"lambda_1 = {report.lambda_1.value:.6f}, bound = {report.bound_value}")


def _labeled_bundle(args, config):
    bundle = read_bundle(bundle_path(args, config))
    if bundle.table.y is None or bundle.table.split is None:
        raise InputError("Bundle has no labels or split; run the label command first")
    return bundle


def cmd_train(args, config, out, seed):
    bundle = _labeled_bundle(args, config)
    settings = train_config(config, seed)
    result = train(bundle.graph, bundle.table, settings)
    # Test accuracy of the restored best-validation parameters
    test_acc = evaluate(result.model, bundle.graph, bundle.table, bundle.table.split.test, settings)
    # Store checkpoint, history and metrics
    save_checkpoint(os.path.join(out, 'checkpoint.pt'), result.model, {"config": settings.to_dict()})
    store_history(result.history, os.path.join(out, 'history.csv'))
    store_json({"best_epoch": result.best_epoch, "val_acc": result.best_val_acc, "test_acc": test_acc},
               os.path.join(out, 'metrics.json'))
    log_training_summary(result.history, result.best_epoch)
    print(f"best epoch {result.best_epoch}: validation {result.best_val_acc:.4f}, test {test_acc:.4f}")


def cmd_experiment(args, config, out, seed):
    bundle = _labeled_bundle(args, config)
    table = run_experiment(bundle.graph, bundle.table, train_config(config, seed), args.architectures,
                           args.hop_grid, args.settings)
    table.to_csv(os.path.join(out, 'experiment.csv'), index=False)
    print(table.to_string(index=False))


def cmd_influence(args, config, out, seed):
    bundle = read_bundle(bundle_path(args, config))
    model, _ = load_checkpoint(args.checkpoint)
    section = config.get('Influence', {})
    # Command line wins over [Influence]; the radius defaults to the model depth
    hops = args.hops if args.hops is not None else int(section.get('hops', model.n_layers))
    samples = args.samples if args.samples is not None else int(section.get('samples', 2000))
    profile = receptive_field(model, bundle.graph, bundle.table.X, hops, samples, seed,
                              n_jobs=1 if args.threads == 1 else args.threads)
    profile.to_frame().to_csv(os.path.join(out, 'influence.csv'), index=False)
    store_json(profile.summary(), os.path.join(out, 'influence.json'))
    log_influence_summary(profile)
    print(f"R = {profile.R:.4f} over {profile.n_sampled} nodes ({profile.n_excluded} excluded)")


COMMANDS = {
    'ingest': cmd_ingest,
    'generate': cmd_generate,
    'label': cmd_label,
    'stats': cmd_stats,
    'spectral': cmd_spectral,
    'train': cmd_train,
    'experiment': cmd_experiment,
    'influence': cmd_influence,
}


def run(argv=None):
    """
    Run one subcommand and return its exit code: 0 ok, 1 internal error, 2 input error.
    """
    try:
        # Step 1: Parse command line arguments
        args = parse_arguments(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        # Step 2: Read the configuration file
        config = read_config_file(args.config) if args.config else {}
        # Step 3: Create results directory (the bundle itself for label)
        results_dir = create_results_dir(args, config)
        if args.command == 'label' and not args.out:
            results_dir = bundle_path(args, config)
        # Step 4: Set up logging
        log_name = config.get('IO', {}).get('logName', f'{args.command}.log')
        setup_logging(results_dir, log_name)
        torch.set_num_threads(max(1, args.threads))
        # Step 5: Resolve the seed and record everything needed to rerun
        seed = resolve_seed(args, config)
        write_manifest(results_dir, args.command, vars(args), config, seed)
        logger.info(f"Running {args.command} (toolkit {__version__}, seed {seed})")
        # Step 6: Run the subcommand
        COMMANDS[args.command](args, config, results_dir, seed)
    except (InputError, DomainError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except LongRangeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception("Internal error")
        print(f"Internal error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    """
    Main script of the toolkit.

    Each subcommand writes its reports and a manifest.json into the results directory.
    """
    sys.exit(run())
