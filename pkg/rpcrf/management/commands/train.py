import logging
from pathlib import Path

from django.core.management.base import CommandError

from rpcrf.crf import TrainConfig, train
from rpcrf.exceptions import EXIT_USAGE
from rpcrf.management.base import RPCRFCommand, load_pattern_set, rpcrf_setting
from rpcrf.pattern_machine import build_pattern_machine
from rpcrf.potentials import FeatureConfig, RPCRFModel, save_model
from rpcrf.storage import file_sha256, write_json
from rpcrf.synthdata import read_dataset

logger = logging.getLogger(__name__)


def int_list(value):
    """Accept "1,2" from the command line or a JSON list from a config file"""
    if value is None:
        return None
    if isinstance(value, str):
        try:
            return [int(part) for part in value.split(',') if part.strip()]
        except ValueError:
            raise CommandError(f"expected a comma-separated list of integers, got {value!r}",
                               returncode=EXIT_USAGE)
    return [int(part) for part in value]


class Command(RPCRFCommand):
    help = 'Train a pattern CRF; an alphabet-only pattern file trains the plain linear-chain CRF'
    command_name = 'train'

    def add_run_arguments(self, parser):
        parser.add_argument('--patterns', required=True, help='Pattern file')
        parser.add_argument('--data', required=True, help='Training dataset (JSONL, optionally gzipped)')
        parser.add_argument('--model-out', required=True, help='Model JSON to write')
        parser.add_argument('--metrics-out', help='Metrics JSON (default: metrics.json next to the model)')
        parser.add_argument('--l2', type=float)
        parser.add_argument('--learning-rate', type=float)
        parser.add_argument('--max-epochs', type=int)
        parser.add_argument('--tolerance', type=float)
        parser.add_argument('--batch-size', type=int, help='Mini-batch size (default: full batch)')
        parser.add_argument('--shuffle-seed', type=int)
        parser.add_argument('--init-scale', type=float, help='Uniform random initialization half-width')
        parser.add_argument('--init-seed', type=int)
        parser.add_argument('--window-radius', type=int, help='Emission window radius (0-4)')
        parser.add_argument('--anchor-positions', help='Comma-separated 1-based input positions')
        parser.add_argument('--position-buckets', help='Comma-separated ascending bucket boundaries')
        parser.add_argument('--max-states', type=int, help='Product machine state cap')

    def option_defaults(self):
        return {
            'patterns': None,
            'data': None,
            'model_out': None,
            'metrics_out': None,
            'l2': rpcrf_setting('L2'),
            'learning_rate': rpcrf_setting('LEARNING_RATE'),
            'max_epochs': rpcrf_setting('MAX_EPOCHS'),
            'tolerance': rpcrf_setting('TOLERANCE'),
            'batch_size': None,
            'shuffle_seed': 0,
            'init_scale': 0.0,
            'init_seed': 0,
            'window_radius': rpcrf_setting('WINDOW_RADIUS'),
            'anchor_positions': list(rpcrf_setting('ANCHOR_POSITIONS')),
            'position_buckets': None,
            'max_states': rpcrf_setting('MAX_PRODUCT_STATES'),
        }

    def output_dir(self, config):
        return Path(config['model_out']).parent

    def run(self, config):
        pattern_set = load_pattern_set(config['patterns'])
        machine = build_pattern_machine(pattern_set, config['max_states'])
        header, examples = read_dataset(config['data'], pattern_set.alphabet)

        buckets = int_list(config['position_buckets'])
        config.options['anchor_positions'] = int_list(config['anchor_positions'])
        config.options['position_buckets'] = buckets
        feature_config = FeatureConfig(emission_window_radius=config['window_radius'],
                                       global_anchor_positions=tuple(config['anchor_positions']),
                                       pattern_position_buckets=tuple(buckets) if buckets else None)
        train_config = TrainConfig(learning_rate=config['learning_rate'], max_epochs=config['max_epochs'],
                                   tolerance=config['tolerance'], l2=config['l2'],
                                   batch_size=config['batch_size'], shuffle_seed=config['shuffle_seed'],
                                   init_scale=config['init_scale'], init_seed=config['init_seed'])
        result = train(machine, feature_config, examples, train_config)

        model = RPCRFModel(params=result.params, config=result.config, machine=machine)
        save_model(config['model_out'], model)
        metrics = {
            'patterns': list(pattern_set.texts),
            'machine_states': machine.state_count,
            'machine_arcs': machine.arc_count,
            'examples': len(examples),
            'dataset_sha256': file_sha256(config['data']),
            'seed': (header or {}).get('seed'),
            'task': (header or {}).get('task'),
            'epochs': result.epochs,
            'converged': result.converged,
            'final_nll': result.final_nll,
            'nll_trace': result.nll_trace,
        }
        metrics_path = config['metrics_out'] or Path(config['model_out']).parent / 'metrics.json'
        write_json(metrics_path, metrics)

        self.stdout.write(self.style.SUCCESS(
            f"Trained on {len(examples)} examples in {result.epochs} epochs "
            f"(converged={result.converged}); objective {result.final_nll:.4f}; model written to {config['model_out']}"))
        return {**metrics, 'timing': {'training_seconds': round(result.wall_clock, 3)}}
