import logging
from pathlib import Path

from rpcrf import synthdata
from rpcrf.management.base import RPCRFCommand, rpcrf_setting
from rpcrf.storage import atomic_write_text

logger = logging.getLogger(__name__)


class Command(RPCRFCommand):
    help = 'Generate train/test data and pattern files for a synthetic task'
    command_name = 'generate'

    def add_run_arguments(self, parser):
        parser.add_argument('--task', choices=synthdata.TASKS, required=True)
        parser.add_argument('--seed', type=int, help='Default: 1, 2 or 3 per task')
        parser.add_argument('--train-size', type=int)
        parser.add_argument('--test-size', type=int)
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--gzip', action='store_true', default=None, help='Write .jsonl.gz files')

    def option_defaults(self):
        return {
            'task': None,
            'seed': None,
            'train_size': rpcrf_setting('TRAIN_SIZE'),
            'test_size': rpcrf_setting('TEST_SIZE'),
            'out': None,
            'gzip': False,
        }

    def output_dir(self, config):
        return Path(config['out'])

    def run(self, config):
        spec = synthdata.TaskSpec(task=config['task'], train_size=config['train_size'],
                                  test_size=config['test_size'], seed=config['seed'])
        config.options['seed'] = spec.seed
        out = Path(config['out'])
        dataset = synthdata.generate(spec)
        suffix = '.jsonl.gz' if config['gzip'] else '.jsonl'
        for split in (synthdata.TRAIN_SPLIT, synthdata.TEST_SPLIT):
            synthdata.write_dataset(out / f"{split}{suffix}", dataset.split(split), header=spec.header(split))
        atomic_write_text(out / 'patterns.txt', synthdata.standard_patterns(spec.task))
        atomic_write_text(out / 'baseline.txt', synthdata.baseline_patterns(spec.task))

        self.stdout.write(self.style.SUCCESS(
            f"Wrote {spec.task} data to {out}: {spec.train_size} train, {spec.test_size} test (seed {spec.seed})"))
        return {'task': spec.task, 'seed': spec.seed, 'train_size': spec.train_size, 'test_size': spec.test_size}
