import logging
from pathlib import Path

from rpcrf import synthdata
from rpcrf.crf import decode
from rpcrf.management.base import RPCRFCommand, rpcrf_setting
from rpcrf.potentials import load_model
from rpcrf.storage import file_sha256, write_json, write_jsonl

logger = logging.getLogger(__name__)


class Command(RPCRFCommand):
    help = 'Decode a dataset with a trained model and report exact-match accuracy'
    command_name = 'eval'

    def add_run_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Model JSON written by train')
        parser.add_argument('--data', required=True, help='Evaluation dataset (JSONL, optionally gzipped)')
        parser.add_argument('--task', choices=synthdata.TASKS,
                            help='Task for the optimal-strategy ratio (default: from the dataset header)')
        parser.add_argument('--predictions-out', help='JSONL of x, y and predicted y_hat')
        parser.add_argument('--metrics-out', help='Metrics JSON')
        parser.add_argument('--show', type=int, help='Print the first N predictions')
        parser.add_argument('--max-states', type=int, help='Product machine state cap')

    def option_defaults(self):
        return {
            'model': None,
            'data': None,
            'task': None,
            'predictions_out': None,
            'metrics_out': None,
            'show': 0,
            'max_states': rpcrf_setting('MAX_PRODUCT_STATES'),
        }

    def output_dir(self, config):
        if config['metrics_out']:
            return Path(config['metrics_out']).parent
        if config['predictions_out']:
            return Path(config['predictions_out']).parent
        return None

    def run(self, config):
        model = load_model(config['model'], max_states=config['max_states'])
        header, examples = synthdata.read_dataset(config['data'], model.machine.alphabet)

        # duplicate inputs decode identically
        decoded = {}
        predictions = []
        for example in examples:
            if example.x not in decoded:
                decoded[example.x] = decode(model.machine, model.params, model.config, example.x)
            predictions.append(decoded[example.x])
        golds = [example.y for example in examples]

        task = config['task'] or (header or {}).get('task')
        metrics = {
            'examples': len(examples),
            'exact_match': synthdata.exact_match_accuracy(predictions, golds),
            'token_accuracy': synthdata.token_accuracy(predictions, golds),
            'dataset_sha256': file_sha256(config['data']),
            'task': task,
        }
        if task in synthdata.TASKS:
            optimal = float(synthdata.optimal_accuracy(task))
            metrics['optimal'] = optimal
            metrics['ratio_to_optimal'] = metrics['exact_match'] / optimal
            metrics['expected_exact_match'] = float(synthdata.expected_accuracy(
                task, lambda x: decoded.get(x) or decode(model.machine, model.params, model.config, x)))
        else:
            logger.warning("No task given or found in the dataset header; skipping the optimal-strategy ratio")

        if config['predictions_out']:
            write_jsonl(config['predictions_out'],
                        ({'x': e.x, 'y': e.y, 'y_hat': p} for e, p in zip(examples, predictions)))
        if config['metrics_out']:
            write_json(config['metrics_out'], metrics)

        self._show(examples, predictions, config['show'] or 0, task)
        summary = f"Exact match {100 * metrics['exact_match']:.2f}% on {len(examples)} examples"
        if 'optimal' in metrics:
            summary += (f" (optimal {100 * metrics['optimal']:.2f}%, "
                        f"{100 * metrics['ratio_to_optimal']:.2f}% of optimal, "
                        f"{100 * metrics['expected_exact_match']:.2f}% over the task distribution)")
        summary += f"; token accuracy {100 * metrics['token_accuracy']:.2f}%"
        self.stdout.write(self.style.SUCCESS(summary))
        return metrics

    def _show(self, examples, predictions, count, task):
        for example, predicted in list(zip(examples, predictions))[:count]:
            mark = 'ok' if predicted == example.y else 'WRONG'
            if task == synthdata.BATTLESHIP:
                rows = zip(synthdata.render_grid(example.x).splitlines(),
                           synthdata.render_grid(example.y).splitlines(),
                           synthdata.render_grid(predicted).splitlines())
                self.stdout.write(f"x      y      y_hat  [{mark}]")
                for row in rows:
                    self.stdout.write('  '.join(row))
                self.stdout.write('')
            else:
                self.stdout.write(f"{example.x}  {example.y}  {predicted}  [{mark}]")
