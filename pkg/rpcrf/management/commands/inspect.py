import json
import logging

from rpcrf.management.base import RPCRFCommand, load_pattern_set, rpcrf_setting
from rpcrf.pattern_machine import build_pattern_machine, worst_case_size

logger = logging.getLogger(__name__)


class Command(RPCRFCommand):
    help = 'Print pattern machine statistics: states, arcs and per-pattern automaton sizes'
    command_name = 'inspect'

    def add_run_arguments(self, parser):
        parser.add_argument('--patterns', required=True, help='Pattern file')
        parser.add_argument('--json', action='store_true', default=None, help='Print the statistics as JSON')
        parser.add_argument('--max-states', type=int, help='Product machine state cap')

    def option_defaults(self):
        return {
            'patterns': None,
            'json': False,
            'max_states': rpcrf_setting('MAX_PRODUCT_STATES'),
        }

    def run(self, config):
        pattern_set = load_pattern_set(config['patterns'])
        machine = build_pattern_machine(pattern_set, config['max_states'])
        stats = {
            'alphabet': pattern_set.alphabet.declaration(),
            'states': machine.state_count,
            'arcs': machine.arc_count,
            'worst_case_states': worst_case_size(pattern_set),
            'patterns': [
                {
                    'id': pattern.pattern_id,
                    'pattern': pattern.text,
                    'core_states': pattern.core_size,
                    'suffix_states': pattern.dfa.state_count,
                    'end_anchored': pattern.anchored_end,
                }
                for pattern in pattern_set.patterns
            ],
        }
        if config['json']:
            self.stdout.write(json.dumps(stats, indent=2, sort_keys=True))
            return stats

        self.stdout.write(f"alphabet: {stats['alphabet']}")
        self.stdout.write(f"states: {stats['states']}")
        self.stdout.write(f"arcs: {stats['arcs']}")
        self.stdout.write(f"worst-case states: {stats['worst_case_states']}")
        for entry in stats['patterns']:
            anchor = ' (end-anchored)' if entry['end_anchored'] else ''
            self.stdout.write(f"  L{entry['id']} {entry['pattern']}: core {entry['core_states']} states, "
                              f"suffix automaton {entry['suffix_states']} states{anchor}")
        return stats
