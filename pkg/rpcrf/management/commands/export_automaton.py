import logging
from pathlib import Path

from django.core.management.base import CommandError

from rpcrf.automata import dfa_to_dot
from rpcrf.exceptions import EXIT_USAGE
from rpcrf.management.base import RPCRFCommand, load_pattern_set, rpcrf_setting
from rpcrf.pattern_machine import build_pattern_machine
from rpcrf.storage import atomic_write_text

logger = logging.getLogger(__name__)


class Command(RPCRFCommand):
    help = 'Write the pattern machine (or one pattern automaton) as Graphviz DOT'
    command_name = 'export_automaton'

    def add_run_arguments(self, parser):
        parser.add_argument('--patterns', required=True, help='Pattern file')
        parser.add_argument('--dot-out', required=True, help='DOT file to write')
        parser.add_argument('--component', type=int,
                            help='Export only the suffix automaton of this pattern id')
        parser.add_argument('--max-states', type=int, help='Product machine state cap')

    def option_defaults(self):
        return {
            'patterns': None,
            'dot_out': None,
            'component': None,
            'max_states': rpcrf_setting('MAX_PRODUCT_STATES'),
        }

    def output_dir(self, config):
        return Path(config['dot_out']).parent

    def run(self, config):
        pattern_set = load_pattern_set(config['patterns'])
        component = config['component']
        if component is not None:
            if not 0 <= component < len(pattern_set):
                raise CommandError(f"--component must be in 0..{len(pattern_set) - 1}", returncode=EXIT_USAGE)
            pattern = pattern_set.patterns[component]
            dot = dfa_to_dot(pattern.dfa, pattern_set.alphabet, name=f"L{component}")
            states = pattern.dfa.state_count
        else:
            machine = build_pattern_machine(pattern_set, config['max_states'])
            dot = machine.to_dot()
            states = machine.state_count
        atomic_write_text(config['dot_out'], dot)
        self.stdout.write(self.style.SUCCESS(f"Wrote {states}-state automaton to {config['dot_out']}"))
        return {'states': states}
