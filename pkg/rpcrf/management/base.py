"""
Shared plumbing for the rpcrf management commands

Resolves options (command line > --config file > settings > defaults), writes
run_config.json and timing.json next to the outputs, keeps a best-effort
RunRecord ledger entry and turns library errors into exit codes.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from ..exceptions import EXIT_DATA, EXIT_USAGE, RPCRFError
from ..pattern_machine import PatternSet
from ..patterns import parse_pattern_file
from ..storage import read_json, write_json

logger = logging.getLogger(__name__)

RUN_CONFIG_FILE = 'run_config.json'
TIMING_FILE = 'timing.json'


@dataclass
class RunConfig:
    """Fully resolved options of one command run"""
    command: str
    options: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.options[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)

    def to_dict(self) -> Dict:
        return {'command': self.command, 'options': dict(self.options)}

    def write(self, directory: Path):
        write_json(Path(directory) / RUN_CONFIG_FILE, self.to_dict())


def rpcrf_setting(name: str) -> Any:
    return settings.RPCRF[name]


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, tuple):
        return list(value)
    return value


class RPCRFCommand(BaseCommand):
    """
    Base class for commands that produce reproducible run outputs

    Subclasses declare `option_defaults()` (option name -> default used when
    neither the command line nor the config file sets it) and implement
    `run(config)`, returning a metrics dict for the ledger.
    """
    command_name = ''

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser_exit = parser.exit

        # argparse exits with 2 on bad arguments; 2 is the data-error code here
        def exit_with_usage_code(status=0, message=None):
            parser_exit(EXIT_USAGE if status else status, message)

        parser.exit = exit_with_usage_code
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file of option values; command-line flags override it')
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        raise NotImplementedError

    def option_defaults(self) -> Dict[str, Any]:
        return {}

    def output_dir(self, config: RunConfig) -> Optional[Path]:
        """Directory receiving run_config.json and timing.json, if the run writes files"""
        return None

    def run(self, config: RunConfig) -> Dict:
        raise NotImplementedError

    def resolve_config(self, options: Dict[str, Any]) -> RunConfig:
        defaults = self.option_defaults()
        from_file: Dict[str, Any] = {}
        if options.get('config'):
            try:
                from_file = read_json(options['config'])
            except (OSError, RPCRFError) as e:
                raise CommandError(f"cannot read config file: {e}", returncode=EXIT_USAGE)
            if not isinstance(from_file, dict):
                raise CommandError("config file must hold a JSON object", returncode=EXIT_USAGE)
            unknown = sorted(set(from_file) - set(defaults))
            if unknown:
                raise CommandError(f"unknown options in config file: {', '.join(unknown)}",
                                   returncode=EXIT_USAGE)
        resolved = {}
        for name, default in defaults.items():
            value = options.get(name)
            if value is None:
                value = from_file.get(name, default)
            resolved[name] = _jsonable(value)
        return RunConfig(command=self.command_name, options=resolved)

    def handle(self, *args, **options):
        start_time = time.time()
        config = self.resolve_config(options)
        logger.info(f"Running {self.command_name} with {config.options}")
        record = self._record_start(config)
        try:
            metrics = self.run(config) or {}
        except RPCRFError as e:
            self._fail(record, e, start_time)
            raise CommandError(str(e), returncode=e.exit_code)
        except OSError as e:
            self._fail(record, e, start_time)
            raise CommandError(f"{e.strerror or e}: {e.filename}", returncode=EXIT_DATA)
        except CommandError as e:
            self._fail(record, e, start_time)
            raise

        execution_time = time.time() - start_time
        directory = self.output_dir(config)
        if directory is not None:
            config.write(directory)
            write_json(Path(directory) / TIMING_FILE, {
                'command': self.command_name,
                'wall_clock_seconds': round(execution_time, 3),
                **metrics.pop('timing', {}),
            })
        else:
            metrics.pop('timing', None)
        self._record_finish(record, 'completed', metrics=metrics, execution_time=execution_time,
                            output_dir=str(directory or ''))
        logger.info(f"{self.command_name} completed in {execution_time:.2f}s")

    def _fail(self, record, error: Exception, start_time: float):
        logger.error(f"Error running {self.command_name}: {str(error)}")
        self._record_finish(record, 'failed', error_message=str(error),
                            execution_time=time.time() - start_time)

    def _record_start(self, config: RunConfig):
        from ..models import RunRecord

        try:
            return RunRecord.objects.create(command=self.command_name, parameters=config.options,
                                            status='initiated')
        except DatabaseError as e:
            logger.warning(f"Run ledger unavailable ({e}); run `manage.py migrate` to enable it")
            return None

    def _record_finish(self, record, status: str, **fields):
        if record is None:
            return
        record.status = status
        for name, value in fields.items():
            setattr(record, name, value)
        try:
            record.save()
        except DatabaseError as e:
            logger.warning(f"Could not update run record {record.pk}: {e}")


def load_pattern_set(path) -> PatternSet:
    """Read and compile a pattern file"""
    with open(path, 'r', encoding='utf-8') as handle:
        alphabet, texts = parse_pattern_file(handle.read())
    logger.info(f"Loaded {len(texts)} patterns over {alphabet.declaration()!r} from {path}")
    return PatternSet.from_texts(texts, alphabet)
