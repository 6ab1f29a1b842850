import logging
import os
import yaml
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional
from repair_agent.errors import ConfigError
log = logging.getLogger(__name__)


ENV_PREFIX = 'REPAIR_AGENT_'

DEFAULT_EXCLUDE_DIRS = [
    '.git', '.hg', '.svn', '__pycache__', '.mypy_cache', '.pytest_cache', '.tox',
    '.venv', 'venv', 'node_modules', 'build', 'dist',
]

DEFAULTS: Dict[str, Any] = {
    'repo': None,
    'languages': ['go', 'python'],
    'workers': 4,
    'exclude_dirs': DEFAULT_EXCLUDE_DIRS,
    'grep_cap': 200,
    'context_lines': 3,
    'fuzzy_threshold': 0.8,
    'nearby_radius': 3,
    'n_candidates': 4,
    'navigator_backend': 'stub',
    'lsp_commands': {'python': ['pylsp'], 'go': ['gopls']},
    'diagnostics_timeout': 30.0,
    'provider_endpoint': None,
    'provider_model': 'gpt-4o',
    'provider_api_key_env': 'REPAIR_AGENT_API_KEY',
    'provider_timeout': 120.0,
    'provider_max_attempts': 4,
    'provider_delay': 2.0,
    'replay_script': None,
    'sandbox_runner': 'subprocess',
    'sandbox_confinement': 'auto',
    'container_image': 'python:3.11-slim',
    'container_runtime': 'docker',
    'command_timeout': 120.0,
    'output_cap': 1024 * 1024,
    'memory_limit': None,
    'network': False,
    'interpreter': ['python3'],
    'max_iterations': 10,
    'max_resets': 1,
    'max_tokens': 400000,
    'wall_clock': 3600.0,
    'max_snippets': 12,
    'test_commands': [],
    'trace_path': None,
}

# Types of the fields whose default is None.
FIELD_TYPES: Dict[str, tuple] = {
    'repo': (str, Path),
    'memory_limit': (int,),
    'provider_endpoint': (str,),
    'replay_script': (str, Path),
    'trace_path': (str, Path),
}


def _types_of(default: Any) -> Optional[tuple]:
    if isinstance(default, bool):
        return (bool,)
    if isinstance(default, int):
        return (int,)
    if isinstance(default, float):
        return (int, float)
    if isinstance(default, (list, tuple)):
        return (list, tuple)
    if isinstance(default, dict):
        return (dict,)
    if isinstance(default, str):
        return (str,)
    return None



class RunConfig:
    """
    All tunables of a repair run.

    Values are layered with the precedence flags > environment > config file > defaults; see
    `load_config`.  Environment variables are named `REPAIR_AGENT_<FIELD>` (upper case), e.g.
    `REPAIR_AGENT_SANDBOX_RUNNER=container`.  List values in the environment are comma-separated.

    Attributes:
        repo (Path):
            Repository to index or repair.

        languages (List[str]):
            Language tags handed to the extractors, e.g. `['go', 'python']`.

        fuzzy_threshold (float):
            Minimum mean per-line similarity accepted by fuzzy matching.  Range (0, 1].

        nearby_radius (int):
            Line radius of the NearbyLine tier of position resolution.  Range [0, inf).

        n_candidates (int):
            Number of candidate edit sets requested by the static route.  Range [1, inf).

        replay_script (Path):
            If set, completions are replayed from this file and no network is used.

        sandbox_runner (str):
            Either `subprocess` (restricted subprocess in a temp copy) or `container`.

        max_iterations (int):
            Programmer/Tester iterations of the dynamic route.

        max_resets (int):
            Repository resets the Programmer may request per run.

        max_tokens (int):
            Approximate token budget for all completions of one task.

        wall_clock (float):
            Global time ceiling for one task, in seconds.

    Note:
        The remaining attributes are listed in `DEFAULTS` and documented in `docs/cli.md`.
    """

    def __init__(self, **args):
        unknown = set(args) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f'Unknown configuration key(s):  {sorted(unknown)}.')
        for key, default in DEFAULTS.items():
            value = args.get(key)
            setattr(self, key, default if value is None else value)
        self._check_types()
        self.repo: Optional[Path] = Path(self.repo) if self.repo is not None else None
        self.replay_script: Optional[Path] = Path(self.replay_script) if self.replay_script else None
        self.trace_path: Optional[Path] = Path(self.trace_path) if self.trace_path else None
        self.languages: List[str] = [x.lower() for x in self.languages]
        self._validate()

    def __repr__(self):
        return f'RunConfig({self.as_dict()})'

    def as_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in DEFAULTS}

    @property
    def replay_mode(self) -> bool:
        return self.replay_script is not None

    def _check_types(self):
        for key, default in DEFAULTS.items():
            value = getattr(self, key)
            expected = FIELD_TYPES.get(key) or _types_of(default)
            if value is None or expected is None:
                continue
            if not isinstance(value, expected) or (isinstance(value, bool) and bool not in expected):
                names = ' or '.join(x.__name__ for x in expected)
                raise ConfigError(f'Invalid configuration:  {key} must be {names}, got {type(value).__name__} {value!r}.')

    def _validate(self):
        checks = [
            (0 < self.fuzzy_threshold <= 1, 'fuzzy_threshold must be in (0, 1]'),
            (self.nearby_radius >= 0, 'nearby_radius must be >= 0'),
            (self.n_candidates >= 1, 'n_candidates must be >= 1'),
            (self.max_iterations >= 1, 'max_iterations must be >= 1'),
            (self.max_resets >= 0, 'max_resets must be >= 0'),
            (self.max_tokens > 0, 'max_tokens must be > 0'),
            (self.wall_clock > 0, 'wall_clock must be > 0'),
            (self.command_timeout > 0, 'command_timeout must be > 0'),
            (self.output_cap > 0, 'output_cap must be > 0'),
            (self.grep_cap > 0, 'grep_cap must be > 0'),
            (self.context_lines >= 0, 'context_lines must be >= 0'),
            (self.workers >= 1, 'workers must be >= 1'),
            (self.sandbox_runner in ('subprocess', 'container'), 'sandbox_runner must be subprocess or container'),
            (self.sandbox_confinement in ('auto', 'bwrap', 'landlock', 'none'), 'sandbox_confinement must be auto, bwrap, landlock or none'),
            (self.memory_limit is None or self.memory_limit > 0, 'memory_limit must be > 0'),
            (self.navigator_backend in ('stub', 'lsp'), 'navigator_backend must be stub or lsp'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(f'Invalid configuration:  {message}.')


def load_config(path: Path = None, environ: Mapping[str, str] = None, **flags) -> RunConfig:
    """
    Builds a `RunConfig` from defaults, a YAML file, the environment and explicit flags.

    Args:
        path (Path):
            Optional YAML config file.  Keys are `RunConfig` field names.

        environ (Mapping[str, str]):
            Environment to read `REPAIR_AGENT_*` overrides from.  Defaults to `os.environ`.

        flags:
            Explicit overrides, e.g. from the command line.  `None` values are ignored.

    Returns:
        RunConfig:  The layered configuration.
    """

    # Config file.
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f'Config file not found:  {path}.')
        with open(path, 'r') as file:
            content = yaml.safe_load(file) or {}
        if not isinstance(content, dict):
            raise ConfigError(f'Config file must contain a mapping:  {path}.')
        values.update(content)
        log.debug(f'Loaded config file:  {path}.')

    # Environment.
    environ = os.environ if environ is None else environ
    for key, default in DEFAULTS.items():
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _coerce(key, raw, default)

    # Flags.
    values.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig(**values)


def _coerce(key: str, raw: str, default: Any) -> Any:
    """Converts an environment string to the type of the field's default."""
    try:
        if key == 'memory_limit':
            return int(raw)
        if isinstance(default, bool):
            return raw.strip().lower() in ('1', 'true', 'yes', 'on')
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            return [x.strip() for x in raw.split(',') if x.strip()]
        if isinstance(default, dict):
            return yaml.safe_load(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f'Invalid value for {ENV_PREFIX + key.upper()}:  {raw!r}.') from e


def get_log_config(level: str = 'INFO', path: Path = None) -> Dict:
    """Returns a `logging.config.dictConfig` dictionary for the `repair_agent` logger."""
    config = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'standard': {
                'class': 'logging.Formatter',
                'format': '%(asctime)s %(levelname)-8s %(module)-15s %(funcName)-20s %(message)s',
            },
        },
        'handlers': {
            'console': {
                'class': 'logging.StreamHandler',
                'formatter': 'standard',
                'stream': 'ext://sys.stderr',
            },
        },
        'loggers': {
            'repair_agent': {
                'level': level,
                'handlers': ['console'],
            },
        },
    }
    if path is not None:
        config['handlers']['file'] = {
            'class': 'logging.FileHandler',
            'formatter': 'standard',
            'filename': str(path),
            'mode': 'w',
        }
        config['loggers']['repair_agent']['handlers'].append('file')
    return config
