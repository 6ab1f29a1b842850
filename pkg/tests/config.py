from pathlib import Path



class Config:
    """Test configuration."""

    def __init__(self):
        self.log = self._get_log()
        self.paths = ConfigPaths()
        self.seed = 20240601
        self.confinement = 'none'

    def _get_log(self):
        return {
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
                },
                'file': {
                    'class': 'logging.FileHandler',
                    'formatter': 'standard',
                    'filename': None,
                    'mode': 'w',
                },
            },
            'loggers': {
                'repair_agent': {
                    'level': 'DEBUG',
                    'handlers': ['console', 'file'],
                },
            },
        }



class ConfigPaths:

    def __init__(self):
        self.repo = Path(__file__).absolute().parents[1]
        self.package = self.repo / 'repair_agent'
        self.resources = self.repo / 'tests' / 'data' / 'resources'
        self.listing = self.resources / 'repos' / 'listing'
        self.listing_single = self.resources / 'repos' / 'listing_single'
        self.python_calls = self.resources / 'repos' / 'python_calls'
        self.finder = self.resources / 'repos' / 'finder'
        self.example = self.resources / 'repos' / 'example'
        self.seeded_bug = self.resources / 'repos' / 'seeded_bug'
        self.edits = self.resources / 'edits'
        self.issues = self.resources / 'issues'
        self.replay = self.resources / 'replay'
        self.logs = self.repo / 'tests' / 'data' / 'temp' / 'logs'



config = Config()
