import logging
import logging.config
import pytest
import sys
from pathlib import Path

# Hack Python path.
path_repo = Path(__file__).absolute().parents[1]
if str(path_repo) not in sys.path:
    sys.path.insert(0, str(path_repo))

from repair_agent.ckg.builder import build_graph
from repair_agent.config import RunConfig
from repair_agent.navigator.backends import StubBackend
from repair_agent.navigator.navigator import Navigator
from repair_agent.sandbox.confinement import available_confinement
from repair_agent.sandbox.runners import SubprocessRunner
from repair_agent.sandbox.workspace import Workspace
from tests.config import config
log = logging.getLogger('repair_agent.conftest')

# Sandbox tests run confined wherever the host allows it.
config.confinement = available_confinement() or 'none'



@pytest.fixture(scope='session', autouse=True)
def log_file(worker_id):
    log_path = config.paths.logs / 'log{}.log'.format(_get_worker_suffix(worker_id))
    log_path.parent.mkdir(parents=True, exist_ok=True)
    config.log['handlers']['file']['filename'] = log_path
    logging.config.dictConfig(config.log)
    log.info('worker_id = {0}'.format(worker_id))


@pytest.fixture(scope='session')
def listing_graph():
    return build_graph(config.paths.listing, ['go'])


@pytest.fixture(scope='session')
def python_calls_graph():
    return build_graph(config.paths.python_calls, ['python'])


@pytest.fixture
def listing_navigator(listing_graph):
    navigator = Navigator(backend=StubBackend(graph=listing_graph, root=config.paths.listing))
    yield navigator
    navigator.close()


@pytest.fixture
def run_config(tmp_path):
    return RunConfig(workers=2, command_timeout=30.0, wall_clock=600.0, interpreter=[sys.executable], sandbox_confinement=config.confinement)


@pytest.fixture
def runner():
    return SubprocessRunner(confinement=config.confinement)


@pytest.fixture
def seeded_workspace(tmp_path):
    with Workspace(source=config.paths.seeded_bug, parent=tmp_path) as workspace:
        yield workspace


def _get_worker_suffix(worker_id):
    return '' if worker_id == 'master' else '_' + worker_id[-1]
