import logging
import threading
from pathlib import Path
from typing import Callable, Dict, List, Union
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.config import DEFAULTS, RunConfig
from repair_agent.errors import BackendUnavailable, PositionOutOfRange
from repair_agent.navigator.backends import NavigationBackend, NavigationKind, StubBackend
from repair_agent.navigator.checks import Diagnostic
from repair_agent.navigator.lsp import LspBackend
from repair_agent.navigator.positions import Location, PositionHint, ResolvedPosition, Tier, resolve_position
log = logging.getLogger(__name__)



class Navigator:
    """
    One navigation session over a workspace.

    Attributes:
        backends (List[NavigationBackend]):
            Backends tried in order; the first that supports a file's language serves it.

        radius (int):
            Line radius of the NearbyLine tier.

        observer (Callable[[Tier], None]):
            Optional callback receiving every attempted positioning tier.

    Note:
        Requests within a session are serialized.  Separate workspaces use separate navigators.
    """

    def __init__(self, **args):
        backends = args.get('backends', args.get('backend'))
        self.backends: List[NavigationBackend] = list(backends) if isinstance(backends, (list, tuple)) else [backends]
        self.radius: int = args.get('radius', DEFAULTS['nearby_radius'])
        self.observer: Callable[[Tier], None] = args.get('observer')
        self._lock = threading.RLock()
        log.info(f'Constructed new Navigator!  backends = {[type(x).__name__ for x in self.backends]}, radius = {self.radius}')

    def backend_for(self, path: str) -> NavigationBackend:
        for backend in self.backends:
            if backend is not None and backend.supports(path):
                return backend
        raise BackendUnavailable(f'No navigation backend registered for:  {path}.')

    def snapshot(self, paths) -> Dict[str, str]:
        """Current text of the given files as the backends see them; unreadable files are left out."""
        result = {}
        for path in dict.fromkeys(paths):
            backend = next((x for x in self.backends if x is not None and x.supports(path)), self.backends[0])
            try:
                result[path] = backend.read(path)
            except PositionOutOfRange:
                log.debug(f'Not in workspace:  {path}.')
        return result

    def resolve_position(self, hint: PositionHint) -> ResolvedPosition:
        with self._lock:
            snapshot = self.snapshot([hint.path, *hint.opened_files])
            return resolve_position(hint, snapshot, self.radius, self.observer)

    def navigate(self, kind: Union[NavigationKind, str], pos: ResolvedPosition) -> List[Location]:
        """
        Jumps from a resolved position to definitions or references.

        Returns:
            List[Location]:  Sorted by (path, line, column).  Empty for positions without an
            identifier, e.g. literals.
        """
        kind = NavigationKind(kind)
        with self._lock:
            backend = self.backend_for(pos.path)
            log.debug(f'Navigating:  {kind.value} from {pos.path}:{pos.line}:{pos.column}.')
            if kind == NavigationKind.DEFINITION:
                return backend.definition(pos)
            return backend.references(pos)

    def collect_diagnostics(self, path: str, content: str) -> List[Diagnostic]:
        """Diagnoses unsaved `content` as if it were the file at `path`; nothing is written."""
        with self._lock:
            return self.backend_for(path).diagnostics(path, content)

    def close(self):
        for backend in self.backends:
            if backend is not None:
                backend.close()


def create_navigator(config: RunConfig, root: Path, graph: KnowledgeGraph = None) -> Navigator:
    """Builds the navigator chosen by `navigator_backend`:  the stub, or language servers with the stub as fallback."""
    stub = StubBackend(graph=graph, root=root)
    if config.navigator_backend == 'stub':
        return Navigator(backend=stub, radius=config.nearby_radius)
    backends = []
    for language in config.languages:
        command = config.lsp_commands.get(language)
        if not command:
            continue
        try:
            backend = LspBackend(command=command, root=root, timeout=config.diagnostics_timeout, languages=[language])
        except BackendUnavailable as e:
            log.warning(f'Falling back to the stub backend for {language}:  {e}')
            continue
        backends.append(backend)
    return Navigator(backends=backends + [stub], radius=config.nearby_radius)

