import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional
from repair_agent.ckg.entities import EntityKind, RelationKind
from repair_agent.ckg.extractors import extractor_for_path
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.errors import BackendUnavailable, PositionOutOfRange
from repair_agent.navigator.checks import Diagnostic, stub_diagnostics
from repair_agent.navigator.positions import Location, ResolvedPosition, identifier_tokens
log = logging.getLogger(__name__)



class NavigationKind(str, Enum):
    DEFINITION = 'Definition'
    REFERENCES = 'References'


class NavigationBackend:
    """
    Language intelligence behind the navigator:  definitions, references and diagnostics.

    Positions are 1-based.  Implementations keep a per-file overlay of unsaved content, set with
    `open`, so that `read` and navigation see the same text.
    """

    def open(self, path: str, content: str):
        raise NotImplementedError

    def read(self, path: str) -> str:
        raise NotImplementedError

    def definition(self, pos: ResolvedPosition) -> List[Location]:
        raise NotImplementedError

    def references(self, pos: ResolvedPosition) -> List[Location]:
        raise NotImplementedError

    def diagnostics(self, path: str, content: str) -> List[Diagnostic]:
        raise NotImplementedError

    def supports(self, path: str) -> bool:
        raise NotImplementedError

    def close(self):
        pass



class StubBackend(NavigationBackend):
    """
    An in-process backend answering from the code knowledge graph and the grammar parsers.

    Definitions resolve through the graph:  a use site that carries a resolved relation jumps to
    that relation's target; otherwise every declaration with the identifier's name is returned.
    References are the sites of the incoming `Calls`, `References` and `Inherits` relations of the
    declarations found that way.  Diagnostics come from `stub_diagnostics`.

    Attributes:
        graph (KnowledgeGraph):
            Graph of the workspace.

        root (Path):
            Workspace root.  Files are read from here unless an overlay exists.
    """

    def __init__(self, **args):
        self.graph: KnowledgeGraph = args.get('graph')
        self.root: Path = Path(args.get('root'))
        self._overlays: Dict[str, str] = {}
        log.info(f'Constructed new StubBackend!  root = {self.root}, entities = {len(self.graph) if self.graph else 0}')

    def open(self, path: str, content: str):
        self._overlays[path] = content

    def read(self, path: str) -> str:
        if path in self._overlays:
            return self._overlays[path]
        try:
            return (self.root / path).read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise PositionOutOfRange(f'Unknown or unreadable file:  {path} ({e}).') from e

    def supports(self, path: str) -> bool:
        return extractor_for_path(path) is not None

    def _token_at(self, pos: ResolvedPosition) -> Optional[str]:
        text = self.read(pos.path)
        lines = text.split('\n')
        if pos.line > len(lines) or pos.column > len(lines[pos.line - 1]) + 1:
            raise PositionOutOfRange(f'Position outside the file:  {pos.path}:{pos.line}:{pos.column}.')
        for column, token in identifier_tokens(pos.path, text).get(pos.line, []):
            if column <= pos.column < column + len(token):
                return token
        return None

    def _targets(self, pos: ResolvedPosition, token: str) -> List[str]:
        if self.graph is None:
            raise BackendUnavailable('The stub backend needs a knowledge graph.')
        named = [x for x in self.graph.by_name(token) if x.kind != EntityKind.FILE]
        for entity in named:
            if entity.path == pos.path and entity.start_line <= pos.line <= entity.end_line and self._declared_at(entity, pos):
                return [entity.id]
        sited = [
            x.dst for x in self.graph.relations
            if x.kind != RelationKind.CONTAINS and x.path == pos.path and x.line == pos.line
            and self.graph.entities[x.dst].name == token
        ]
        if sited:
            return list(dict.fromkeys(sited))
        return [x.id for x in named]

    def _declared_at(self, entity, pos: ResolvedPosition) -> bool:
        return self._name_location(entity) == Location(pos.path, pos.line, pos.column)

    def _name_location(self, entity) -> Location:
        tokens = identifier_tokens(entity.path, self.read(entity.path))
        for line in range(entity.start_line, entity.end_line + 1):
            for column, token in tokens.get(line, []):
                if token == entity.name:
                    return Location(entity.path, line, column)
        return Location(entity.path, entity.start_line, 1)

    def definition(self, pos: ResolvedPosition) -> List[Location]:
        token = self._token_at(pos)
        if token is None:
            return []
        return sorted({self._name_location(self.graph.entities[x]) for x in self._targets(pos, token)}, key=_location_key)

    def references(self, pos: ResolvedPosition) -> List[Location]:
        token = self._token_at(pos)
        if token is None:
            return []
        targets = set(self._targets(pos, token))
        locations = set()
        for relation in self.graph.relations:
            if relation.dst not in targets or relation.kind == RelationKind.CONTAINS:
                continue
            columns = [c for c, t in identifier_tokens(relation.path, self.read(relation.path)).get(relation.line, []) if t == token]
            for column in columns or [1]:
                locations.add(Location(relation.path, relation.line, column))
        return sorted(locations, key=_location_key)

    def diagnostics(self, path: str, content: str) -> List[Diagnostic]:
        if not self.supports(path):
            raise BackendUnavailable(f'No diagnostics backend for:  {path}.')
        return stub_diagnostics(path, content)


def _location_key(location: Location):
    return location.path, location.line, location.column
