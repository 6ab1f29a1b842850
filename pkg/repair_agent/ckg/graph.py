import json
import logging
import networkx
import threading
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple
from repair_agent.ckg.entities import RELATION_ORDER, CodeEntity, CodeRelation, EntityKind, RelationKind
from repair_agent.ckg.store import EntityStore
from repair_agent.errors import GraphFormatError, UnknownEntity, UnreadablePath
log = logging.getLogger(__name__)


GRAPH_FORMAT = 'repair-agent-ckg'
GRAPH_VERSION = 1



class KnowledgeGraph:
    """
    An immutable code knowledge graph:  entities (nodes) and typed, located relations (edges).

    Attributes:
        entities (Dict[str, CodeEntity]):
            Entities keyed by id.

        relations (List[CodeRelation]):
            All relations, sorted by kind, site, source and destination.  Duplicates are allowed
            (e.g. two calls on different lines are two relations).

        snapshot_id (str):
            Content hash of the indexed tree.

        report (BuildReport):
            Summary of the build that produced this graph, if any.

    Note:
        Traversal uses a networkx multigraph built once at construction.  The SQL view used for
        entity lookup is created lazily, on first query, and shared by all readers.
    """

    def __init__(self, entities: Iterable[CodeEntity], relations: Iterable[CodeRelation], snapshot_id: str, report=None):
        entities = sorted(entities, key=lambda x: x.id)
        self.entities: Dict[str, CodeEntity] = {x.id: x for x in entities}
        if len(self.entities) != len(entities):
            duplicates = sorted({x.id for x, y in zip(entities, entities[1:]) if x.id == y.id})
            raise GraphFormatError(f'Duplicate entity id(s):  {duplicates[:5]}.')
        self.relations: List[CodeRelation] = sorted(relations, key=CodeRelation.sort_key)
        self.snapshot_id: str = snapshot_id
        self.report = report
        self._check_integrity()
        self._graph = networkx.MultiDiGraph()
        self._graph.add_nodes_from(self.entities)
        for relation in self.relations:
            self._graph.add_edge(relation.src, relation.dst, relation=relation)
        self._names: Dict[str, List[str]] = {}
        for entity in self.entities.values():
            self._names.setdefault(entity.name, []).append(entity.id)
        self._store: Optional[EntityStore] = None
        self._store_lock = threading.Lock()

    def __len__(self):
        return len(self.entities)

    def __repr__(self):
        return f'KnowledgeGraph(entities={len(self.entities)}, relations={len(self.relations)}, snapshot_id={self.snapshot_id!r})'

    def _check_integrity(self):
        for relation in self.relations:
            if relation.src not in self.entities or relation.dst not in self.entities:
                raise GraphFormatError(f'Relation endpoint missing from graph:  {relation}.')

    @property
    def store(self) -> EntityStore:
        with self._store_lock:
            if self._store is None:
                store = EntityStore()
                store.load(self.entities.values(), self.relations)
                self._store = store
            return self._store

    def entity(self, entity_id: str) -> CodeEntity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntity(entity_id)

    def by_name(self, name: str) -> List[CodeEntity]:
        return [self.entities[x] for x in self._names.get(name, [])]

    def neighbors(self, entity_id: str, kinds: Set[RelationKind] = None) -> List[Tuple[CodeRelation, CodeEntity]]:
        """
        Returns every outgoing and incoming relation of an entity, paired with the far-end entity.

        Args:
            entity_id (str):
                Entity to start from.

            kinds (Set[RelationKind]):
                Optional relation-kind filter.  All kinds if omitted.

        Returns:
            List[Tuple[CodeRelation, CodeEntity]]:  Ordered by kind, then site, then far-end id.
        """
        if entity_id not in self.entities:
            raise UnknownEntity(entity_id)
        kinds = None if kinds is None else {RelationKind(x) for x in kinds}
        seen = set()
        result = []
        edges = list(self._graph.out_edges(entity_id, data='relation')) + list(self._graph.in_edges(entity_id, data='relation'))
        for src, dst, relation in edges:
            if kinds is not None and relation.kind not in kinds:
                continue
            if id(relation) in seen:
                continue
            seen.add(id(relation))
            far = dst if src == entity_id else src
            result.append((relation, self.entities[far]))
        result.sort(key=lambda x: (RELATION_ORDER[x[0].kind], x[0].path, x[0].line, x[1].id))
        return result

    def contained(self, entity_id: str) -> List[CodeEntity]:
        """Direct children of an entity along `Contains` edges."""
        return [e for r, e in self.neighbors(entity_id, {RelationKind.CONTAINS}) if r.src == entity_id]

    def files(self) -> List[CodeEntity]:
        return [x for x in self.entities.values() if x.kind == EntityKind.FILE]

    def snippet(self, entity_id: str, root: Path, context: int = 0) -> str:
        """Returns the source text of an entity, optionally widened by `context` lines on each side."""
        entity = self.entity(entity_id)
        path = Path(root) / entity.path
        try:
            lines = path.read_text(encoding='utf-8').splitlines(keepends=True)
        except (OSError, UnicodeDecodeError) as e:
            raise UnreadablePath(path, str(e)) from e
        start = max(1, entity.start_line - context)
        end = min(len(lines), entity.end_line + context)
        return ''.join(lines[start - 1:end])

    def canonical(self) -> Tuple[frozenset, Tuple]:
        """
        Returns an id-free form of the graph, equal for isomorphic graphs.

        Entities become `(kind, path, qualname, start_line, start_column)` tuples; relation
        endpoints are replaced by those tuples.
        """
        def key(entity: CodeEntity):
            return entity.kind.value, entity.path, entity.qualname or entity.name, entity.start_line, entity.start_column

        entities = frozenset(key(x) for x in self.entities.values())
        relations = tuple(sorted(
            (x.kind.value, key(self.entities[x.src]), key(self.entities[x.dst]), x.path, x.line) for x in self.relations
        ))
        return entities, relations

    def save(self, path: Path):
        """Writes the graph as JSON lines:  one header record, then one record per entity or relation."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as file:
            header = {'format': GRAPH_FORMAT, 'version': GRAPH_VERSION, 'snapshot_id': self.snapshot_id,
                      'entities': len(self.entities), 'relations': len(self.relations)}
            file.write(json.dumps(header) + '\n')
            for entity in self.entities.values():
                file.write(json.dumps({'record': 'entity', **entity.to_record()}) + '\n')
            for relation in self.relations:
                file.write(json.dumps({'record': 'relation', **relation.to_record()}) + '\n')
        log.info(f'Saved graph:  {path} ({len(self.entities):,} entities, {len(self.relations):,} relations).')

    @classmethod
    def load(cls, path: Path) -> 'KnowledgeGraph':
        """
        Reads a graph written by `save`.

        Raises:
            UnreadablePath:  The file does not exist or cannot be read.
            GraphFormatError:  Wrong format or version, corrupt records, or dangling relations.
        """
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as file:
                lines = [x for x in file.read().split('\n') if x.strip()]
        except (OSError, UnicodeDecodeError) as e:
            raise UnreadablePath(path, getattr(e, 'strerror', None) or str(e)) from e
        if not lines:
            raise GraphFormatError(f'Empty graph file:  {path}.')
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise GraphFormatError(f'Corrupt graph header in {path}:  {e}.') from e
        if not isinstance(header, dict) or header.get('format') != GRAPH_FORMAT:
            raise GraphFormatError(f'Not a knowledge graph file:  {path}.')
        if header.get('version') != GRAPH_VERSION:
            raise GraphFormatError(f'Unsupported graph version {header.get("version")!r} in {path}; expected {GRAPH_VERSION}.')
        entities, relations = [], []
        for number, line in enumerate(lines[1:], start=2):
            try:
                record = json.loads(line)
                kind = record.pop('record')
                if kind == 'entity':
                    entities.append(CodeEntity.from_record(record))
                elif kind == 'relation':
                    relations.append(CodeRelation.from_record(record))
                else:
                    raise ValueError(f'unknown record type {kind!r}')
            except (ValueError, KeyError, TypeError, AttributeError) as e:
                raise GraphFormatError(f'Corrupt record at {path}:{number}:  {e}.') from e
        graph = cls(entities, relations, header.get('snapshot_id'))
        log.info(f'Loaded graph:  {path} ({len(entities):,} entities, {len(relations):,} relations).')
        return graph
