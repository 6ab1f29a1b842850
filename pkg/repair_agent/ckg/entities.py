import re
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple



class EntityKind(str, Enum):
    FILE = 'File'
    CLASS = 'Class'
    FUNCTION = 'Function'
    METHOD = 'Method'
    VARIABLE = 'Variable'
    STRUCT = 'Struct'


class RelationKind(str, Enum):
    CONTAINS = 'Contains'
    CALLS = 'Calls'
    REFERENCES = 'References'
    IMPORTS = 'Imports'
    INHERITS = 'Inherits'


# Tie-break priority of the final re-ranking (lower sorts first).
KIND_PRIORITY: Dict[EntityKind, int] = {
    EntityKind.FUNCTION: 0,
    EntityKind.METHOD: 0,
    EntityKind.CLASS: 1,
    EntityKind.STRUCT: 1,
    EntityKind.VARIABLE: 2,
    EntityKind.FILE: 3,
}

RELATION_ORDER: Dict[RelationKind, int] = {kind: i for i, kind in enumerate(RelationKind)}

CALLABLE_KINDS = (EntityKind.FUNCTION, EntityKind.METHOD, EntityKind.CLASS, EntityKind.STRUCT)
TYPE_KINDS = (EntityKind.CLASS, EntityKind.STRUCT)



@dataclass(frozen=True)
class CodeEntity:
    """
    A node of the code knowledge graph.

    Attributes:
        id (str):
            Unique across the graph.  Built from path, qualified name and start position, so a
            rebuild of the same snapshot yields the same ids and two declarations sharing a line
            stay apart.

        kind (EntityKind):
            File, Class, Function, Method, Variable or Struct.

        name (str):
            Identifier text.  For files, the final path segment.

        path (str):
            POSIX path relative to the repository root.

        start_line, end_line (int):
            1-based inclusive span of the declaration.

        signature (str):
            Declaration header, e.g. `func XFunction()`.

        doc (str):
            Doc comment or docstring, if any.

        qualname (str):
            Dotted name within the file, e.g. `Outer.method`.

        language (str):
            Language tag of the extractor that produced the entity.

        start_column (int):
            1-based column of the declaration start.
    """
    id: str
    kind: EntityKind
    name: str
    path: str
    start_line: int
    end_line: int
    signature: Optional[str] = None
    doc: Optional[str] = None
    qualname: Optional[str] = None
    language: Optional[str] = None
    start_column: int = 1

    @property
    def location(self) -> Tuple[str, int, int]:
        return self.path, self.start_line, self.end_line

    def to_record(self) -> Dict:
        record = asdict(self)
        record['kind'] = self.kind.value
        return record

    @classmethod
    def from_record(cls, record: Dict) -> 'CodeEntity':
        record = dict(record)
        record['kind'] = EntityKind(record['kind'])
        return cls(**record)


@dataclass(frozen=True)
class CodeRelation:
    """A typed edge with the (path, line) site where the relationship occurs."""
    src: str
    dst: str
    kind: RelationKind
    path: str
    line: int

    @property
    def site(self) -> Tuple[str, int]:
        return self.path, self.line

    def sort_key(self) -> Tuple:
        return RELATION_ORDER[self.kind], self.path, self.line, self.src, self.dst

    def to_record(self) -> Dict:
        record = asdict(self)
        record['kind'] = self.kind.value
        return record

    @classmethod
    def from_record(cls, record: Dict) -> 'CodeRelation':
        record = dict(record)
        record['kind'] = RelationKind(record['kind'])
        return cls(**record)


def make_entity_id(path: str, kind: EntityKind, qualname: str, start_line: int, start_column: int = 1) -> str:
    if kind == EntityKind.FILE:
        return path
    return f'{path}#{qualname}@{start_line}:{start_column}'


_CAMEL = re.compile(r'[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+')


def split_identifier(text: str) -> List[str]:
    """
    Splits identifiers into case-folded word tokens, handling snake_case, camelCase and digits.

    For example, `NewStructB` gives `['new', 'struct', 'b']` and `parse_HTTPHeader2` gives
    `['parse', 'http', 'header', '2']`.
    """
    tokens = []
    for word in re.split(r'[^A-Za-z0-9]+', text):
        tokens.extend(x.lower() for x in _CAMEL.findall(word))
    return tokens
