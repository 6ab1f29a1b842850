import keyword
import logging
import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Tuple
from repair_agent.ckg.extractors import extractor_for_path, walk
from repair_agent.config import DEFAULTS
from repair_agent.errors import AmbiguousIdentifier, NoIdentifierFound, PositionOutOfRange
log = logging.getLogger(__name__)


IDENTIFIER_NODE_TYPES = frozenset({
    'identifier', 'type_identifier', 'field_identifier', 'package_identifier', 'label_name',
})

GO_KEYWORDS = frozenset('''
    break case chan const continue default defer else fallthrough for func go goto if import
    interface map package range return select struct switch type var
'''.split())

_TOKEN = re.compile(r'[A-Za-z_][A-Za-z0-9_]*')



class Tier(str, Enum):
    EXACT_LINE = 'ExactLine'
    NEARBY_LINE = 'NearbyLine'
    OPENED_FILES = 'OpenedFiles'


@dataclass(frozen=True)
class PositionHint:
    """
    An approximate position supplied by an agent:  a file, a 1-based line and optionally the
    identifier it meant.

    Raises:
        PositionOutOfRange:  `line` is below 1.
        NoIdentifierFound:  `identifier` is not a single lexical token.
    """
    path: str
    line: int
    identifier: Optional[str] = None
    opened_files: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.line < 1:
            raise PositionOutOfRange(f'Line numbers start at 1, got {self.line}.')
        if self.identifier is not None and not _TOKEN.fullmatch(self.identifier):
            raise NoIdentifierFound(f'Not a single identifier token:  {self.identifier!r}.')
        object.__setattr__(self, 'opened_files', tuple(self.opened_files))


@dataclass(frozen=True)
class ResolvedPosition:
    """An exact position; `(line, column)` is the 1-based address of the identifier's first character."""
    path: str
    line: int
    column: int
    identifier: str
    tier: Tier

    def to_record(self) -> Dict:
        record = asdict(self)
        record['tier'] = self.tier.value
        return record


@dataclass(frozen=True)
class Location:
    path: str
    line: int
    column: int

    def to_record(self) -> Dict:
        return asdict(self)



def identifier_tokens(path: str, text: str) -> Dict[int, List[Tuple[int, str]]]:
    """
    Returns `{line: [(column, token), ...]}` for every identifier in a file, columns ascending.

    Files handled by a shipped grammar are tokenized by the parser, so identifiers inside strings
    and comments are ignored.  Other files fall back to a regular expression minus Python and Go
    keywords.
    """
    tokens: Dict[int, List[Tuple[int, str]]] = {}
    extractor = extractor_for_path(path)
    if extractor is not None:
        source = text.encode('utf-8')
        lines = source.split(b'\n')
        for node in walk(extractor.parse(source).root_node):
            if node.type in IDENTIFIER_NODE_TYPES and node.start_point[0] == node.end_point[0]:
                row, byte_column = node.start_point
                column = len(lines[row][:byte_column].decode('utf-8', errors='replace')) + 1
                token = source[node.start_byte:node.end_byte].decode('utf-8', errors='replace')
                tokens.setdefault(row + 1, []).append((column, token))
    else:
        for number, line in enumerate(text.split('\n'), start=1):
            for match in _TOKEN.finditer(line):
                if not keyword.iskeyword(match.group()) and match.group() not in GO_KEYWORDS:
                    tokens.setdefault(number, []).append((match.start() + 1, match.group()))
    for values in tokens.values():
        values.sort()
    return tokens


def resolve_position(
    hint: PositionHint,
    snapshot: Mapping[str, str],
    radius: int = DEFAULTS['nearby_radius'],
    observer: Callable[[Tier], None] = None,
) -> ResolvedPosition:
    """
    Turns an approximate position into an exact one with a three-tier cascade.

    The tiers are tried in order and the first one that produces a hit wins:

        1.  ExactLine:  the identifier on the hinted line.

        2.  NearbyLine:  the nearest occurrence within `radius` lines of the hint.  Ties go to the
            smallest line distance, then the smallest column, then the earlier line.

        3.  OpenedFiles:  the first occurrence in the browsed files, in browse order.  Needs an
            identifier.

    Without an identifier, a tier hits when its nearest candidates are a single distinct token;
    several distinct tokens at the same distance raise `AmbiguousIdentifier`.

    Args:
        hint (PositionHint):
            The approximate position.

        snapshot (Mapping[str, str]):
            File contents keyed by path.

        radius (int):
            Line radius of the NearbyLine tier.

        observer (Callable[[Tier], None]):
            Called with each tier as it is attempted.

    Raises:
        NoIdentifierFound:  Every tier came up empty.
        AmbiguousIdentifier:  A tier found several equally near distinct identifiers.
        PositionOutOfRange:  The hinted file is unknown and no files were opened.
    """
    if hint.path not in snapshot and not hint.opened_files:
        raise PositionOutOfRange(f'Unknown file and no opened files:  {hint.path}.')
    tokens = identifier_tokens(hint.path, snapshot[hint.path]) if hint.path in snapshot else {}

    # ExactLine.
    _notify(observer, Tier.EXACT_LINE)
    hit = _pick(hint, [(0, column, hint.line, token) for column, token in tokens.get(hint.line, [])])
    if hit is not None:
        return ResolvedPosition(hint.path, hit[0], hit[1], hit[2], Tier.EXACT_LINE)

    # NearbyLine.
    _notify(observer, Tier.NEARBY_LINE)
    candidates = []
    for line in range(max(1, hint.line - radius), hint.line + radius + 1):
        if line != hint.line:
            candidates.extend((abs(line - hint.line), column, line, token) for column, token in tokens.get(line, []))
    hit = _pick(hint, candidates)
    if hit is not None:
        return ResolvedPosition(hint.path, hit[0], hit[1], hit[2], Tier.NEARBY_LINE)

    # OpenedFiles.
    _notify(observer, Tier.OPENED_FILES)
    if hint.identifier is not None:
        for path in hint.opened_files:
            if path not in snapshot:
                log.debug(f'Opened file missing from snapshot:  {path}.')
                continue
            for line, values in sorted(identifier_tokens(path, snapshot[path]).items()):
                for column, token in values:
                    if token == hint.identifier:
                        return ResolvedPosition(path, line, column, token, Tier.OPENED_FILES)

    raise NoIdentifierFound(
        f'No identifier found near {hint.path}:{hint.line}'
        + (f' matching {hint.identifier!r}.' if hint.identifier else '.')
    )


def _pick(hint: PositionHint, candidates: List[Tuple[int, int, int, str]]) -> Optional[Tuple[int, int, str]]:
    """Picks `(line, column, token)` from `(distance, column, line, token)` candidates, or None."""
    if hint.identifier is not None:
        candidates = [x for x in candidates if x[3] == hint.identifier]
    if not candidates:
        return None
    nearest = min(x[0] for x in candidates)
    candidates = sorted(x for x in candidates if x[0] == nearest)
    if hint.identifier is None and len({x[3] for x in candidates}) > 1:
        raise AmbiguousIdentifier(
            f'Several identifiers near {hint.path}:{hint.line}:  {sorted({x[3] for x in candidates})}.',
            candidates=[(hint.path, x[2], x[1], x[3]) for x in candidates],
        )
    _, column, line, token = min(candidates, key=lambda x: (x[1], x[2]))
    return line, column, token


def _notify(observer: Optional[Callable[[Tier], None]], tier: Tier):
    log.debug(f'Trying tier:  {tier.value}.')
    if observer is not None:
        observer(tier)
