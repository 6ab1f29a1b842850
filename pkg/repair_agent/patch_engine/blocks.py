import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple
from repair_agent.errors import MalformedBlock, NoBlocksFound
log = logging.getLogger(__name__)


SEARCH_MARKER = '<<<<<<< SEARCH'
DIVIDER_MARKER = '======='
REPLACE_MARKER = '>>>>>>> REPLACE'
MARKERS = (SEARCH_MARKER, DIVIDER_MARKER, REPLACE_MARKER)



@dataclass(frozen=True)
class EditBlock:
    """
    One conflict-marker edit request.

    Attributes:
        path (str):
            File to edit, relative to the workspace root.

        search (Tuple[str]):
            Original lines, without line endings.  Empty only for file creation.

        replace (Tuple[str]):
            Replacement lines, without line endings.

        line (int):
            1-based line of the opening marker in the text it was parsed from.
    """
    path: str
    search: Tuple[str, ...]
    replace: Tuple[str, ...]
    line: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'search', tuple(self.search))
        object.__setattr__(self, 'replace', tuple(self.replace))

    @property
    def creates_file(self) -> bool:
        return not self.search

    def render(self) -> str:
        """The canonical text form of the block."""
        return '\n'.join([self.path, SEARCH_MARKER, *self.search, DIVIDER_MARKER, *self.replace, REPLACE_MARKER]) + '\n'


class EditBlockList(list):
    """Well-formed blocks in source order, plus the malformed ones found along the way."""

    def __init__(self, blocks=(), malformed: List[MalformedBlock] = None):
        super().__init__(blocks)
        self.malformed: List[MalformedBlock] = malformed or []



def parse_edit_blocks(text: str) -> EditBlockList:
    """
    Extracts edit blocks from free-form provider output.

    The format is a path on its own line followed by the markers:

        path/to/file.py
        <<<<<<< SEARCH
        original lines
        =======
        replacement lines
        >>>>>>> REPLACE

    Blank lines and Markdown code fences between the path and the opening marker are skipped, and
    any prose around the blocks is ignored.

    Returns:
        EditBlockList:  Every well-formed block, in order.  Malformed blocks (missing path,
        unterminated sections) are listed in its `malformed` attribute and logged.

    Raises:
        NoBlocksFound:  Not a single well-formed block.
    """
    lines = [x[:-1] if x.endswith('\r') else x for x in (text or '').split('\n')]
    blocks, malformed = [], []
    i = 0
    while i < len(lines):
        if lines[i].strip() != SEARCH_MARKER:
            i += 1
            continue
        start = i
        path = _find_path(lines, start)
        search, i = _collect(lines, start + 1, DIVIDER_MARKER)
        if i is None:
            malformed.append(MalformedBlock('unterminated search section, expected =======', start + 1))
            i = _resume(lines, start + 1)
            continue
        replace, i = _collect(lines, i + 1, REPLACE_MARKER)
        if i is None:
            malformed.append(MalformedBlock('unterminated replace section, expected >>>>>>> REPLACE', start + 1))
            i = _resume(lines, start + 1)
            continue
        i += 1
        if path is None:
            malformed.append(MalformedBlock('missing file path before <<<<<<< SEARCH', start + 1))
            continue
        blocks.append(EditBlock(path, search, replace, start + 1))
    for x in malformed:
        log.warning(f'Skipping edit block:  {x}')
    if not blocks:
        raise NoBlocksFound(
            'No edit blocks found.' if not malformed else f'No well-formed edit blocks found; {len(malformed)} malformed.',
            malformed=malformed,
        )
    log.debug(f'Parsed {len(blocks)} edit block(s).')
    return EditBlockList(blocks, malformed)


def _find_path(lines: List[str], marker: int) -> Optional[str]:
    """The nearest line above the opening marker that is neither blank nor a code fence."""
    i = marker - 1
    while i >= 0 and (not lines[i].strip() or lines[i].strip().startswith('```')):
        i -= 1
    if i < 0:
        return None
    candidate = lines[i].strip().strip('`*').strip()
    if not candidate or candidate in MARKERS or candidate.endswith(REPLACE_MARKER):
        return None
    return candidate


def _collect(lines: List[str], i: int, terminator: str) -> Tuple[List[str], Optional[int]]:
    """Lines from `i` up to the terminator.  Returns None as the index when another marker or EOF comes first."""
    collected = []
    while i < len(lines):
        stripped = lines[i].strip()
        if stripped == terminator:
            return collected, i
        if stripped in MARKERS:
            return collected, None
        collected.append(lines[i])
        i += 1
    return collected, None


def _resume(lines: List[str], i: int) -> int:
    """Index of the next opening marker at or after `i`, or the end."""
    while i < len(lines) and lines[i].strip() != SEARCH_MARKER:
        i += 1
    return i
