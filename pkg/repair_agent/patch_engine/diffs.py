import logging
import re
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from typing import Callable, Dict, List, Optional
from repair_agent.config import DEFAULTS
from repair_agent.errors import DiffApplyFailure
log = logging.getLogger(__name__)


DEV_NULL = '/dev/null'
NO_NEWLINE_MARKER = '\\ No newline at end of file'
HUNK_HEADER = re.compile(r'^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@')



def split_keepends(text: Optional[str]) -> List[str]:
    """Splits on `\\n` only, keeping the endings.  A carriage return stays part of its line."""
    if not text:
        return []
    lines = text.split('\n')
    result = [x + '\n' for x in lines[:-1]]
    if lines[-1]:
        result.append(lines[-1])
    return result


def _format_range(start: int, length: int) -> str:
    return str(start) if length == 1 else f'{start},{length}'


@dataclass
class Hunk:
    """
    One `@@` section of a unified diff.

    Attributes:
        old_start, old_len, new_start, new_len (int):
            The numbers of the hunk header, as written.  A zero-length range names the line after
            which the change happens.

        lines (List[str]):
            Body lines.  Each starts with ' ', '-' or '+' and keeps its own line ending; a line
            without an ending is the last line of a file lacking a final newline.
    """
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: List[str] = field(default_factory=list)

    @property
    def header(self) -> str:
        return f'@@ -{_format_range(self.old_start, self.old_len)} +{_format_range(self.new_start, self.new_len)} @@'

    def is_consistent(self) -> bool:
        prefixes = [x[:1] for x in self.lines]
        return (
            self.old_len == prefixes.count(' ') + prefixes.count('-')
            and self.new_len == prefixes.count(' ') + prefixes.count('+')
        )

    def to_text(self) -> str:
        result = [self.header + '\n']
        for line in self.lines:
            result.append(line if line.endswith('\n') else f'{line}\n{NO_NEWLINE_MARKER}\n')
        return ''.join(result)



@dataclass
class UnifiedDiff:
    """
    A single-file unified diff.

    Attributes:
        old_path (str):
            Path on the `---` line, or `/dev/null` for a created file.

        new_path (str):
            Path on the `+++` line, or `/dev/null` for a deleted file.

        hunks (List[Hunk]):
            Hunks in file order.  No hunks means the diff is empty and renders as ''.
    """
    old_path: str
    new_path: str
    hunks: List[Hunk] = field(default_factory=list)

    @property
    def path(self) -> str:
        return self.old_path if self.new_path == DEV_NULL else self.new_path

    def is_empty(self) -> bool:
        return not self.hunks

    def to_text(self) -> str:
        if not self.hunks:
            return ''
        return f'--- {self.old_path}\n+++ {self.new_path}\n' + ''.join(x.to_text() for x in self.hunks)

    def apply(self, old: Optional[str]) -> str:
        return apply_diff(old, self)

    def changed_lines(self) -> Dict[str, int]:
        prefixes = [x[:1] for h in self.hunks for x in h.lines]
        return {'added': prefixes.count('+'), 'removed': prefixes.count('-')}


class PatchSet(list):
    """Single-file diffs of a multi-file change, in path order."""

    def to_text(self) -> str:
        return ''.join(x.to_text() for x in self)

    def is_empty(self) -> bool:
        return all(x.is_empty() for x in self)

    @property
    def paths(self) -> List[str]:
        return [x.path for x in self if not x.is_empty()]

    def for_path(self, path: str) -> Optional[UnifiedDiff]:
        return next((x for x in self if x.path == path), None)

    def apply(self, read: Callable[[str], Optional[str]]) -> Dict[str, Optional[str]]:
        """New content per path; `read` returns the current content or None.  Deleted files map to None."""
        result = {}
        for diff in self:
            new = diff.apply(None if diff.old_path == DEV_NULL else read(diff.path))
            result[diff.path] = None if diff.new_path == DEV_NULL else new
        return result



def render_unified_diff(old: Optional[str], new: Optional[str], path: str, context: int = DEFAULTS['context_lines']) -> UnifiedDiff:
    """
    Renders the change from `old` to `new` as a unified diff.

    Args:
        old (str):
            Original text, or None for a file that does not exist yet.

        new (str):
            New text, or None for a deleted file.

        path (str):
            Path written on both header lines.

        context (int):
            Unchanged lines around each change.  Changes closer than `2 * context` lines share a
            hunk.

    Returns:
        UnifiedDiff:  Empty (no hunks) when the texts are identical.

    Note:
        Hunk grouping and range formatting follow `difflib.unified_diff`.
    """
    a, b = split_keepends(old), split_keepends(new)
    diff = UnifiedDiff(DEV_NULL if old is None else path, DEV_NULL if new is None else path)
    if a == b:
        return diff
    matcher = SequenceMatcher(None, a, b, autojunk=False)
    for group in matcher.get_grouped_opcodes(context):
        first, last = group[0], group[-1]
        old_len, new_len = last[2] - first[1], last[4] - first[3]
        hunk = Hunk(
            old_start=first[1] + 1 if old_len else first[1],
            old_len=old_len,
            new_start=first[3] + 1 if new_len else first[3],
            new_len=new_len,
        )
        for tag, i1, i2, j1, j2 in group:
            if tag == 'equal':
                hunk.lines.extend(' ' + x for x in a[i1:i2])
                continue
            if tag in ('replace', 'delete'):
                hunk.lines.extend('-' + x for x in a[i1:i2])
            if tag in ('replace', 'insert'):
                hunk.lines.extend('+' + x for x in b[j1:j2])
        diff.hunks.append(hunk)
    return diff


def apply_diff(old: Optional[str], diff: UnifiedDiff) -> str:
    """
    Applies a diff strictly at the positions its hunk headers name.

    Raises:
        DiffApplyFailure:  A context or removed line does not match, or hunks overlap.
    """
    a = split_keepends(old)
    result, position = [], 0
    for hunk in diff.hunks:
        start = hunk.old_start - 1 if hunk.old_len else hunk.old_start
        if start < position or start > len(a):
            raise DiffApplyFailure(f'Hunk {hunk.header} of {diff.path} is out of order or beyond the end of the file.')
        result.extend(a[position:start])
        cursor = start
        for line in hunk.lines:
            prefix, text = line[:1], line[1:]
            if prefix == '+':
                result.append(text)
                continue
            if cursor >= len(a) or a[cursor] != text:
                found = a[cursor] if cursor < len(a) else '<end of file>'
                raise DiffApplyFailure(
                    f'Hunk {hunk.header} of {diff.path} does not apply at line {cursor + 1}:  '
                    f'expected {text!r}, found {found!r}.'
                )
            if prefix == ' ':
                result.append(text)
            cursor += 1
        position = cursor
    result.extend(a[position:])
    return ''.join(result)


def parse_unified_diff(text: str) -> PatchSet:
    """
    Parses unified diff text into one `UnifiedDiff` per file.

    Lines outside file sections (`diff --git`, `index`, prose) are skipped.  `a/` and `b/` path
    prefixes and tab-separated timestamps are removed.  An empty body line counts as an empty
    context line.

    Raises:
        DiffApplyFailure:  A hunk is truncated or its header disagrees with its body.
    """
    lines = split_keepends(text)
    patch, current, i = PatchSet(), None, 0
    while i < len(lines):
        line = lines[i]
        if line.startswith('--- ') and i + 1 < len(lines) and lines[i + 1].startswith('+++ '):
            current = UnifiedDiff(_header_path(line[4:], 'a/'), _header_path(lines[i + 1][4:], 'b/'))
            patch.append(current)
            i += 2
            continue
        match = HUNK_HEADER.match(line)
        if match is None or current is None:
            i += 1
            continue
        hunk = Hunk(
            old_start=int(match.group(1)),
            old_len=int(match.group(2)) if match.group(2) is not None else 1,
            new_start=int(match.group(3)),
            new_len=int(match.group(4)) if match.group(4) is not None else 1,
        )
        i = _parse_hunk_body(lines, i + 1, hunk)
        if not hunk.is_consistent():
            raise DiffApplyFailure(f'Hunk {hunk.header} of {current.path} disagrees with its body.')
        current.hunks.append(hunk)
    log.debug(f'Parsed unified diff:  files = {len(patch)}, hunks = {sum(len(x.hunks) for x in patch)}')
    return patch


def _parse_hunk_body(lines: List[str], i: int, hunk: Hunk) -> int:
    old_seen = new_seen = 0
    while i < len(lines) and (old_seen < hunk.old_len or new_seen < hunk.new_len or lines[i].startswith('\\')):
        line = lines[i]
        if line.startswith('\\'):
            if hunk.lines:
                hunk.lines[-1] = hunk.lines[-1][:-1] if hunk.lines[-1].endswith('\n') else hunk.lines[-1]
            i += 1
            continue
        if line in ('\n', '\r\n'):
            line = ' ' + line
        prefix = line[:1]
        if prefix not in (' ', '-', '+'):
            break
        old_seen += prefix in (' ', '-')
        new_seen += prefix in (' ', '+')
        hunk.lines.append(line)
        i += 1
    if old_seen != hunk.old_len or new_seen != hunk.new_len:
        raise DiffApplyFailure(f'Hunk {hunk.header} is truncated.')
    return i


def _header_path(raw: str, prefix: str) -> str:
    path = raw.rstrip('\r\n').split('\t')[0].strip()
    if path != DEV_NULL and path.startswith(prefix):
        path = path[len(prefix):]
    return path
