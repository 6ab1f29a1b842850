import logging
import os
import pathspec
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional
from repair_agent.config import DEFAULTS
from repair_agent.errors import InvalidGlob, InvalidPattern, UnreadablePath
log = logging.getLogger(__name__)



@dataclass(frozen=True)
class GrepMatch:
    """One regular-expression hit.  `line` and `column` are 1-based; `line_text` has no newline."""
    path: str
    line: int
    column: int
    line_text: str

    def to_record(self) -> Dict:
        return asdict(self)


class GrepMatches(list):
    """A list of `GrepMatch` that also says whether the match cap cut the scan short."""

    def __init__(self, matches=(), truncated: bool = False):
        super().__init__(matches)
        self.truncated = truncated



class FileIndex:
    """
    Filename and content search over a repository snapshot.

    The index is stateless: every call walks the tree again, so concurrent callers never share
    anything mutable.

    Attributes:
        root (Path):
            Repository root.

        exclude_dirs (List[str]):
            Directory names skipped at any depth, e.g. `.git`.

        grep_cap (int):
            Maximum number of matches returned by one `grep` call.  When the cap is reached, the
            result's `truncated` flag is set.
    """

    def __init__(self, **args):
        self.root: Path = Path(args.get('root'))
        self.exclude_dirs: List[str] = list(args.get('exclude_dirs', DEFAULTS['exclude_dirs']))
        self.grep_cap: int = args.get('grep_cap', DEFAULTS['grep_cap'])
        self._exclude_spec = pathspec.PathSpec.from_lines('gitwildmatch', [f'{x}/' for x in self.exclude_dirs])
        log.debug(f'Constructed new FileIndex!  root = {self.root}, grep_cap = {self.grep_cap}')

    def list_files(self, include_excluded: bool = False) -> List[str]:
        """Returns every file under `root` as sorted POSIX paths relative to `root`."""
        if not self.root.is_dir() or not os.access(self.root, os.R_OK | os.X_OK):
            raise UnreadablePath(self.root, 'not a readable directory')
        return sorted(self._walk(include_excluded))

    def _walk(self, include_excluded: bool) -> Iterator[str]:
        for base, dirs, files in os.walk(self.root):
            relative = Path(base).relative_to(self.root)
            if not include_excluded:
                dirs[:] = [x for x in dirs if not self._exclude_spec.match_file((relative / x).as_posix() + '/')]
            dirs.sort()
            for name in files:
                yield (relative / name).as_posix()

    def find_file(self, pattern: str) -> List[str]:
        """
        Returns all and only the files whose relative path matches a gitignore-style glob.

        A pattern without a slash matches the final path segment at any depth, so `*.go` finds Go
        files everywhere.  `**` spans directories.
        """
        spec = self._compile_glob(pattern)
        paths = [x for x in self.list_files() if spec.match_file(x)]
        log.debug(f'Found {len(paths):,} file(s) matching:  {pattern}.')
        return paths

    def _compile_glob(self, pattern: str) -> pathspec.PathSpec:
        if not isinstance(pattern, str) or not pattern.strip() or '\x00' in pattern or pattern.strip().startswith('!'):
            raise InvalidGlob(f'Invalid glob pattern:  {pattern!r}.')
        try:
            return pathspec.PathSpec.from_lines('gitwildmatch', [pattern.strip()])
        except (ValueError, TypeError) as e:
            raise InvalidGlob(f'Invalid glob pattern:  {pattern!r} ({e}).') from e

    def grep(self, pattern: str, scope: str = None, cap: int = None) -> GrepMatches:
        """
        Searches text files for a regular expression.

        Args:
            pattern (str):
                Python regular expression, applied line by line.  Every match on a line is reported
                separately.

            scope (str):
                Optional filter.  A relative file or directory path restricts the search to that
                file or subtree; anything else is treated as a glob, as in `find_file`.

            cap (int):
                Overrides `grep_cap` for this call.

        Returns:
            GrepMatches:  Ordered by (path, line, column).  Binary and non-UTF-8 files are skipped.
        """
        try:
            regex = re.compile(pattern)
        except (re.error, TypeError) as e:
            raise InvalidPattern(f'Invalid regular expression:  {pattern!r} ({e}).') from e
        cap = self.grep_cap if cap is None else cap
        matches = GrepMatches()
        for path in self._scoped_files(scope):
            text = self._read_text(path)
            if text is None:
                continue
            for number, line in enumerate(_split_lines(text), start=1):
                for hit in regex.finditer(line):
                    if len(matches) >= cap:
                        matches.truncated = True
                        log.debug(f'Grep cap reached:  {cap:,} match(es) for {pattern!r}.')
                        return matches
                    matches.append(GrepMatch(path, number, hit.start() + 1, line))
        log.debug(f'Found {len(matches):,} match(es) for:  {pattern!r}.')
        return matches

    def _scoped_files(self, scope: Optional[str]) -> List[str]:
        paths = self.list_files()
        if scope is None:
            return paths
        scope = scope.strip().strip('/')
        target = self.root / scope
        if target.is_file():
            return [x for x in paths if x == Path(scope).as_posix()]
        if target.is_dir():
            prefix = Path(scope).as_posix() + '/'
            return [x for x in paths if x.startswith(prefix)]
        spec = self._compile_glob(scope)
        return [x for x in paths if spec.match_file(x)]

    def _read_text(self, path: str) -> Optional[str]:
        try:
            with open(self.root / path, 'rb') as file:
                data = file.read()
        except OSError as e:
            raise UnreadablePath(self.root / path, e.strerror or 'not readable') from e
        if b'\x00' in data[:8192]:
            return None
        try:
            return data.decode('utf-8')
        except UnicodeDecodeError:
            return None


def _split_lines(text: str) -> List[str]:
    """Splits on `\\n` only, dropping a trailing `\\r` and the empty piece after a final newline."""
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    return [x[:-1] if x.endswith('\r') else x for x in lines]


def find_file(root: Path, pattern: str, **args) -> List[str]:
    return FileIndex(root=root, **args).find_file(pattern)


def grep(root: Path, pattern: str, scope: str = None, **args) -> GrepMatches:
    return FileIndex(root=root, **args).grep(pattern, scope)
