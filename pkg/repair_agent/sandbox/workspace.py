import hashlib
import logging
import shutil
import tempfile
from pathlib import Path
from typing import Dict, List, Optional
from repair_agent.config import DEFAULTS
from repair_agent.errors import SnapshotMissing, UnreadablePath
from repair_agent.general_index.search import FileIndex
from repair_agent.patch_engine.diffs import PatchSet, render_unified_diff
log = logging.getLogger(__name__)


RESERVED_DIR = '.repro'
REPRODUCTION_SCRIPT = f'{RESERVED_DIR}/reproduce.py'



class Workspace:
    """
    An isolated working copy of a repository with a pristine snapshot for byte-exact reset.

    Two copies of `source` are made under a private temp directory:  `work`, which agents edit and
    commands run in, and `pristine`, which is never touched and defines `pristine_ref`.
    Version-control metadata and the configured exclusion directories are not copied.

    Attributes:
        source (Path):
            Repository the workspace was copied from.  Never modified.

        root (Path):
            The working copy.

        pristine_ref (str):
            Content hash of the snapshot taken at creation.

        exclude_dirs (List[str]):
            Directory names left out of copies, resets and diffs.  The reserved reproduction
            directory `.repro` is always excluded.

    Note:
        A workspace has a single writer.  Use it as a context manager, or call `close`, to remove
        the temp directory.
    """

    def __init__(self, **args):
        self.source: Path = Path(args.get('source')).absolute()
        self.exclude_dirs: List[str] = list(args.get('exclude_dirs', DEFAULTS['exclude_dirs']))
        if not self.source.is_dir():
            raise UnreadablePath(self.source, 'not a directory')
        self._temp = Path(tempfile.mkdtemp(prefix='repair_agent_', dir=args.get('parent')))
        self.root: Path = self._temp / 'work'
        self.pristine: Path = self._temp / 'pristine'
        ignore = shutil.ignore_patterns(*self.exclude_dirs, RESERVED_DIR)
        shutil.copytree(self.source, self.pristine, ignore=ignore, symlinks=True)
        shutil.copytree(self.pristine, self.root, symlinks=True)
        self.pristine_ref: str = self._tree_hash(self.pristine)
        log.info(f'Constructed new Workspace!  source = {self.source}, root = {self.root}, pristine_ref = {self.pristine_ref[:12]}')

    def __enter__(self) -> 'Workspace':
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        shutil.rmtree(self._temp, ignore_errors=True)

    def _index(self, root: Path) -> FileIndex:
        return FileIndex(root=root, exclude_dirs=self.exclude_dirs + [RESERVED_DIR])

    def files(self, root: Path = None) -> List[str]:
        """Tracked files of the working copy (or of `root`), excluding ignored paths."""
        return self._index(root or self.root).list_files()

    def _tree_hash(self, root: Path) -> str:
        digest = hashlib.sha256()
        for path in self.files(root):
            digest.update(path.encode('utf-8') + b'\0')
            digest.update(hashlib.sha256((root / path).read_bytes()).digest())
        return digest.hexdigest()

    def snapshot_id(self) -> str:
        """Content hash of the working copy; equals `pristine_ref` iff the tree is pristine."""
        return self._tree_hash(self.root)

    def _check_snapshot(self):
        if not self.pristine.is_dir():
            raise SnapshotMissing(f'Pristine snapshot is gone:  {self.pristine}.')

    def read(self, path: str) -> Optional[str]:
        """Text of a working-copy file, or None if it does not exist."""
        target = self.root / path
        if not target.is_file():
            return None
        return target.read_text(encoding='utf-8')

    def read_pristine(self, path: str) -> Optional[str]:
        target = self.pristine / path
        if not target.is_file():
            return None
        return target.read_text(encoding='utf-8')

    def write(self, path: str, content: Optional[str]):
        """Writes (or, for None, deletes) a working-copy file.  Paths may not leave the working copy."""
        target = (self.root / path).resolve()
        if self.root.resolve() not in target.parents:
            raise UnreadablePath(path, 'outside the workspace')
        if content is None:
            target.unlink(missing_ok=True)
            return
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8', newline='') as file:
            file.write(content)

    def write_reproduction(self, script: str) -> Path:
        target = self.root / REPRODUCTION_SCRIPT
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(script, encoding='utf-8')
        return target

    def reset(self):
        """Restores the working copy to byte equality with the snapshot.  The reserved directory is kept."""
        self._check_snapshot()
        pristine = set(self.files(self.pristine))
        removed = restored = 0
        for path in self.files():
            if path not in pristine:
                (self.root / path).unlink()
                removed += 1
        for path in sorted(pristine):
            source, target = self.pristine / path, self.root / path
            if target.is_file() and target.read_bytes() == source.read_bytes():
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copy2(source, target)
            restored += 1
        self._prune_directories()
        log.info(f'Reset workspace:  restored = {restored}, removed = {removed}')

    def _prune_directories(self):
        skipped = set(self.exclude_dirs) | {RESERVED_DIR}
        directories = [x for x in self.root.rglob('*') if x.is_dir() and not x.is_symlink()]
        for directory in sorted(directories, key=lambda x: len(x.parts), reverse=True):
            relative = directory.relative_to(self.root)
            if skipped & set(relative.parts) or (self.pristine / relative).is_dir():
                continue
            if not any(directory.iterdir()):
                directory.rmdir()

    def diff(self, context: int = DEFAULTS['context_lines']) -> PatchSet:
        """Unified diff of the working copy against the snapshot, one entry per changed text file."""
        self._check_snapshot()
        patch = PatchSet()
        for path in sorted(set(self.files()) | set(self.files(self.pristine))):
            old, new = self._text(self.pristine / path), self._text(self.root / path)
            if old is False or new is False:
                log.warning(f'Skipping binary or undecodable file in diff:  {path}.')
                continue
            diff = render_unified_diff(old, new, path, context)
            if not diff.is_empty():
                patch.append(diff)
        return patch

    @staticmethod
    def _text(path: Path):
        """None if missing, False if binary, else the text."""
        if not path.is_file():
            return None
        data = path.read_bytes()
        if b'\0' in data[:8192]:
            return False
        try:
            return data.decode('utf-8')
        except UnicodeDecodeError:
            return False

    def changed_files(self) -> Dict[str, str]:
        """Path to `added`, `modified` or `deleted` for every file differing from the snapshot."""
        work, pristine = set(self.files()), set(self.files(self.pristine))
        result = {x: 'added' for x in work - pristine}
        result.update({x: 'deleted' for x in pristine - work})
        for path in work & pristine:
            if (self.root / path).read_bytes() != (self.pristine / path).read_bytes():
                result[path] = 'modified'
        return dict(sorted(result.items()))


def reset_repository(ws: Workspace):
    ws.reset()


def capture_solution_diff(ws: Workspace, context: int = DEFAULTS['context_lines']) -> PatchSet:
    return ws.diff(context)
