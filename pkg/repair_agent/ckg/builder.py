import hashlib
import logging
import posixpath
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple
from repair_agent.ckg.entities import CALLABLE_KINDS, TYPE_KINDS, CodeEntity, CodeRelation, EntityKind, RelationKind
from repair_agent.ckg.extractors import ExtractedFile, Extractor, PendingReference, extractor_for_path, get_extractors
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.config import DEFAULTS
from repair_agent.errors import NoExtractorAvailable, ParseFailure, UnreadablePath
from repair_agent.general_index.search import FileIndex
log = logging.getLogger(__name__)



@dataclass
class BuildReport:
    """
    Summary of one graph build.

    Attributes:
        files_indexed (int):
            Files parsed successfully.

        files_skipped (List[Tuple[str, str]]):
            `(path, reason)` of files that could not be read or parsed.  A skipped file contributes
            nothing.

        unresolved_calls, unresolved_references, unresolved_imports (int):
            Uses whose target could not be resolved to exactly one entity.  No edge is emitted
            for them.

        elapsed (float):
            Build time in seconds.
    """
    files_indexed: int = 0
    files_skipped: List[Tuple[str, str]] = field(default_factory=list)
    unresolved_calls: int = 0
    unresolved_references: int = 0
    unresolved_imports: int = 0
    elapsed: float = 0.0

    def to_record(self) -> Dict:
        record = asdict(self)
        record['files_skipped'] = [{'path': p, 'reason': r} for p, r in self.files_skipped]
        return record



def build_graph(repo_root: Path, languages: Iterable[str] = None, **args) -> KnowledgeGraph:
    """
    Builds a knowledge graph from the source files under `repo_root`.

    Args:
        repo_root (Path):
            Repository root.

        languages (Iterable[str]):
            Language tags to index, e.g. `{'go', 'python'}`.  Defaults to every shipped extractor.

        workers (int):
            Number of parser threads.

        exclude_dirs (List[str]):
            Directory names that are never indexed.

    Returns:
        KnowledgeGraph:  With a `BuildReport` attached as `report`.

    Raises:
        UnreadablePath:  `repo_root` is not a readable directory.
        NoExtractorAvailable:  No requested language has an extractor, or files exist but none
            matches a requested language.
    """
    start = time.monotonic()
    repo_root = Path(repo_root)
    if not repo_root.is_dir():
        raise UnreadablePath(repo_root, 'not a directory')
    workers: int = args.get('workers', DEFAULTS['workers'])
    exclude_dirs: List[str] = args.get('exclude_dirs', DEFAULTS['exclude_dirs'])
    languages = DEFAULTS['languages'] if languages is None else list(languages)

    # Pick extractors and files.
    extractors = get_extractors(languages)
    if not extractors:
        raise NoExtractorAvailable(f'No extractor ships for any requested language:  {sorted(languages)}.')
    all_files = FileIndex(root=repo_root, exclude_dirs=exclude_dirs).list_files()
    files = [(x, extractor_for_path(x, extractors)) for x in all_files]
    files = [(x, e) for x, e in files if e is not None]
    if all_files and not files:
        raise NoExtractorAvailable(f'No file under {repo_root} matches languages {sorted(languages)}.')
    log.info(f'Indexing {len(files):,} file(s) under:  {repo_root}.')

    # Parse.
    def extract(item: Tuple[str, Extractor]):
        path, extractor = item
        try:
            source = (repo_root / path).read_bytes()
        except OSError as e:
            return None, f'not readable ({e.strerror or e})'
        try:
            return source, extractor.extract(path, source)
        except ParseFailure as e:
            return source, e.reason

    with ThreadPoolExecutor(max_workers=workers) as executor:
        outcomes = list(executor.map(extract, files))

    report = BuildReport()
    digest = hashlib.sha256()
    extracted: List[ExtractedFile] = []
    for (path, _), (source, outcome) in zip(files, outcomes):
        if source is not None:
            digest.update(path.encode('utf-8') + b'\x00' + hashlib.sha256(source).digest())
        if isinstance(outcome, str):
            log.warning(f'Skipping file {path}:  {outcome}')
            report.files_skipped.append((path, outcome))
        else:
            extracted.append(outcome)
    report.files_indexed = len(extracted)

    # Resolve.
    resolver = Resolver(extracted)
    relations = resolver.resolve(report)
    entities = [e for x in extracted for e in x.entities]
    report.elapsed = time.monotonic() - start
    log.info(
        f'Done with {len(entities):,} entities, {len(relations):,} relations.  '
        f'skipped = {len(report.files_skipped)}, unresolved calls = {report.unresolved_calls}, '
        f'elapsed = {report.elapsed:0.2f}s'
    )
    return KnowledgeGraph(entities, relations, digest.hexdigest(), report=report)



class Resolver:
    """
    Turns the pending uses collected by the extractors into relations.

    Note:
        A use resolves only when exactly one entity qualifies.  Candidates are narrowed in this
        order:  the package or module named by an import qualifier, the enclosing class for
        `self`/`cls` calls, names bound by `from ... import`, and finally a name that is unique in
        the whole graph, else unique in the same file, else unique in the same directory.
    """

    def __init__(self, files: List[ExtractedFile]):
        self.files = files
        self.entities: Dict[str, CodeEntity] = {e.id: e for x in files for e in x.entities}
        self.names: Dict[str, List[CodeEntity]] = {}
        for entity in self.entities.values():
            if entity.kind != EntityKind.FILE:
                self.names.setdefault(entity.name, []).append(entity)
        self.paths: Set[str] = {x.path for x in files}
        self.directories: Dict[str, List[str]] = {}
        for x in files:
            self.directories.setdefault(posixpath.dirname(x.path), []).append(x.path)
        self.modules: Dict[str, str] = self._index_python_modules()

    def _index_python_modules(self) -> Dict[str, str]:
        modules = {}
        for x in self.files:
            if x.language != 'python':
                continue
            stem = x.path[:-len('.py')]
            if stem.endswith('/__init__') or stem == '__init__':
                stem = stem[:-len('__init__')].rstrip('/')
            if stem:
                modules[stem.replace('/', '.')] = x.path
        return modules

    def resolve(self, report: BuildReport) -> List[CodeRelation]:
        relations = []
        for x in self.files:
            for parent, child, line in x.contains:
                relations.append(CodeRelation(parent, child, RelationKind.CONTAINS, x.path, line))
            scope = self._import_scope(x, relations, report)
            for ref in x.calls:
                target = self._resolve(ref, x, scope, CALLABLE_KINDS)
                if target is None:
                    report.unresolved_calls += 1
                else:
                    relations.append(CodeRelation(ref.src, target.id, RelationKind.CALLS, ref.path, ref.line))
            for ref in x.references:
                target = self._resolve(ref, x, scope, TYPE_KINDS + (EntityKind.VARIABLE,))
                if target is None:
                    report.unresolved_references += 1
                elif target.id != ref.src:
                    relations.append(CodeRelation(ref.src, target.id, RelationKind.REFERENCES, ref.path, ref.line))
            for ref in x.inherits:
                target = self._resolve(ref, x, scope, TYPE_KINDS)
                if target is None:
                    report.unresolved_references += 1
                else:
                    relations.append(CodeRelation(ref.src, target.id, RelationKind.INHERITS, ref.path, ref.line))
        return list(dict.fromkeys(relations))

    def _import_scope(self, x: ExtractedFile, relations: List[CodeRelation], report: BuildReport) -> Dict:
        """
        Resolves a file's imports into `Imports` edges and a lookup scope.

        Returns:
            Dict:  `aliases` maps a qualifier to the set of files it names; `bound` maps a name
            bound by `from ... import` to the file it was imported from.
        """
        aliases: Dict[str, Set[str]] = {}
        bound: Dict[str, str] = {}
        for imp in x.imports:
            targets: List[str] = []
            if x.language == 'go':
                directory = self._go_package_dir(imp.module)
                if directory is not None:
                    targets = sorted(p for p in self.directories[directory] if p.endswith('.go'))
                    aliases[imp.alias] = set(targets)
            else:
                module_file = self._python_module(imp.module, x.path)
                if not imp.names:
                    if module_file is not None:
                        targets = [module_file]
                        aliases[imp.alias] = {module_file}
                else:
                    for name in imp.names:
                        submodule = self._python_module(_join_module(imp.module, name), x.path)
                        if submodule is not None:
                            targets.append(submodule)
                            aliases[name] = {submodule}
                        elif module_file is not None:
                            targets.append(module_file)
                            bound[name] = module_file
            if not targets:
                report.unresolved_imports += 1
            for target in dict.fromkeys(targets):
                if target != x.path:
                    relations.append(CodeRelation(x.file_id, target, RelationKind.IMPORTS, x.path, imp.line))
        return {'aliases': aliases, 'bound': bound}

    def _go_package_dir(self, import_path: str) -> Optional[str]:
        """Longest repository directory that is a suffix of the import path."""
        best = None
        for directory in self.directories:
            if directory and (import_path == directory or import_path.endswith('/' + directory)):
                if best is None or len(directory) > len(best):
                    best = directory
        return best

    def _python_module(self, module: str, importer: str) -> Optional[str]:
        if module.startswith('.'):
            dots = len(module) - len(module.lstrip('.'))
            base = posixpath.dirname(importer)
            for _ in range(dots - 1):
                base = posixpath.dirname(base)
            rest = module[dots:]
            absolute = '.'.join(x for x in [base.replace('/', '.'), rest] if x)
            return self.modules.get(absolute)
        if module in self.modules:
            return self.modules[module]
        matches = [path for name, path in self.modules.items() if name.endswith('.' + module)]
        return matches[0] if len(matches) == 1 else None

    def _resolve(self, ref: PendingReference, x: ExtractedFile, scope: Dict, kinds: Tuple) -> Optional[CodeEntity]:
        candidates = [e for e in self.names.get(ref.name, []) if e.kind in kinds]
        if not candidates:
            return None
        if ref.qualifier is not None:
            head = ref.qualifier.split('.')[0]
            if ref.qualifier in scope['aliases'] or head in scope['aliases']:
                files = scope['aliases'].get(ref.qualifier) or scope['aliases'][head]
                return _unique([e for e in candidates if e.path in files])
            if ref.qualifier in ('self', 'cls'):
                src = self.entities.get(ref.src)
                if src is not None and src.qualname and '.' in src.qualname:
                    owner = src.qualname.rsplit('.', 1)[0]
                    found = _unique([e for e in candidates if e.path == x.path and e.qualname == f'{owner}.{ref.name}'])
                    if found is not None:
                        return found
        elif ref.name in scope['bound']:
            origin = scope['bound'][ref.name]
            return _unique([e for e in candidates if e.path == origin and '.' not in (e.qualname or e.name)])
        directory = posixpath.dirname(x.path)
        return (
            _unique(candidates)
            or _unique([e for e in candidates if e.path == x.path])
            or _unique([e for e in candidates if posixpath.dirname(e.path) == directory])
        )


def _unique(candidates: List[CodeEntity]) -> Optional[CodeEntity]:
    return candidates[0] if len(candidates) == 1 else None


def _join_module(module: str, name: str) -> str:
    return module + name if module.endswith('.') else f'{module}.{name}'
