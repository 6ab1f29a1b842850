import logging
import re
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple
from repair_agent.ckg.entities import EntityKind
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.config import RunConfig
from repair_agent.errors import EmptyContext, ProviderError, RepairAgentError
from repair_agent.general_index.search import FileIndex
from repair_agent.navigator.navigator import Navigator
from repair_agent.navigator.positions import PositionHint, identifier_tokens
from repair_agent.orchestrator.prompts import PromptLibrary
from repair_agent.orchestrator.providers import CompletionProvider
from repair_agent.orchestrator.roles import AgentRole, Tool
from repair_agent.orchestrator.task import IssueTask
from repair_agent.orchestrator.tools import Resources, ToolBox
log = logging.getLogger(__name__)


# `File "pkg/mod.py", line 12` (Python) and `pkg/file.go:12` (Go, compilers, pytest).
PYTHON_FRAME = re.compile(r'File "([^"\n]+)", line (\d+)')
PATH_LINE_FRAME = re.compile(r'([\w./\\-]+\.(?:py|go)):(\d+)')
QUOTED = re.compile(r'''["'`]([^"'`\n]{6,80})["'`]''')
FILE_MENTION = re.compile(r'\b([\w./-]+\.(?:py|go))\b')
RECOGNIZED = re.compile(r'[A-Za-z_][\w.]*')



@dataclass(frozen=True)
class Snippet:
    """
    A span of code retrieved for an issue.

    Attributes:
        path (str):
            File, relative to the workspace root.

        start_line, end_line (int):
            1-based inclusive span.

        text (str):
            The code.

        provenance (str):
            The tool that surfaced it:  `CKG`, `LSP` or `GeneralFileIndexing`.

        entity_id (str):
            Graph entity the snippet shows, if any.

        score (float):
            Retrieval score of the entity, if ranked.
    """
    path: str
    start_line: int
    end_line: int
    text: str
    provenance: str
    entity_id: Optional[str] = None
    score: float = 0.0

    def covers(self, other: 'Snippet') -> bool:
        return self.path == other.path and self.start_line <= other.start_line and other.end_line <= self.end_line

    def to_record(self) -> Dict:
        return asdict(self)


@dataclass
class ContextBundle:
    """Retrieved snippets in rank order, plus every file the retrieval touched."""
    snippets: List[Snippet] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    def __bool__(self):
        return bool(self.snippets or self.files)

    def add(self, snippet: Snippet) -> bool:
        """Adds a snippet unless an earlier one already covers it."""
        if any(x.covers(snippet) for x in self.snippets):
            return False
        self.snippets = [x for x in self.snippets if not snippet.covers(x)]
        self.snippets.append(snippet)
        self.add_file(snippet.path)
        return True

    def add_file(self, path: str):
        if path not in self.files:
            self.files.append(path)

    def to_record(self) -> Dict:
        return {'snippets': [x.to_record() for x in self.snippets], 'files': list(self.files)}



def traceback_frames(text: str) -> List[Tuple[str, int]]:
    """`(path, line)` pairs of every stack frame or `file:line` reference in an issue, in order, without duplicates."""
    frames = []
    for pattern in (PYTHON_FRAME, PATH_LINE_FRAME):
        for match in pattern.finditer(text):
            frames.append((match.group(1).replace('\\', '/'), int(match.group(2))))
    frames.sort(key=lambda x: text.find(x[0]))
    return list(dict.fromkeys(frames))


def map_to_workspace(path: str, files: List[str]) -> Optional[str]:
    """Maps a path from a stack trace, often absolute or from another checkout, to the longest matching workspace file."""
    while path.startswith('./'):
        path = path[2:]
    if path in files:
        return path
    matches = [x for x in files if path.endswith('/' + x)]
    return max(matches, key=len) if matches else None


def parse_recognized(text: str) -> List[str]:
    """Identifiers listed in a Searcher reply, one per line, bullets and backticks stripped."""
    names = []
    for line in text.split('\n'):
        match = RECOGNIZED.search(line.strip().lstrip('-*').strip().strip('`'))
        if match:
            names.append(match.group().split('.')[-1])
    return list(dict.fromkeys(names))


def enclosing_entity(graph: KnowledgeGraph, path: str, line: int):
    """Innermost non-file entity spanning `path:line`, or None."""
    spans = [
        x for x in graph.entities.values()
        if x.path == path and x.kind != EntityKind.FILE and x.start_line <= line <= x.end_line
    ]
    return min(spans, key=lambda x: (x.end_line - x.start_line, x.id)) if spans else None



def search_context(
    task: IssueTask,
    graph: KnowledgeGraph,
    navigator: Optional[Navigator],
    index: FileIndex,
    provider: Optional[CompletionProvider] = None,
    **args,
) -> ContextBundle:
    """
    Collects the code an issue is about.

    Retrieval runs in four passes, each adding only what earlier passes did not cover:

        1.  Stack frames and `file:line` references in the issue are mapped to workspace files and
            the lines around them are read with the file index.
        2.  Identifiers on those frame lines that name graph entities are followed to their
            definitions with the navigator.
        3.  The issue text is run as a CKG query.  The provider, asked as the Searcher, serves as
            the entity recognizer; if it fails, the query's own identifiers are used.
        4.  File names and quoted strings in the issue are looked up with `find_file` and `grep`.

    Args:
        task (IssueTask):
            The issue.

        graph, navigator, index:
            Retrieval backends over the task workspace.  The navigator may be None.

        provider (CompletionProvider):
            Optional entity recognizer.

        **args:
            `config` (RunConfig) for limits, `trace` (Trace), `prompts` (PromptLibrary) and
            `toolbox` (ToolBox) to reuse an existing Searcher toolbox.

    Returns:
        ContextBundle:  At most `max_snippets` snippets.

    Raises:
        EmptyContext:  Nothing was retrieved.
    """
    config: RunConfig = args.get('config') or RunConfig()
    toolbox: ToolBox = args.get('toolbox')
    if toolbox is None:
        resources = Resources(config=config, workspace=task.workspace, graph=graph, navigator=navigator, index=index)
        if args.get('trace') is not None:
            resources.trace = args['trace']
        toolbox = ToolBox(AgentRole.SEARCHER, resources)
    trace = toolbox.resources.trace
    max_snippets, radius = config.max_snippets, config.context_lines
    prompts: PromptLibrary = args.get('prompts') or PromptLibrary()
    bundle = ContextBundle()
    files = index.list_files()

    def full():
        return len(bundle.snippets) >= max_snippets

    def add_entity(entity_id: str, provenance: Tool, score: float = 0.0):
        entity = graph.entity(entity_id)
        text = toolbox.entity_snippet(entity_id)
        bundle.add(Snippet(entity.path, entity.start_line, entity.end_line, text, provenance.value, entity_id, score))

    # Stack frames.
    frames = [(map_to_workspace(p, files), n) for p, n in traceback_frames(task.body)]
    frames = [(p, n) for p, n in frames if p is not None]
    for path, line in frames:
        if full():
            break
        try:
            start = max(1, line - radius)
            text = toolbox.read_lines(path, start, line + radius)
        except RepairAgentError as e:
            log.debug(f'Frame {path}:{line} skipped:  {e}')
            continue
        if text:
            bundle.add(Snippet(path, start, start + len(text.splitlines()) - 1, text, Tool.GENERAL_FILE_INDEXING.value))

    # Definitions of what the frame lines use.
    if navigator is not None:
        for path, line in frames:
            text = toolbox.resources.read(path) or ''
            for _, token in identifier_tokens(path, text).get(line, []):
                if full():
                    break
                if not graph.by_name(token):
                    continue
                try:
                    locations = toolbox.definition(PositionHint(path, line, identifier=token))
                except RepairAgentError as e:
                    log.debug(f'No definition for {token} at {path}:{line}:  {e}')
                    continue
                for location in locations:
                    entity = enclosing_entity(graph, location.path, location.line)
                    if entity is not None and not full():
                        add_entity(entity.id, Tool.LSP)

    # Knowledge graph.
    def recognize(query: str) -> List[str]:
        request = prompts.request(AgentRole.SEARCHER, task=task)
        try:
            reply = provider.complete(request)
        except ProviderError:
            trace.record(AgentRole.SEARCHER, None, 'complete', 'error', request.context)
            raise
        trace.record(AgentRole.SEARCHER, None, 'complete', 'ok', request.context, reply)
        return parse_recognized(reply)

    try:
        ranked = toolbox.query_graph(task.text, recognizer=recognize if provider is not None else None)
    except RepairAgentError as e:
        log.warning(f'Graph query failed:  {e}')
        ranked = []
    for entity_id, score in ranked:
        if full() or score <= 0:
            break
        if graph.entity(entity_id).kind != EntityKind.FILE:
            add_entity(entity_id, Tool.CKG, score)

    # File names and literal strings.
    for name in dict.fromkeys(FILE_MENTION.findall(task.text)):
        try:
            found = toolbox.find_file(name) or (toolbox.find_file(name.split('/')[-1]) if '/' in name else [])
        except RepairAgentError:
            continue
        for path in found:
            bundle.add_file(path)
    for literal in dict.fromkeys(QUOTED.findall(task.body)):
        try:
            matches = toolbox.grep(re.escape(literal))
        except RepairAgentError:
            continue
        for match in matches:
            bundle.add_file(match.path)
            if not full():
                start = max(1, match.line - radius)
                text = toolbox.read_lines(match.path, start, match.line + radius)
                bundle.add(Snippet(match.path, start, start + len(text.splitlines()) - 1, text, Tool.GENERAL_FILE_INDEXING.value))

    # Log.
    if not bundle:
        raise EmptyContext(f'Nothing in the repository matched the issue:  {task.title!r}.')
    log.info(f'Collected context!  snippets = {len(bundle.snippets)}, files = {len(bundle.files)}')
    return bundle
