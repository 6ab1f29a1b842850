import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence
from repair_agent.ckg.builder import build_graph
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.ckg.query import RankedEntityList, query_entities
from repair_agent.config import RunConfig
from repair_agent.diagnostics_gate.gate import DiagnosticsGate, GateVerdict
from repair_agent.errors import (
    BackendUnavailable, PermissionDenied, RepairAgentError, UnreadablePath,
)
from repair_agent.general_index.search import FileIndex, GrepMatches
from repair_agent.navigator.backends import NavigationKind
from repair_agent.navigator.navigator import Navigator, create_navigator
from repair_agent.navigator.positions import Location, PositionHint
from repair_agent.orchestrator.roles import DEFAULT_MATRIX, AgentRole, Tool, ToolPermissionMatrix, enforce
from repair_agent.orchestrator.trace import Trace
from repair_agent.patch_engine.blocks import EditBlockList, parse_edit_blocks
from repair_agent.patch_engine.editing import EditBatch, apply_edits
from repair_agent.sandbox.runners import CommandRunner, ExecutionResult, create_runner, execute, run_reproduction
from repair_agent.sandbox.workspace import RESERVED_DIR, Workspace
log = logging.getLogger(__name__)



@dataclass
class Resources:
    """Everything the tools of one task work on.  Any field may be missing; tools that need it fail with `BackendUnavailable`."""
    config: RunConfig
    workspace: Optional[Workspace] = None
    graph: Optional[KnowledgeGraph] = None
    navigator: Optional[Navigator] = None
    index: Optional[FileIndex] = None
    gate: Optional[DiagnosticsGate] = None
    runner: Optional[CommandRunner] = None
    trace: Trace = field(default_factory=Trace)
    matrix: ToolPermissionMatrix = DEFAULT_MATRIX

    @property
    def root(self) -> Optional[Path]:
        if self.workspace is not None:
            return self.workspace.root
        return self.index.root if self.index is not None else None

    def read(self, path: str) -> Optional[str]:
        """Text of a file under the root, or None if it does not exist."""
        if self.workspace is not None:
            return self.workspace.read(path)
        target = Path(self.root) / path if self.root is not None else None
        if target is None or not target.is_file():
            return None
        return target.read_text(encoding='utf-8')


@dataclass
class EditOutcome:
    """
    Result of a `CodeEditing` request.

    Attributes:
        applied (bool):
            The edit passed the gate and, unless simulated, was written to the workspace.

        message (str):
            What the agent is told:  the diff on success, the failure otherwise.

        batch (EditBatch):
            The simulated edit.  None if parsing or matching failed.

        verdict (GateVerdict):
            The gate's decision.  None if parsing or matching failed.
    """
    applied: bool
    message: str
    batch: Optional[EditBatch] = None
    verdict: Optional[GateVerdict] = None
    blocks: Optional[EditBlockList] = None



class ToolBox:
    """
    The tools available to one role.

    Every call is checked against the permission matrix before anything happens, and recorded in
    the trace.  A denied call is recorded as a `permission-denied` step without a tool and raises
    `PermissionDenied`.

    Attributes:
        role (AgentRole):
            The acting role.

        resources (Resources):
            Shared task resources.
    """

    def __init__(self, role: AgentRole, resources: Resources):
        self.role = AgentRole(role)
        self.resources = resources

    def _use(self, tool: Tool, action: str, inputs: Any):
        try:
            enforce(self.resources.matrix, self.role, tool)
        except PermissionDenied:
            self.resources.trace.record(self.role, None, 'permission-denied', 'denied', inputs, detail=f'{tool.value} {action}')
            raise

    def _done(self, tool: Tool, action: str, inputs: Any, outputs: Any, status: str = 'ok', detail: str = ''):
        self.resources.trace.record(self.role, tool, action, status, inputs, outputs, detail)

    def _need(self, name: str):
        value = getattr(self.resources, name)
        if value is None:
            raise BackendUnavailable(f'No {name} available to {self.role.value}.')
        return value

    # CKG.

    def query_graph(self, query: str, recognizer: Callable[[str], List[str]] = None) -> RankedEntityList:
        self._use(Tool.CKG, 'query', query)
        result = query_entities(self._need('graph'), query, recognizer=recognizer)
        self._done(Tool.CKG, 'query', query, result.ids, detail=f'{len(result)} entities')
        return result

    def entity_snippet(self, entity_id: str, context: int = 0) -> str:
        self._use(Tool.CKG, 'snippet', entity_id)
        graph, root = self._need('graph'), self._need('root')
        text = graph.snippet(entity_id, root, context)
        self._done(Tool.CKG, 'snippet', entity_id, text, detail=entity_id)
        return text

    # LSP.

    def definition(self, hint: PositionHint) -> List[Location]:
        self._use(Tool.LSP, 'definition', hint)
        navigator = self._need('navigator')
        locations = navigator.navigate(NavigationKind.DEFINITION, navigator.resolve_position(hint))
        self._done(Tool.LSP, 'definition', hint, [x.to_record() for x in locations], detail=f'{hint.path}:{hint.line}')
        return locations

    def references(self, hint: PositionHint) -> List[Location]:
        self._use(Tool.LSP, 'references', hint)
        navigator = self._need('navigator')
        locations = navigator.navigate(NavigationKind.REFERENCES, navigator.resolve_position(hint))
        self._done(Tool.LSP, 'references', hint, [x.to_record() for x in locations], detail=f'{hint.path}:{hint.line}')
        return locations

    # General file indexing.

    def find_file(self, pattern: str) -> List[str]:
        self._use(Tool.GENERAL_FILE_INDEXING, 'find', pattern)
        paths = self._need('index').find_file(pattern)
        self._done(Tool.GENERAL_FILE_INDEXING, 'find', pattern, paths, detail=f'{pattern} -> {len(paths)}')
        return paths

    def grep(self, pattern: str, scope: str = None) -> GrepMatches:
        self._use(Tool.GENERAL_FILE_INDEXING, 'grep', pattern)
        matches = self._need('index').grep(pattern, scope)
        self._done(Tool.GENERAL_FILE_INDEXING, 'grep', [pattern, scope], [x.to_record() for x in matches], detail=f'{pattern} -> {len(matches)}')
        return matches

    def read_lines(self, path: str, start: int = 1, end: int = None) -> str:
        """Lines `start..end` (1-based, inclusive) of a workspace file."""
        self._use(Tool.GENERAL_FILE_INDEXING, 'read', path)
        text = self.resources.read(path)
        if text is None:
            raise UnreadablePath(path, 'no such file in the workspace')
        lines = text.splitlines(keepends=True)
        result = ''.join(lines[max(0, start - 1):end])
        self._done(Tool.GENERAL_FILE_INDEXING, 'read', [path, start, end], result, detail=f'{path}:{start}-{end or len(lines)}')
        return result

    # General bash command.

    def bash(self, command: Sequence[str], timeout: float = None) -> ExecutionResult:
        self._use(Tool.GENERAL_BASH_COMMAND, 'bash', list(command))
        timeout = timeout or self.resources.config.command_timeout
        result = execute(self._need('workspace'), command, timeout, self.resources.runner)
        self._done(Tool.GENERAL_BASH_COMMAND, 'bash', list(command), result.to_record(), detail=f'exit {result.exit_code}')
        return result

    # Code editing.

    def edit(self, text: str, simulate: bool = False) -> EditOutcome:
        """
        Parses edit blocks from `text`, applies them in memory and gates the result.

        Unless `simulate` is set, an accepted edit is written to the workspace.  Failures of
        parsing, matching or the gate are returned as a message, never raised, so they can be
        shown to the agent.
        """
        self._use(Tool.CODE_EDITING, 'simulate' if simulate else 'edit', text)
        workspace, gate = self._need('workspace'), self._need('gate')
        config = self.resources.config
        try:
            blocks = parse_edit_blocks(text)
            batch = apply_edits(blocks, workspace.read, config.fuzzy_threshold, config.context_lines)
        except RepairAgentError as e:
            self._done(Tool.CODE_EDITING, 'edit', text, str(e), 'rejected', detail=str(e))
            return EditOutcome(False, f'Edit failed:  {e}')
        if batch.patch.is_empty():
            self._done(Tool.CODE_EDITING, 'edit', text, '', 'rejected', detail='no change')
            return EditOutcome(False, 'Edit failed:  the edit blocks change nothing.', batch, blocks=blocks)
        verdict = gate.evaluate_patch_set(batch.originals, batch.patch)
        if verdict.accepted and not simulate:
            self.write(batch)
        status = 'ok' if verdict.accepted else 'rejected'
        self._done(Tool.CODE_EDITING, 'simulate' if simulate else 'edit', text, verdict.to_record(), status, detail=', '.join(batch.patch.paths))
        return EditOutcome(verdict.accepted, verdict.message, batch, verdict, blocks)

    def write(self, batch: EditBatch):
        """Writes a gate-accepted batch to the workspace."""
        workspace = self._need('workspace')
        for path, content in batch.contents.items():
            workspace.write(path, content)
        log.info(f'{self.role.value} wrote {len(batch.contents)} file(s):  {sorted(batch.contents)}')

    # Reset repository.

    def reset(self):
        self._use(Tool.RESET_REPOSITORY, 'reset', None)
        workspace = self._need('workspace')
        workspace.reset()
        self._done(Tool.RESET_REPOSITORY, 'reset', None, workspace.snapshot_id(), detail='restored pristine snapshot')

    # Reproduction script execution.

    def run_reproduction(self, script: str) -> ExecutionResult:
        self._use(Tool.REPRODUCTION_SCRIPT_EXECUTION, 'reproduce', script)
        config = self.resources.config
        result = run_reproduction(self._need('workspace'), script, config.interpreter, config.command_timeout, self.resources.runner)
        self._done(
            Tool.REPRODUCTION_SCRIPT_EXECUTION, 'reproduce', script, result.to_record(),
            detail=f'exit {result.exit_code}{" (timed out)" if result.timed_out else ""}',
        )
        return result


def toolboxes(resources: Resources) -> Dict[AgentRole, ToolBox]:
    return {role: ToolBox(role, resources) for role in AgentRole}


def build_resources(config: RunConfig, workspace: Workspace, **args) -> Resources:
    """
    Indexes a workspace and wires up every backend the tools need.

    Args:
        config (RunConfig):
            Limits and backend choices.

        workspace (Workspace):
            The task's working copy.

        **args:
            Optional prebuilt `graph` (KnowledgeGraph) and `trace` (Trace).
    """
    root = workspace.root
    graph = args.get('graph') or build_graph(root, config.languages, workers=config.workers, exclude_dirs=config.exclude_dirs)
    navigator = create_navigator(config, root, graph)
    return Resources(
        config=config,
        workspace=workspace,
        graph=graph,
        navigator=navigator,
        index=FileIndex(root=root, exclude_dirs=[*config.exclude_dirs, RESERVED_DIR], grep_cap=config.grep_cap),
        gate=DiagnosticsGate(provider=navigator),
        runner=create_runner(config),
        trace=args.get('trace') or Trace(path=config.trace_path),
    )
