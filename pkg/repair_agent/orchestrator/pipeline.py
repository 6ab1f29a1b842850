import logging
from pathlib import Path
from typing import Optional
from repair_agent.config import RunConfig
from repair_agent.errors import AllCandidatesRejected, BudgetExhausted, ConfigError, EmptyContext, ReproductionNotConfirmed
from repair_agent.orchestrator.dynamic import run_dynamic
from repair_agent.orchestrator.planner import plan_route
from repair_agent.orchestrator.prompts import PromptLibrary
from repair_agent.orchestrator.providers import CompletionProvider, create_provider
from repair_agent.orchestrator.roles import AgentRole
from repair_agent.orchestrator.searcher import ContextBundle, search_context
from repair_agent.orchestrator.static import run_static
from repair_agent.orchestrator.task import Budget, IssueTask, Route, RouteKind, Solution
from repair_agent.orchestrator.tools import ToolBox, build_resources
from repair_agent.orchestrator.trace import Trace
from repair_agent.patch_engine.diffs import PatchSet
from repair_agent.sandbox.workspace import Workspace, capture_solution_diff
log = logging.getLogger(__name__)



class RepairPipeline:
    """
    Runs one issue end to end:  retrieval, route planning, then the dynamic or static route.

    Attributes:
        config (RunConfig):
            Limits and backend choices.

        provider (CompletionProvider):
            Answers for every role.  Defaults to the provider `config` selects.

        prompts (PromptLibrary):
            Role prompts.

    Note:
        A dynamic route that cannot reproduce the issue is rerouted to the static route.  Budget
        exhaustion and a fully rejected static route end the task unresolved instead of failing it.
    """

    def __init__(self, config: RunConfig, **args):
        self.config = config
        self.provider: CompletionProvider = args.get('provider') or create_provider(config)
        self.prompts: PromptLibrary = args.get('prompts') or PromptLibrary()
        log.info(f'Constructed new RepairPipeline!  provider = {type(self.provider).__name__}, repo = {config.repo}')

    def solve(self, task: IssueTask) -> Solution:
        """Repairs `task` in its workspace, which must be set."""
        resources = build_resources(self.config, task.workspace, trace=Trace(path=self.config.trace_path, task=task.title))
        trace = resources.trace
        route: Optional[Route] = None
        try:
            # Search.
            try:
                context = search_context(
                    task, resources.graph, resources.navigator, resources.index, self.provider,
                    config=self.config, prompts=self.prompts, toolbox=ToolBox(AgentRole.SEARCHER, resources),
                )
            except EmptyContext as e:
                log.warning(f'{e}  Planning without context.')
                trace.record('Orchestrator', None, 'empty-context', 'rejected', task.text, detail=str(e))
                context = ContextBundle()

            # Plan.
            route = plan_route(task, context, self.provider, trace=trace, prompts=self.prompts)
            trace.record('Orchestrator', None, 'route', 'ok', route.rationale, route.kind.value, detail=route.kind.value)

            # Repair.
            if route.kind == RouteKind.DYNAMIC:
                try:
                    return run_dynamic(task, context, self.provider, resources=resources, prompts=self.prompts, route=route)
                except ReproductionNotConfirmed as e:
                    log.warning(f'{e}  Rerouting to the static route.')
                    trace.record('Orchestrator', None, 'reroute', 'ok', str(e), RouteKind.STATIC.value, detail=f'{e} Rerouted to Static.')
                    resources.workspace.reset()
                    route = Route(RouteKind.STATIC, f'Rerouted:  {e}')
            try:
                return run_static(task, context, self.provider, resources=resources, prompts=self.prompts, route=route)
            except AllCandidatesRejected as e:
                log.warning(f'{e}  Reasons:  {e.reasons}')
                trace.record('Orchestrator', None, 'all-rejected', 'rejected', e.reasons, detail=str(e))
                return Solution(PatchSet(), route, list(trace.events), False, len(e.reasons))
        except BudgetExhausted as e:
            log.warning(f'Task stopped:  {e}')
            trace.record('Orchestrator', None, 'budget-exhausted', 'rejected', detail=str(e))
            diff = capture_solution_diff(task.workspace, self.config.context_lines)
            return Solution(diff, route or Route(RouteKind.STATIC, str(e)), list(trace.events), False)
        finally:
            resources.navigator.close()


def solve(issue: Path, config: RunConfig, provider: CompletionProvider = None, **args) -> Solution:
    """
    Resolves the issue in file `issue` against the repository `config.repo`.

    The repository itself is never modified:  the task runs in a temporary workspace copy, which is
    removed afterwards.  The repair is returned as a diff.

    Args:
        issue (Path):
            Issue text file.  Its first non-blank line is the title.

        config (RunConfig):
            Must name `repo`.

        provider (CompletionProvider):
            Optional.  Defaults to the provider `config` selects.

        **args:
            Optional `prompts` (PromptLibrary) and `workspace_parent` (Path) for the temp copy.

    Returns:
        Solution:  Resolved or not, with diff, route and trace.
    """
    if config.repo is None:
        raise ConfigError('No repository given.')
    pipeline = RepairPipeline(config, provider=provider, prompts=args.get('prompts'))
    with Workspace(source=config.repo, exclude_dirs=config.exclude_dirs, parent=args.get('workspace_parent')) as workspace:
        task = IssueTask.from_file(issue, workspace=workspace, budget=Budget.from_config(config))
        return pipeline.solve(task)
