import logging
import re
from typing import Optional
from repair_agent.errors import ProviderError
from repair_agent.orchestrator.prompts import PromptLibrary
from repair_agent.orchestrator.providers import CompletionProvider
from repair_agent.orchestrator.roles import AgentRole
from repair_agent.orchestrator.searcher import ContextBundle
from repair_agent.orchestrator.task import IssueTask, Route, RouteKind
from repair_agent.orchestrator.trace import Trace
log = logging.getLogger(__name__)


ROUTE_LINE = re.compile(r'route\s*[:=]\s*\**\s*(dynamic|static)\b', re.IGNORECASE)
ROUTE_WORD = re.compile(r'\b(dynamic|static)\b', re.IGNORECASE)

# Issues the classifier cannot place go to the static route, the more common one.
FALLBACK_ROUTE = RouteKind.STATIC



def parse_route(text: str) -> Optional[RouteKind]:
    """
    Reads a route label from a Planner answer.

    An explicit `Route: <label>` line wins.  Otherwise the answer must name exactly one of the two
    labels; an answer naming both, or neither, is unparseable.
    """
    if not text:
        return None
    match = ROUTE_LINE.search(text)
    if match:
        return RouteKind(match.group(1).capitalize())
    labels = {x.lower() for x in ROUTE_WORD.findall(text)}
    if len(labels) == 1:
        return RouteKind(labels.pop().capitalize())
    return None


def plan_route(task: IssueTask, context: Optional[ContextBundle], provider: CompletionProvider, **args) -> Route:
    """
    Asks the Planner whether the issue is repaired dynamically (reproduce, edit, retest) or
    statically (propose and vote on candidate edits).

    The answer is parsed strictly.  An unparseable answer, or a provider failure, is retried once;
    if the second answer is no better, the static route is chosen.  The function therefore always
    returns a route.

    Args:
        task (IssueTask):
            The issue.

        context (ContextBundle):
            Everything the Searcher found, possibly empty.

        provider (CompletionProvider):
            Answers as the Planner.

        **args:
            Optional `trace` (Trace) and `prompts` (PromptLibrary).

    Returns:
        Route:  The chosen route and the Planner's answer as rationale.
    """
    trace: Trace = args.get('trace') or Trace()
    prompts: PromptLibrary = args.get('prompts') or PromptLibrary()
    request = prompts.request(AgentRole.PLANNER, task=task, context=context)
    answer = ''
    for attempt in range(1, 3):
        try:
            answer = provider.complete(request)
        except ProviderError as e:
            log.warning(f'Planner attempt {attempt} failed:  {e}')
            trace.record(AgentRole.PLANNER, None, 'complete', 'error', request.context, str(e), detail=str(e))
            continue
        kind = parse_route(answer)
        trace.record(AgentRole.PLANNER, None, 'complete', 'ok' if kind else 'rejected', request.context, answer, detail=f'route {kind.value if kind else "unparseable"}')
        if kind is not None:
            log.info(f'Planner chose the {kind.value} route.')
            return Route(kind, answer.strip())
        log.warning(f'Planner answer names no route (attempt {attempt}):  {answer[:200]!r}')

    # Fallback.
    log.info(f'Planner gave no usable answer; using the {FALLBACK_ROUTE.value} route.')
    trace.record('Orchestrator', None, 'route-fallback', 'ok', answer, FALLBACK_ROUTE.value, detail=f'defaulted to {FALLBACK_ROUTE.value}')
    return Route(FALLBACK_ROUTE, f'Fallback after unparseable answers.  Last answer:  {answer.strip()}'.strip())
