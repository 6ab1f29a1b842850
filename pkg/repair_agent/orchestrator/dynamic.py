import logging
import re
import shlex
from typing import Dict, List, Optional, Tuple
from repair_agent.errors import BudgetExhausted, ReproductionNotConfirmed
from repair_agent.orchestrator.prompts import PromptLibrary
from repair_agent.orchestrator.providers import CompletionProvider, CompletionRequest
from repair_agent.orchestrator.roles import AgentRole
from repair_agent.orchestrator.searcher import ContextBundle
from repair_agent.orchestrator.task import IssueTask, Route, RouteKind, Solution
from repair_agent.orchestrator.tools import Resources, build_resources, toolboxes
from repair_agent.sandbox.runners import ExecutionResult
from repair_agent.sandbox.workspace import capture_solution_diff
log = logging.getLogger(__name__)


FENCED_PYTHON = re.compile(r'```[ \t]*(?:python3?|py)[ \t]*\n(.*?)```', re.DOTALL | re.IGNORECASE)
FENCED_ANY = re.compile(r'```[^\n]*\n(.*?)```', re.DOTALL)
RESET_DIRECTIVE = re.compile(r'^[ \t]*RESET REPOSITORY[ \t]*$\n?', re.MULTILINE)
EDIT_MARKER = '<<<<<<<'



def extract_script(text: str) -> Optional[str]:
    """The first ```python fenced block of a reply, else its first fenced block of any kind."""
    for pattern in (FENCED_PYTHON, FENCED_ANY):
        match = pattern.search(text or '')
        if match and match.group(1).strip():
            return match.group(1)
    return None



class DynamicRepair:
    """
    The reproduce, edit and retest loop.

        1.  The Reproducer writes a script that should fail while the issue exists.
        2.  The Tester runs it on the original code.  If it passes, the issue is not reproduced and
            the loop stops with `ReproductionNotConfirmed`.
        3.  The Programmer answers with edit blocks, optionally preceded by a `RESET REPOSITORY`
            line.  Edits go through the patch engine and the diagnostics gate; rejected edits are
            never written and the reason goes back to the Programmer.
        4.  After an accepted edit the Tester reruns the script, plus any `test_commands`, and
            reports the outcome to the Programmer.
        5.  The loop ends when the Tester passes a non-empty change, or when the iteration, token
            or time budget runs out.

    Attributes:
        task (IssueTask):
            The issue and its budget.

        context (ContextBundle):
            Searcher output, shown to every role.

        provider (CompletionProvider):
            Answers for every role.

        resources (Resources):
            Workspace, backends and trace of the task.

        route (Route):
            Carried into the solution.
    """

    def __init__(self, task: IssueTask, context: Optional[ContextBundle], provider: CompletionProvider, **args):
        self.task = task
        self.context = context
        self.provider = provider
        self.resources: Resources = args.get('resources') or build_resources(args['config'], task.workspace)
        self.prompts: PromptLibrary = args.get('prompts') or PromptLibrary()
        self.route: Route = args.get('route') or Route(RouteKind.DYNAMIC)
        self.tools = toolboxes(self.resources)
        self.trace = self.resources.trace
        self.config = self.resources.config
        self.resets = 0
        self.history: List[Dict[str, str]] = []

    def ask(self, role: AgentRole, **context) -> Tuple[CompletionRequest, str]:
        self.task.budget.check(self.provider.tokens_used)
        history = self.history if role == AgentRole.PROGRAMMER else None
        request = self.prompts.request(role, history, task=self.task, context=self.context, **context)
        text = self.provider.complete(request)
        self.trace.record(role, None, 'complete', 'ok', request.context, text, detail=f'{len(text):,} chars')
        return request, text

    def reproduce(self) -> Tuple[str, ExecutionResult]:
        """Obtains a reproduction script and confirms that it fails on the original code."""
        feedback, script = None, None
        for _ in range(2):
            _, reply = self.ask(AgentRole.REPRODUCER, feedback=feedback)
            script = extract_script(reply)
            if script:
                break
            feedback = 'Your answer contained no ```python block.  Reply with the script in one fenced block.'
        if not script:
            raise ReproductionNotConfirmed('The Reproducer did not produce a script.')
        result = self.tools[AgentRole.TESTER].run_reproduction(script)
        if result.succeeded:
            self.trace.record('Orchestrator', None, 'reproduction-not-confirmed', 'rejected', script, result.to_record(), detail='script passes on the original code')
            raise ReproductionNotConfirmed('The reproduction script passes on the original code.', result)
        log.info(f'Reproduced the issue!  exit code = {result.exit_code}, timed out = {result.timed_out}')
        return script, result

    def verify(self, script: str, attempt: int) -> Tuple[bool, str]:
        """Reruns the reproduction script and `test_commands` as the Tester."""
        tester = self.tools[AgentRole.TESTER]
        result = tester.run_reproduction(script)
        extras = [(x, tester.bash(shlex.split(x))) for x in self.config.test_commands]
        resolved = result.succeeded and all(x.succeeded for _, x in extras)
        report = self.prompts.render('tester.j2', attempt=attempt, resolved=resolved, result=result, extras=extras)
        self.trace.record(AgentRole.TESTER, None, 'verdict', 'ok' if resolved else 'rejected', result.to_record(), report, detail=f'attempt {attempt}')
        return resolved, report

    def reset(self) -> str:
        if self.resets >= self.task.budget.max_resets:
            self.trace.record(AgentRole.PROGRAMMER, None, 'reset-refused', 'rejected', self.resets, detail=f'limit {self.task.budget.max_resets}')
            return f'The repository was not reset:  the limit of {self.task.budget.max_resets} reset(s) is used up.'
        self.tools[AgentRole.PROGRAMMER].reset()
        self.resets += 1
        return 'The repository was reset to its original state.'

    def run(self) -> Solution:
        script, result = self.reproduce()
        feedback = result.summary()
        attempt = 0
        for attempt in range(1, self.task.budget.max_iterations + 1):

            # Programmer.
            try:
                request, reply = self.ask(
                    AgentRole.PROGRAMMER, script=script, feedback=feedback, attempt=attempt,
                    max_iterations=self.task.budget.max_iterations,
                )
            except BudgetExhausted as e:
                log.warning(f'Stopping the repair loop:  {e}')
                self.trace.record('Orchestrator', None, 'budget-exhausted', 'rejected', attempt, detail=str(e))
                attempt -= 1
                break
            self.history = [{'role': 'user', 'content': request.context}, {'role': 'assistant', 'content': reply}]
            notes = []
            if RESET_DIRECTIVE.search(reply):
                notes.append(self.reset())
                reply = RESET_DIRECTIVE.sub('', reply)
            if EDIT_MARKER not in reply:
                feedback = '\n'.join(notes + ['Your answer contained no edit blocks.'])
                continue
            outcome = self.tools[AgentRole.PROGRAMMER].edit(reply)
            if not outcome.applied:
                feedback = '\n'.join(notes + [outcome.message])
                continue

            # Tester.
            resolved, report = self.verify(script, attempt)
            feedback = '\n'.join(notes + [outcome.message, report])
            if not resolved:
                continue
            diff = capture_solution_diff(self.resources.workspace, self.config.context_lines)
            if diff.is_empty():
                feedback += '\nThe script passes, but the repository has no changes left.'
                continue
            log.info(f'Resolved the issue!  attempt = {attempt}, files = {diff.paths}')
            return Solution(diff, self.route, list(self.trace.events), True, attempt)

        # Budget spent.
        diff = capture_solution_diff(self.resources.workspace, self.config.context_lines)
        log.info(f'Dynamic route ended unresolved after {attempt} attempt(s).')
        return Solution(diff, self.route, list(self.trace.events), False, attempt)


def run_dynamic(task: IssueTask, context: Optional[ContextBundle], provider: CompletionProvider, **args) -> Solution:
    """
    Repairs an issue on the dynamic route.  See `DynamicRepair`.

    Raises:
        ReproductionNotConfirmed:  The script passes on the original code, or none was produced.
        BudgetExhausted:  The budget ran out before the issue was reproduced.
    """
    return DynamicRepair(task, context, provider, **args).run()
