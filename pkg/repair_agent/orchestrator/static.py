import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple
from repair_agent.ckg.extractors import extractor_for_path, walk
from repair_agent.errors import AllCandidatesRejected
from repair_agent.orchestrator.prompts import PromptLibrary
from repair_agent.orchestrator.providers import CompletionProvider
from repair_agent.orchestrator.roles import AgentRole
from repair_agent.orchestrator.searcher import ContextBundle
from repair_agent.orchestrator.task import IssueTask, Route, RouteKind, Solution
from repair_agent.orchestrator.tools import EditOutcome, Resources, build_resources, toolboxes
log = logging.getLogger(__name__)


CANDIDATE_HEADER = re.compile(r'^#{2,4}[ \t]*Candidate[ \t]+(\d+)[^\n]*$', re.MULTILINE | re.IGNORECASE)



@dataclass
class Candidate:
    """
    One proposed fix of the static route.

    Attributes:
        index (int):
            Position in the Editor's answer, from 1.

        text (str):
            The candidate's edit blocks.

        outcome (EditOutcome):
            Simulated application and gate verdict.

        key (Tuple):
            Structural form of the patched files.  Candidates with equal keys are the same fix.
    """
    index: int
    text: str
    outcome: Optional[EditOutcome] = None
    key: Optional[Tuple] = None

    @property
    def accepted(self) -> bool:
        return self.outcome is not None and self.outcome.applied


@dataclass
class Vote:
    """The outcome of pooling candidates:  pool sizes keyed by each pool's first candidate."""
    winner: Candidate
    pools: Dict[int, List[int]] = field(default_factory=dict)

    @property
    def counts(self) -> Dict[int, int]:
        return {k: len(v) for k, v in self.pools.items()}



def split_candidates(text: str) -> List[str]:
    """
    Splits an Editor answer at `#### Candidate <k>` headers.

    Text before the first header is dropped.  An answer without headers is a single candidate.
    """
    headers = list(CANDIDATE_HEADER.finditer(text or ''))
    if not headers:
        return [text] if text and text.strip() else []
    ends = [x.start() for x in headers[1:]] + [len(text)]
    return [text[h.end():end].strip('\n') + '\n' for h, end in zip(headers, ends)]


def normalize_source(path: str, content: Optional[str]) -> str:
    """
    Structural form of a file:  the parse tree's leaf tokens without comments, joined by single
    spaces.  Files without a grammar fall back to their non-blank lines with whitespace collapsed.
    """
    if not content:
        return ''
    extractor = extractor_for_path(path)
    if extractor is not None:
        source = content.encode('utf-8')
        tree = extractor.parse(source)
        leaves = [
            source[x.start_byte:x.end_byte].decode('utf-8', errors='replace')
            for x in walk(tree.root_node)
            if x.child_count == 0 and 'comment' not in x.type and x.end_byte > x.start_byte
        ]
        return ' '.join(leaves)
    lines = [' '.join(x.split()) for x in content.split('\n')]
    return '\n'.join(x for x in lines if x)


def structural_key(contents: Mapping[str, Optional[str]]) -> Tuple:
    return tuple(sorted((path, normalize_source(path, text)) for path, text in contents.items()))


def vote(candidates: List[Candidate]) -> Vote:
    """
    Pools accepted candidates with equal structural keys and picks the largest pool.

    Ties go to the pool whose first candidate came earliest, so the result depends only on the
    candidate list.

    Raises:
        AllCandidatesRejected:  No candidate was accepted.
    """
    pools: Dict[Tuple, List[Candidate]] = {}
    for candidate in sorted(candidates, key=lambda x: x.index):
        if candidate.accepted:
            pools.setdefault(candidate.key, []).append(candidate)
    if not pools:
        reasons = [f'Candidate {x.index}:  {x.outcome.message if x.outcome else "not evaluated"}' for x in candidates]
        raise AllCandidatesRejected(f'All {len(candidates)} candidate(s) were rejected.', reasons)
    best = min(pools.values(), key=lambda x: (-len(x), x[0].index))
    return Vote(winner=best[0], pools={x[0].index: [c.index for c in x] for x in pools.values()})



def run_static(task: IssueTask, context: Optional[ContextBundle], provider: CompletionProvider, n_candidates: int = None, **args) -> Solution:
    """
    Repairs an issue on the static route.

    The Editor is asked once for `n_candidates` alternative fixes.  Each is applied in simulation
    and checked by the diagnostics gate; candidates may be checked concurrently since nothing is
    written.  Accepted candidates are normalized structurally, identical ones pool their votes, and
    the first candidate of the largest pool is written to the workspace.

    Args:
        task (IssueTask):
            The issue.

        context (ContextBundle):
            Searcher output.

        provider (CompletionProvider):
            Answers as the Editor.

        n_candidates (int):
            Candidates requested.  Defaults to the config value.

        **args:
            `resources` (Resources) or `config` (RunConfig), and optional `prompts` and `route`.

    Returns:
        Solution:  Resolved, with the winner's diff and the vote counts.

    Raises:
        AllCandidatesRejected:  Every candidate failed matching or the gate, or the answer held no
            candidate at all.
    """
    resources: Resources = args.get('resources') or build_resources(args['config'], task.workspace)
    prompts: PromptLibrary = args.get('prompts') or PromptLibrary()
    route: Route = args.get('route') or Route(RouteKind.STATIC)
    config, trace = resources.config, resources.trace
    n_candidates = n_candidates or config.n_candidates
    editor = toolboxes(resources)[AgentRole.EDITOR]

    # Ask.
    task.budget.check(provider.tokens_used)
    request = prompts.request(AgentRole.EDITOR, task=task, context=context, n_candidates=n_candidates)
    answer = provider.complete(request)
    trace.record(AgentRole.EDITOR, None, 'complete', 'ok', request.context, answer, detail=f'{n_candidates} candidates requested')
    candidates = [Candidate(i, x) for i, x in enumerate(split_candidates(answer), start=1)]
    if len(candidates) != n_candidates:
        log.warning(f'Editor returned {len(candidates)} candidate(s), {n_candidates} requested.')
    if not candidates:
        raise AllCandidatesRejected('The Editor answer contains no candidate.')

    # Simulate and gate.
    def evaluate(candidate: Candidate) -> Candidate:
        candidate.outcome = editor.edit(candidate.text, simulate=True)
        if candidate.accepted:
            candidate.key = structural_key(candidate.outcome.batch.contents)
        return candidate

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        candidates = list(executor.map(evaluate, candidates))

    # Vote.
    result = vote(candidates)
    winner = result.winner
    editor.write(winner.outcome.batch)
    trace.record(
        'Orchestrator', None, 'vote', 'ok', [x.key for x in candidates if x.key], result.counts,
        detail=f'candidate {winner.index} wins with {len(result.pools[winner.index])} vote(s)',
    )
    log.info(f'Static route chose candidate {winner.index}!  votes = {result.counts}')
    return Solution(winner.outcome.batch.patch, route, list(trace.events), True, len(candidates), result.counts)
