import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional
from repair_agent.config import DEFAULTS, RunConfig
from repair_agent.errors import BudgetExhausted, ConfigError, UnreadablePath
from repair_agent.orchestrator.trace import TraceEvent
from repair_agent.patch_engine.diffs import PatchSet
from repair_agent.sandbox.workspace import Workspace
log = logging.getLogger(__name__)



class Budget:
    """
    Limits of one task.

    Attributes:
        max_iterations (int):
            Programmer/Tester rounds of the dynamic route.

        max_resets (int):
            Repository resets the Programmer may request.

        max_tokens (int):
            Tokens all completions of the task may consume together.

        wall_clock (float):
            Seconds the task may run.
    """

    def __init__(self, **args):
        self.max_iterations: int = args.get('max_iterations', DEFAULTS['max_iterations'])
        self.max_resets: int = args.get('max_resets', DEFAULTS['max_resets'])
        self.max_tokens: int = args.get('max_tokens', DEFAULTS['max_tokens'])
        self.wall_clock: float = args.get('wall_clock', DEFAULTS['wall_clock'])
        if min(self.max_iterations, self.max_tokens, self.wall_clock) <= 0 or self.max_resets < 0:
            raise ConfigError('Budget limits must be positive.')
        self.started = time.monotonic()

    @classmethod
    def from_config(cls, config: RunConfig) -> 'Budget':
        return cls(
            max_iterations=config.max_iterations, max_resets=config.max_resets,
            max_tokens=config.max_tokens, wall_clock=config.wall_clock,
        )

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def check(self, tokens_used: int = 0):
        """Raises `BudgetExhausted` when the token or time limit is spent."""
        if tokens_used > self.max_tokens:
            raise BudgetExhausted(f'Token budget exhausted:  {tokens_used:,} > {self.max_tokens:,}.')
        if self.elapsed > self.wall_clock:
            raise BudgetExhausted(f'Wall-clock budget exhausted:  {self.elapsed:0.0f}s > {self.wall_clock:0.0f}s.')



@dataclass
class IssueTask:
    """An issue to resolve in a workspace."""
    title: str
    body: str
    workspace: Optional[Workspace] = None
    budget: Budget = field(default_factory=Budget)

    def __post_init__(self):
        if not self.body or not self.body.strip():
            raise ConfigError('The issue body must not be empty.')

    @property
    def text(self) -> str:
        return f'{self.title}\n\n{self.body}'

    @classmethod
    def from_file(cls, path: Path, **args) -> 'IssueTask':
        """Reads an issue file.  The first non-blank line, without leading `#`, is the title; the whole file is the body."""
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise UnreadablePath(path, str(e)) from e
        title = next((x.strip().lstrip('#').strip() for x in text.split('\n') if x.strip()), '')
        return cls(title=title, body=text, **args)


class RouteKind(str, Enum):
    DYNAMIC = 'Dynamic'
    STATIC = 'Static'


@dataclass(frozen=True)
class Route:
    kind: RouteKind
    rationale: str = ''


@dataclass
class Solution:
    """
    Outcome of a task.

    Attributes:
        diff (PatchSet):
            The repair, relative to the pristine repository.

        route (Route):
            The route that produced it.

        trace (List[TraceEvent]):
            Every step of the task.

        resolved (bool):
            The Tester confirmed the fix (dynamic route), or the winning candidate passed the gate
            (static route).  A resolved solution always has a non-empty diff.

        attempts (int):
            Programmer attempts (dynamic) or candidates considered (static).

        votes (Dict[int, int]):
            Static route only:  votes per pooled candidate, keyed by the representative's index.
    """
    diff: PatchSet
    route: Route
    trace: List[TraceEvent] = field(default_factory=list)
    resolved: bool = False
    attempts: int = 0
    votes: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.resolved and self.diff.is_empty():
            raise ValueError('A resolved solution needs a non-empty diff.')

    def to_record(self) -> Dict:
        return {
            'resolved': self.resolved,
            'route': self.route.kind.value,
            'rationale': self.route.rationale,
            'attempts': self.attempts,
            'votes': {str(k): v for k, v in self.votes.items()},
            'files': self.diff.paths,
            'diff': self.diff.to_text(),
            'trace_events': len(self.trace),
        }
