import logging
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Sequence
from repair_agent.config import DEFAULTS
from repair_agent.errors import AmbiguousExactMatch, NoAcceptableMatch
log = logging.getLogger(__name__)



class MatchStrategy(str, Enum):
    EXACT = 'Exact'
    WHITESPACE_NORMALIZED = 'WhitespaceNormalized'
    FUZZY = 'Fuzzy'


@dataclass(frozen=True)
class MatchResult:
    """A located segment:  1-based inclusive lines, similarity score, and the strategy that found it."""
    start_line: int
    end_line: int
    score: float
    strategy: MatchStrategy

    def to_record(self) -> Dict:
        record = asdict(self)
        record['strategy'] = self.strategy.value
        return record



def split_lines(content: str) -> List[str]:
    """Lines without endings.  A final newline does not start another line; `\\r\\n` counts as one ending."""
    lines = content.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    return [x[:-1] if x.endswith('\r') else x for x in lines]


@lru_cache(maxsize=65536)
def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance (unit-cost insert, delete, substitute)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


def line_similarity(a: str, b: str) -> float:
    """`1 - distance / max length` on whitespace-trimmed lines; two blank lines are identical."""
    a, b = a.strip(), b.strip()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


def window_score(lines: Sequence[str], start: int, search: Sequence[str]) -> float:
    """Mean per-line similarity of `search` against `lines[start:start + len(search)]` (0-based start)."""
    return sum(line_similarity(lines[start + i], x) for i, x in enumerate(search)) / len(search)


def _normalize(line: str) -> str:
    return ' '.join(line.split())


def locate_match(content: str, search: Sequence[str], threshold: float = DEFAULTS['fuzzy_threshold']) -> MatchResult:
    """
    Finds the segment of `content` that a search block refers to.

    Strategies are tried in order:

        1.  Exact:  identical lines.  Exactly one occurrence is required.

        2.  WhitespaceNormalized:  lines equal after collapsing runs of whitespace and trimming.
            The earliest window wins.

        3.  Fuzzy:  every window of `len(search)` lines is scored by mean per-line similarity; the
            best window wins if its score reaches `threshold`.  The earliest window wins ties.

    Raises:
        AmbiguousExactMatch:  The search block occurs verbatim more than once.
        NoAcceptableMatch:  The best fuzzy score is below `threshold`; carries that score and
            window.
    """
    search = list(search)
    if not search:
        raise ValueError('locate_match needs a non-empty search block.')
    lines = split_lines(content or '')
    n = len(search)
    windows = range(len(lines) - n + 1)

    # Exact.
    starts = [i for i in windows if lines[i:i + n] == search]
    if len(starts) > 1:
        raise AmbiguousExactMatch([x + 1 for x in starts])
    if starts:
        return MatchResult(starts[0] + 1, starts[0] + n, 1.0, MatchStrategy.EXACT)

    # Whitespace-normalized.
    normalized_search = [_normalize(x) for x in search]
    normalized = [_normalize(x) for x in lines]
    for i in windows:
        if normalized[i:i + n] == normalized_search:
            log.debug(f'Whitespace-normalized match at line {i + 1}.')
            return MatchResult(i + 1, i + n, 1.0, MatchStrategy.WHITESPACE_NORMALIZED)

    # Fuzzy.
    best_score, best_start = -1.0, 0
    for i in windows:
        score = window_score(lines, i, search)
        if score > best_score:
            best_score, best_start = score, i
    if best_score < 0:
        raise NoAcceptableMatch(0.0, 1, max(1, len(lines)), threshold)
    if best_score < threshold:
        raise NoAcceptableMatch(best_score, best_start + 1, best_start + n, threshold)
    log.debug(f'Fuzzy match at lines {best_start + 1}-{best_start + n}, score = {best_score:0.3f}.')
    return MatchResult(best_start + 1, best_start + n, best_score, MatchStrategy.FUZZY)
