import hashlib
import logging
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union
from repair_agent.errors import BackendUnavailable
from repair_agent.navigator.checks import Diagnostic
from repair_agent.patch_engine.diffs import PatchSet, UnifiedDiff, apply_diff
log = logging.getLogger(__name__)


DiagnosticsProvider = Callable[[str, str], List[Diagnostic]]



@dataclass
class GateVerdict:
    """
    Outcome of gating a patch on static diagnostics.

    Attributes:
        accepted (bool):
            True iff no new diagnostic is Fatal or Error.

        new_diagnostics (List[Diagnostic]):
            Diagnostics of the patched text with no counterpart in the original, every severity.
            Warnings and below are reported but never block.

        baseline_count (int):
            Diagnostics of the original text.

        patched_count (int):
            Diagnostics of the patched text.

        diff (UnifiedDiff | PatchSet):
            The gated change.

        reason (str):
            Why the patch was rejected without comparing diagnostics, e.g. an unavailable backend.
    """
    accepted: bool
    new_diagnostics: List[Diagnostic] = field(default_factory=list)
    baseline_count: int = 0
    patched_count: int = 0
    diff: Union[UnifiedDiff, PatchSet, None] = None
    reason: Optional[str] = None

    @property
    def blocking(self) -> List[Diagnostic]:
        return [x for x in self.new_diagnostics if x.severity.blocking]

    @property
    def message(self) -> str:
        """What the agent is told:  the diff on success, the offending diagnostics otherwise."""
        if self.accepted:
            return 'Patch applied successfully.\n' + (self.diff.to_text() if self.diff is not None else '')
        if self.reason:
            return f'Patch rejected:  {self.reason}'
        lines = [f'Patch rejected:  {len(self.blocking)} new error(s).']
        lines.extend(f'{x.path}:{x.line}: {x.severity.value} [{x.code or "-"}] {x.message}' for x in self.new_diagnostics)
        return '\n'.join(lines)

    def to_record(self) -> Dict:
        return {
            'accepted': self.accepted,
            'new_diagnostics': [x.to_record() for x in self.new_diagnostics],
            'baseline_count': self.baseline_count,
            'patched_count': self.patched_count,
            'reason': self.reason,
            'diff': self.diff.to_text() if self.diff is not None else '',
        }



def diagnostic_key(diagnostic: Diagnostic) -> Tuple:
    """Identity of a finding across versions of a file.  Line numbers are ignored, since edits shift them."""
    message = re.sub(r'\d+', '0', ' '.join(diagnostic.message.split()))
    return diagnostic.path, diagnostic.severity, diagnostic.code, message


def new_findings(baseline: List[Diagnostic], patched: List[Diagnostic]) -> List[Diagnostic]:
    """Patched findings left over after removing one baseline counterpart each (multiset difference)."""
    remaining = Counter(diagnostic_key(x) for x in baseline)
    result = []
    for diagnostic in patched:
        key = diagnostic_key(diagnostic)
        if remaining[key] > 0:
            remaining[key] -= 1
        else:
            result.append(diagnostic)
    return result



class DiagnosticsGate:
    """
    Accepts or rejects candidate patches by differencing diagnostics before and after.

    Attributes:
        provider (Callable[[str, str], List[Diagnostic]]):
            Returns the diagnostics of unsaved `content` at `path`, e.g.
            `Navigator.collect_diagnostics`.

    Note:
        Baseline diagnostics are cached by (path, content hash), so several candidates against the
        same original diagnose it once.  Evaluations are serialized.
    """

    def __init__(self, **args):
        provider = args.get('provider')
        self.provider: DiagnosticsProvider = getattr(provider, 'collect_diagnostics', provider)
        self._cache: Dict[Tuple[str, str], List[Diagnostic]] = {}
        self._lock = threading.RLock()
        log.info(f'Constructed new DiagnosticsGate!  provider = {getattr(self.provider, "__qualname__", self.provider)}')

    def diagnose(self, path: str, content: Optional[str], cached: bool = False) -> List[Diagnostic]:
        if content is None:
            return []
        key = (path, hashlib.sha256(content.encode('utf-8')).hexdigest())
        if cached and key in self._cache:
            return list(self._cache[key])
        diagnostics = list(self.provider(path, content))
        if cached:
            self._cache[key] = diagnostics
        return list(diagnostics)

    def evaluate(self, original: Optional[str], diff: UnifiedDiff) -> GateVerdict:
        """
        Gates a single-file diff against the file's original text.

        Raises:
            DiffApplyFailure:  The diff does not apply to `original`.
        """
        with self._lock:
            if diff.is_empty():
                return GateVerdict(True, diff=diff)
            patched = apply_diff(original, diff)
            path = diff.path
            try:
                baseline = self.diagnose(path, original, cached=True)
                after = self.diagnose(path, patched) if diff.new_path != '/dev/null' else []
            except BackendUnavailable as e:
                log.warning(f'Rejecting patch to {path}, diagnostics unavailable:  {e}')
                return GateVerdict(False, diff=diff, reason=f'diagnostics unavailable ({e})')
            found = new_findings(baseline, after)
            verdict = GateVerdict(
                accepted=not any(x.severity.blocking for x in found),
                new_diagnostics=found,
                baseline_count=len(baseline),
                patched_count=len(after),
                diff=diff,
            )
            log.info(
                f'Gated patch to {path}:  accepted = {verdict.accepted}, baseline = {verdict.baseline_count}, '
                f'patched = {verdict.patched_count}, new = {len(verdict.new_diagnostics)}'
            )
            return verdict

    def evaluate_patch_set(self, originals: Mapping[str, Optional[str]], patch: PatchSet) -> GateVerdict:
        """Gates a multi-file patch; accepted iff every file's diff is accepted."""
        verdicts = [self.evaluate(originals.get(x.path), x) for x in patch]
        reasons = [x.reason for x in verdicts if x.reason]
        return GateVerdict(
            accepted=all(x.accepted for x in verdicts),
            new_diagnostics=[d for x in verdicts for d in x.new_diagnostics],
            baseline_count=sum(x.baseline_count for x in verdicts),
            patched_count=sum(x.patched_count for x in verdicts),
            diff=patch,
            reason='; '.join(reasons) or None,
        )


def evaluate_patch(original: Optional[str], diff: UnifiedDiff, diagnostics) -> GateVerdict:
    """
    Decides whether `diff` introduces new Fatal or Error diagnostics into `original`.

    Args:
        original (str):
            Text the diff applies to, or None for a created file.

        diff (UnifiedDiff):
            The candidate change.

        diagnostics:
            A `DiagnosticsGate`, a navigator, or any callable `(path, content) -> List[Diagnostic]`.

    Returns:
        GateVerdict:  Rejected with a reason, never accepted, when the backend is unavailable.
    """
    gate = diagnostics if isinstance(diagnostics, DiagnosticsGate) else DiagnosticsGate(provider=diagnostics)
    return gate.evaluate(original, diff)
