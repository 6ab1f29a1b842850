import pytest
from repair_agent.diagnostics_gate.gate import DiagnosticsGate, diagnostic_key, evaluate_patch, new_findings
from repair_agent.errors import DiffApplyFailure
from repair_agent.navigator.checks import Diagnostic, Severity, stub_diagnostics
from repair_agent.patch_engine.diffs import PatchSet, parse_unified_diff, render_unified_diff
from tests.config import config


ORIGINAL = 'def f(x):\n    return y\n\n\ndef g(x):\n    return x + 1\n'



class CountingProvider:
    def __init__(self):
        self.calls = []

    def __call__(self, path, content):
        self.calls.append(path)
        return stub_diagnostics(path, content)


def _warn_on_todo(path, content):
    return [Diagnostic(path, i, Severity.WARNING, 'todo', 'Open TODO') for i, x in enumerate(content.split('\n'), 1) if 'TODO' in x]


def test_gold_fix_is_accepted():
    original = (config.paths.seeded_bug / 'calculator' / 'stats.py').read_text()
    diff = parse_unified_diff((config.paths.edits / 'seeded_bug.diff').read_text())[0]
    verdict = evaluate_patch(original, diff, stub_diagnostics)
    assert verdict.accepted
    assert verdict.new_diagnostics == []
    assert verdict.message == 'Patch applied successfully.\n' + diff.to_text()


def test_existing_errors_do_not_block():
    patched = ORIGINAL.replace('x + 1', 'x + 2')
    verdict = evaluate_patch(ORIGINAL, render_unified_diff(ORIGINAL, patched, 'm.py'), stub_diagnostics)
    assert verdict.accepted
    assert (verdict.baseline_count, verdict.patched_count) == (1, 1)


@pytest.mark.parametrize('patched, code', [
    (ORIGINAL.replace('x + 1', 'x +'), 'syntax-error'),
    (ORIGINAL.replace('x + 1', 'y + 1'), 'undefined-name'),
    (ORIGINAL.replace('x + 1', 'z'), 'undefined-name'),
])
def test_new_errors_block(patched, code):
    verdict = evaluate_patch(ORIGINAL, render_unified_diff(ORIGINAL, patched, 'm.py'), stub_diagnostics)
    assert not verdict.accepted
    assert verdict.blocking
    assert verdict.message.startswith('Patch rejected:  ')
    assert 'm.py:' in verdict.message
    if code == 'undefined-name':
        assert [x.code for x in verdict.new_diagnostics] == [code]


def test_warnings_never_block():
    original = 'x = 1\n'
    diff = render_unified_diff(original, 'x = 1  # TODO\n', 'a.py')
    verdict = evaluate_patch(original, diff, _warn_on_todo)
    assert verdict.accepted
    assert [x.severity for x in verdict.new_diagnostics] == [Severity.WARNING]


def test_line_shifts_are_ignored():
    before = [Diagnostic('a.py', 3, Severity.ERROR, 'undefined-name', "'y' is not defined at column 12")]
    after = [Diagnostic('a.py', 9, Severity.ERROR, 'undefined-name', "'y'  is not defined at column 4")]
    assert diagnostic_key(before[0]) == diagnostic_key(after[0])
    assert new_findings(before, after) == []


def test_findings_are_a_multiset_difference():
    error = Diagnostic('a.py', 1, Severity.ERROR, 'undefined-name', "'y' is not defined")
    assert new_findings([error], [error, error]) == [error]
    assert new_findings([error, error], [error]) == []


def test_baseline_is_cached():
    provider = CountingProvider()
    gate = DiagnosticsGate(provider=provider)
    for new in ('x + 2', 'x + 3'):
        gate.evaluate(ORIGINAL, render_unified_diff(ORIGINAL, ORIGINAL.replace('x + 1', new), 'm.py'))
    assert len(provider.calls) == 3


def test_empty_diff_is_accepted():
    provider = CountingProvider()
    verdict = DiagnosticsGate(provider=provider).evaluate(ORIGINAL, render_unified_diff(ORIGINAL, ORIGINAL, 'm.py'))
    assert verdict.accepted
    assert provider.calls == []


def test_backend_unavailable_rejects(listing_navigator):
    diff = render_unified_diff('# Title\n', '# Better title\n', 'README.md')
    verdict = evaluate_patch('# Title\n', diff, listing_navigator)
    assert not verdict.accepted
    assert verdict.reason.startswith('diagnostics unavailable')
    assert verdict.to_record()['reason'] == verdict.reason


def test_diff_must_apply():
    diff = render_unified_diff('a = 1\n', 'a = 2\n', 'a.py')
    with pytest.raises(DiffApplyFailure):
        evaluate_patch('b = 1\n', diff, stub_diagnostics)


def test_patch_set():
    originals = {'a.py': 'a = 1\n', 'b.py': 'b = 1\n'}
    good = render_unified_diff(originals['a.py'], 'a = 2\n', 'a.py')
    bad = render_unified_diff(originals['b.py'], 'b = (\n', 'b.py')
    gate = DiagnosticsGate(provider=stub_diagnostics)
    assert gate.evaluate_patch_set(originals, PatchSet([good])).accepted
    verdict = gate.evaluate_patch_set(originals, PatchSet([good, bad]))
    assert not verdict.accepted
    assert {x.path for x in verdict.new_diagnostics} == {'b.py'}
