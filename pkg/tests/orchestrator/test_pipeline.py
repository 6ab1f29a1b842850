import pytest
import sys
from repair_agent.config import RunConfig
from repair_agent.errors import ConfigError
from repair_agent.orchestrator.pipeline import solve
from repair_agent.orchestrator.providers import ScriptedProvider
from repair_agent.orchestrator.task import RouteKind
from repair_agent.orchestrator.trace import load_trace
from tests.config import config


ISSUE = config.paths.issues / 'seeded_bug.md'



def _config(replay, **args):
    return RunConfig(repo=config.paths.seeded_bug, replay_script=config.paths.replay / replay, interpreter=[sys.executable], workers=2, sandbox_confinement=config.confinement, **args)


def test_unconfirmed_reproduction_reroutes_to_static(tmp_path):
    solution = solve(ISSUE, _config('not_reproduced.txt'), workspace_parent=tmp_path)
    assert solution.resolved
    assert solution.route.kind == RouteKind.STATIC
    assert solution.route.rationale.startswith('Rerouted')
    assert solution.votes == {1: 1}
    assert solution.diff.to_text() == (config.paths.edits / 'seeded_bug.diff').read_text()
    actions = [x.action for x in solution.trace]
    assert actions.index('reproduction-not-confirmed') < actions.index('reroute') < actions.index('vote')


def test_all_rejected_is_unresolved(tmp_path):
    solution = solve(ISSUE, _config('static_all_rejected.txt'), workspace_parent=tmp_path)
    assert not solution.resolved
    assert solution.route.kind == RouteKind.STATIC
    assert solution.attempts == 3
    assert solution.diff.is_empty()
    assert solution.trace[-1].action == 'all-rejected'


def test_budget_exhaustion_is_unresolved(tmp_path):
    solution = solve(ISSUE, _config('dynamic_gold.txt', max_tokens=1), workspace_parent=tmp_path)
    assert not solution.resolved
    assert solution.route.kind == RouteKind.DYNAMIC
    assert solution.diff.is_empty()
    assert solution.trace[-1].action == 'budget-exhausted'


def test_trace_file(tmp_path):
    path = tmp_path / 'trace.jsonl'
    solution = solve(ISSUE, _config('static_vote.txt', trace_path=path), workspace_parent=tmp_path)
    header, events = load_trace(path)
    assert header['task'] == 'mean() returns the wrong value'
    assert events == solution.trace
    assert ('Editor', 'CodeEditing') in [(x.role, x.tool) for x in events]
    assert ('Searcher', 'CKG') in [(x.role, x.tool) for x in events]


def test_every_tool_use_is_permitted(tmp_path):
    solution = solve(ISSUE, _config('dynamic_gold.txt'), workspace_parent=tmp_path)
    assert solution.resolved
    assert 'denied' not in {x.status for x in solution.trace}
    assert {x.role for x in solution.trace if x.tool == 'ReproductionScriptExecution'} <= {'Reproducer', 'Tester'}
    assert {x.role for x in solution.trace if x.tool == 'CodeEditing'} == {'Programmer'}


def test_workspace_is_removed(tmp_path):
    solve(ISSUE, _config('dynamic_gold.txt'), workspace_parent=tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_repo_is_required():
    with pytest.raises(ConfigError):
        solve(ISSUE, RunConfig(), ScriptedProvider(text=''))
