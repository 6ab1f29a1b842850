import pytest
from repair_agent.config import RunConfig
from repair_agent.errors import BudgetExhausted, ConfigError, UnreadablePath
from repair_agent.orchestrator.task import Budget, IssueTask, Route, RouteKind, Solution
from repair_agent.patch_engine.diffs import PatchSet, parse_unified_diff
from tests.config import config



def test_issue_from_file():
    task = IssueTask.from_file(config.paths.issues / 'seeded_bug.md')
    assert task.title == 'mean() returns the wrong value'
    assert 'AssertionError' in task.body
    assert task.text.startswith('mean() returns the wrong value\n\n# mean()')


def test_blank_issue():
    with pytest.raises(ConfigError):
        IssueTask.from_file(config.paths.issues / 'blank.md')


def test_missing_issue(tmp_path):
    with pytest.raises(UnreadablePath):
        IssueTask.from_file(tmp_path / 'missing.md')


def test_budget_from_config():
    budget = Budget.from_config(RunConfig(max_iterations=3, max_resets=0, max_tokens=100, wall_clock=5.0))
    assert (budget.max_iterations, budget.max_resets, budget.max_tokens, budget.wall_clock) == (3, 0, 100, 5.0)


def test_budget_tokens():
    budget = Budget(max_tokens=100)
    budget.check(100)
    with pytest.raises(BudgetExhausted):
        budget.check(101)


def test_budget_wall_clock():
    budget = Budget(wall_clock=10.0)
    budget.started -= 11
    with pytest.raises(BudgetExhausted):
        budget.check()


@pytest.mark.parametrize('args', [{'max_iterations': 0}, {'max_tokens': -1}, {'wall_clock': 0}, {'max_resets': -1}])
def test_budget_limits(args):
    with pytest.raises(ConfigError):
        Budget(**args)


def test_resolved_solution_needs_diff():
    with pytest.raises(ValueError):
        Solution(PatchSet(), Route(RouteKind.DYNAMIC), resolved=True)


def test_solution_record():
    diff = parse_unified_diff((config.paths.edits / 'seeded_bug.diff').read_text())
    record = Solution(diff, Route(RouteKind.STATIC, 'why'), [], True, 4, {1: 2, 3: 1}).to_record()
    assert record['route'] == 'Static'
    assert record['votes'] == {'1': 2, '3': 1}
    assert record['files'] == ['calculator/stats.py']
    assert record['diff'] == diff.to_text()
