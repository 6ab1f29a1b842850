import pytest
from repair_agent.orchestrator.planner import parse_route, plan_route
from repair_agent.orchestrator.providers import ScriptedProvider
from repair_agent.orchestrator.task import IssueTask, RouteKind
from repair_agent.orchestrator.trace import Trace
from tests.config import config



@pytest.mark.parametrize('text, expected', [
    ('Route: Dynamic\nThe issue shows a failing assertion.', RouteKind.DYNAMIC),
    ('route = **static**', RouteKind.STATIC),
    ('ROUTE:static', RouteKind.STATIC),
    ('I would go static here.', RouteKind.STATIC),
    ('Dynamic would be slow.  Route: Static', RouteKind.STATIC),
    ('Either dynamic or static works.', None),
    ('Hard to say.', None),
    ('The route is dynamically chosen.', None),
    ('', None),
])
def test_parse_route(text, expected):
    assert parse_route(text) == expected


def test_planner_answer_is_used():
    trace = Trace()
    route = plan_route(IssueTask('t', 'mean is wrong'), None, ScriptedProvider(text='### Planner\nRoute: Dynamic\nIt crashes.\n'), trace=trace)
    assert route.kind == RouteKind.DYNAMIC
    assert route.rationale == 'Route: Dynamic\nIt crashes.'
    assert [(x.role, x.status) for x in trace.events] == [('Planner', 'ok')]


def test_unparseable_answers_fall_back_to_static():
    trace = Trace()
    provider = ScriptedProvider(path=config.paths.replay / 'planner_unparseable.txt')
    route = plan_route(IssueTask('t', 'mean is wrong'), None, provider, trace=trace)
    assert route.kind == RouteKind.STATIC
    assert route.rationale.startswith('Fallback')
    assert len(provider.requests) == 2
    assert [x.action for x in trace.events] == ['complete', 'complete', 'route-fallback']


def test_second_attempt_is_used():
    provider = ScriptedProvider(text='### Planner\nNo idea.\n\n### Planner\nRoute: Dynamic\n')
    assert plan_route(IssueTask('t', 'mean is wrong'), None, provider).kind == RouteKind.DYNAMIC


def test_provider_failure_falls_back_to_static():
    trace = Trace()
    route = plan_route(IssueTask('t', 'mean is wrong'), None, ScriptedProvider(text=''), trace=trace)
    assert route.kind == RouteKind.STATIC
    assert [x.status for x in trace.events] == ['error', 'error', 'ok']
