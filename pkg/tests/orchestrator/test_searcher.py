import pytest
from repair_agent.errors import EmptyContext
from repair_agent.orchestrator.providers import ScriptedProvider
from repair_agent.orchestrator.searcher import (
    ContextBundle, Snippet, enclosing_entity, map_to_workspace, parse_recognized, search_context, traceback_frames,
)
from repair_agent.orchestrator.task import IssueTask
from repair_agent.orchestrator.tools import build_resources
from tests.config import config


FILES = ['README.md', 'calculator/__init__.py', 'calculator/stats.py']



@pytest.fixture
def resources(run_config, seeded_workspace):
    resources = build_resources(run_config, seeded_workspace)
    yield resources
    resources.navigator.close()


def _search(resources, task, provider=None):
    return search_context(task, resources.graph, resources.navigator, resources.index, provider, config=resources.config, trace=resources.trace)


def test_traceback_frames():
    body = (config.paths.issues / 'seeded_bug.md').read_text()
    assert traceback_frames(body) == [('check.py', 3), ('/home/user/project/calculator/stats.py', 3)]


def test_path_line_frames():
    text = 'FAIL at pkg/a.go:12 and again in pkg/a.go:12, then src/b.py:7'
    assert traceback_frames(text) == [('pkg/a.go', 12), ('src/b.py', 7)]


@pytest.mark.parametrize('path, expected', [
    ('calculator/stats.py', 'calculator/stats.py'),
    ('./calculator/stats.py', 'calculator/stats.py'),
    ('/home/user/project/calculator/stats.py', 'calculator/stats.py'),
    ('stats.py', None),
    ('check.py', None),
])
def test_map_to_workspace(path, expected):
    assert map_to_workspace(path, FILES) == expected


def test_parse_recognized():
    assert parse_recognized('- `mean`\n* calculator.stats.total\n\nmean\n') == ['mean', 'total']


def test_bundle_drops_covered_snippets():
    bundle = ContextBundle()
    assert bundle.add(Snippet('a.py', 3, 4, 'x', 'CKG'))
    assert bundle.add(Snippet('a.py', 1, 10, 'y', 'LSP'))
    assert not bundle.add(Snippet('a.py', 2, 5, 'z', 'CKG'))
    assert [(x.start_line, x.end_line) for x in bundle.snippets] == [(1, 10)]
    assert bundle.files == ['a.py']


def test_enclosing_entity(resources):
    assert enclosing_entity(resources.graph, 'calculator/stats.py', 3).name == 'mean'
    assert enclosing_entity(resources.graph, 'calculator/stats.py', 4) is None


def test_stack_frame_comes_first(resources, seeded_workspace):
    task = IssueTask.from_file(config.paths.issues / 'seeded_bug.md', workspace=seeded_workspace)
    bundle = _search(resources, task)
    first = bundle.snippets[0]
    assert (first.path, first.start_line, first.end_line, first.provenance) == ('calculator/stats.py', 1, 6, 'GeneralFileIndexing')
    assert 'calculator/stats.py' in bundle.files
    assert len(bundle.snippets) <= resources.config.max_snippets


def test_provider_recognizes_entities(resources, seeded_workspace):
    task = IssueTask('Wrong total', 'The sum helper miscounts.', workspace=seeded_workspace)
    provider = ScriptedProvider(text='### Searcher\ntotal\n')
    bundle = _search(resources, task, provider)
    assert [(x.path, x.start_line, x.provenance) for x in bundle.snippets][0] == ('calculator/stats.py', 6, 'CKG')
    assert len(provider.requests) == 1
    assert ('Searcher', 'ok') in [(x.role, x.status) for x in resources.trace.events if x.action == 'complete']


def test_quoted_text_is_grepped(resources, seeded_workspace):
    task = IssueTask('Docs', 'The docstring says "Arithmetic mean of a non-empty sequence" but zero is allowed.', workspace=seeded_workspace)
    bundle = _search(resources, task)
    assert 'calculator/stats.py' in bundle.files


def test_nothing_found(resources, seeded_workspace):
    with pytest.raises(EmptyContext):
        _search(resources, IssueTask('Xyzzy plugh', 'Frobnicate quux.', workspace=seeded_workspace))
