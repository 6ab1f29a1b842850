import pytest
from repair_agent.ckg.builder import build_graph
from repair_agent.ckg.entities import EntityKind, RelationKind
from repair_agent.errors import NoExtractorAvailable, UnreadablePath
from tests.config import config



def _names(graph, kind=None):
    return {x.name for x in graph.entities.values() if kind is None or x.kind == kind}


def _edges(graph, kind):
    return {(graph.entity(x.src).name, graph.entity(x.dst).name, x.line) for x in graph.relations if x.kind == kind}


def test_listing_golden_graph(listing_graph):
    graph = listing_graph

    # Entities.
    assert _names(graph) - _names(graph, EntityKind.FILE) == {'StructA', 'FunctionA', 'XFunction', 'StructB', 'NewStructB', 'FunctionB'}
    assert {x.path for x in graph.files()} == {'main/fileA.go', 'main/cmd/pkg_b/fileB.go'}
    kinds = {x.name: x.kind for x in graph.entities.values()}
    assert kinds['StructA'] == EntityKind.STRUCT
    assert kinds['FunctionA'] == EntityKind.METHOD
    assert kinds['XFunction'] == EntityKind.FUNCTION
    assert kinds['NewStructB'] == EntityKind.FUNCTION

    # Calls.
    calls = _edges(graph, RelationKind.CALLS)
    assert ('XFunction', 'FunctionB', 21) in calls
    assert ('XFunction', 'NewStructB', 20) in calls
    assert ('FunctionA', 'NewStructB', 14) in calls

    # Imports and containment.
    imports = {(x.src, x.dst) for x in graph.relations if x.kind == RelationKind.IMPORTS}
    assert imports == {('main/fileA.go', 'main/cmd/pkg_b/fileB.go')}
    contains = _edges(graph, RelationKind.CONTAINS)
    assert {dst for src, dst, _ in contains if src == 'fileA.go'} == {'StructA', 'FunctionA', 'XFunction'}


def test_listing_entity_details(listing_graph):
    x_function = listing_graph.by_name('XFunction')[0]
    assert (x_function.path, x_function.start_line, x_function.end_line) == ('main/fileA.go', 19, 22)
    assert x_function.signature == 'func XFunction()'
    assert x_function.doc == 'XFunction function'
    function_a = listing_graph.by_name('FunctionA')[0]
    assert function_a.qualname == 'StructA.FunctionA'
    assert function_a.doc == 'FunctionA method for StructA'


def test_rebuild_is_isomorphic(listing_graph):
    again = build_graph(config.paths.listing, ['go'], workers=1)
    assert again.canonical() == listing_graph.canonical()
    assert again.snapshot_id == listing_graph.snapshot_id
    assert sorted(again.entities) == sorted(listing_graph.entities)


def test_calls_with_distinct_sites(python_calls_graph):
    graph = python_calls_graph
    kinds = [x.kind for x in graph.entities.values()]
    assert kinds.count(EntityKind.FILE) == 1
    assert kinds.count(EntityKind.FUNCTION) == 2
    assert len([x for x in graph.relations if x.kind == RelationKind.CONTAINS]) == 2
    calls = [x for x in graph.relations if x.kind == RelationKind.CALLS]
    assert len(calls) == 2
    assert {(graph.entity(x.src).name, graph.entity(x.dst).name) for x in calls} == {('f', 'g')}
    assert len({x.site for x in calls}) == 2


def test_empty_directory(tmp_path):
    graph = build_graph(tmp_path)
    assert len(graph.entities) == 0
    assert len(graph.relations) == 0


def test_unreadable_root(tmp_path):
    with pytest.raises(UnreadablePath):
        build_graph(tmp_path / 'missing')


def test_no_matching_language(tmp_path):
    (tmp_path / 'notes.txt').write_text('nothing to parse\n')
    with pytest.raises(NoExtractorAvailable):
        build_graph(tmp_path, ['go'])
    with pytest.raises(NoExtractorAvailable):
        build_graph(tmp_path, ['cobol'])


def test_broken_file_is_skipped(tmp_path):
    (tmp_path / 'good.py').write_text('def ok():\n    return 1\n')
    (tmp_path / 'bad.py').write_bytes(b'def broken(:\n    \xff\xfe\n')
    graph = build_graph(tmp_path, ['python'])
    assert 'ok' in _names(graph)
    assert graph.report.files_indexed == 1
    assert [p for p, _ in graph.report.files_skipped] == ['bad.py']
    assert graph.report.to_record()['files_indexed'] == graph.report.files_indexed


def test_unreadable_file_is_skipped(tmp_path):
    (tmp_path / 'a.py').write_text('def a():\n    return 1\n')
    (tmp_path / 'b.py').write_text('def b():\n    return a()\n')
    (tmp_path / 'c.py').symlink_to(tmp_path / 'missing.py')
    graph = build_graph(tmp_path, ['python'])
    assert {'a', 'b'} <= _names(graph)
    assert graph.report.files_indexed == 2
    assert [p for p, _ in graph.report.files_skipped] == ['c.py']
    assert graph.report.files_skipped[0][1].startswith('not readable')


@pytest.mark.parametrize('source, columns', [
    ('x = 1; x = 2\n', [1, 8]),
    ('a, a = 1, 2\n', [1, 4]),
])
def test_same_line_declarations(tmp_path, source, columns):
    (tmp_path / 'm.py').write_text(source)
    graph = build_graph(tmp_path, ['python'])
    variables = sorted((x for x in graph.entities.values() if x.kind == EntityKind.VARIABLE), key=lambda x: x.start_column)
    assert [x.start_column for x in variables] == columns
    assert len({x.id for x in variables}) == len(columns)
    assert {x.start_line for x in variables} == {1}
    assert len([x for x in graph.relations if x.kind == RelationKind.CONTAINS]) == len(columns)
    again = build_graph(tmp_path, ['python'])
    assert sorted(again.entities) == sorted(graph.entities)
    assert again.canonical() == graph.canonical()


def test_nested_module_variables(tmp_path):
    (tmp_path / 'settings.py').write_text(
        'try:\n'
        '    import json\n'
        'except ImportError:\n'
        '    json = None\n'
        '\n'
        'if json is None:\n'
        '    DEBUG = False\n'
        'elif True:\n'
        '    LEVEL = 2\n'
        'else:\n'
        '    DEBUG = True\n'
        '\n'
        'with open(__file__) as handle:\n'
        '    HEADER = handle.readline()\n'
        '\n'
        'class Settings:\n'
        '    if True:\n'
        '        mode = "fast"\n'
        '\n'
        'def configure():\n'
        '    if True:\n'
        '        local = 1\n'
    )
    graph = build_graph(tmp_path, ['python'])
    variables = sorted((x.qualname, x.start_line) for x in graph.entities.values() if x.kind == EntityKind.VARIABLE)
    assert variables == [
        ('DEBUG', 7), ('DEBUG', 11), ('HEADER', 14), ('LEVEL', 9), ('Settings.mode', 18), ('json', 4),
    ]
    settings = graph.by_name('Settings')[0]
    mode = graph.by_name('mode')[0]
    assert any(x.src == settings.id and x.dst == mode.id for x in graph.relations if x.kind == RelationKind.CONTAINS)
