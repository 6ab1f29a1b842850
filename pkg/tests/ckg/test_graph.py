import json
import pytest
from repair_agent.ckg.entities import CodeEntity, CodeRelation, EntityKind, RelationKind
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.errors import GraphFormatError, UnknownEntity, UnreadablePath
from tests.config import config



def test_neighbors_of_xfunction(listing_graph):
    x_function = listing_graph.by_name('XFunction')[0]
    calls = listing_graph.neighbors(x_function.id, {RelationKind.CALLS})
    assert [(e.name, r.line) for r, e in calls] == [('NewStructB', 20), ('FunctionB', 21)]
    assert all(r.src == x_function.id for r, _ in calls)


def test_neighbors_include_incoming(listing_graph):
    new_struct_b = listing_graph.by_name('NewStructB')[0]
    callers = [e.name for r, e in listing_graph.neighbors(new_struct_b.id, {'Calls'}) if r.dst == new_struct_b.id]
    assert sorted(callers) == ['FunctionA', 'XFunction']
    kinds = [r.kind for r, _ in listing_graph.neighbors(new_struct_b.id)]
    assert kinds == sorted(kinds, key=list(RelationKind).index)


def test_contained(listing_graph):
    file_b = listing_graph.entity('main/cmd/pkg_b/fileB.go')
    assert sorted(x.name for x in listing_graph.contained(file_b.id)) == ['FunctionB', 'NewStructB', 'StructB']


def test_unknown_entity(listing_graph):
    with pytest.raises(UnknownEntity):
        listing_graph.neighbors('main/nowhere.go#Nothing@1')
    with pytest.raises(UnknownEntity):
        listing_graph.entity('missing')


@pytest.mark.parametrize('context, first, last', [
    (0, 'func NewStructB() StructB {', '}'),
    (1, '// NewStructB returns a new StructB', ''),
])
def test_snippet(listing_graph, context, first, last):
    entity = listing_graph.by_name('NewStructB')[0]
    lines = listing_graph.snippet(entity.id, config.paths.listing, context).split('\n')[:-1]
    assert lines[0] == first
    assert lines[-1] == last
    assert len(lines) == entity.end_line - entity.start_line + 1 + 2 * context


def test_save_and_load(listing_graph, tmp_path):
    path = tmp_path / 'graph.jsonl'
    listing_graph.save(path)
    header = json.loads(path.read_text().split('\n')[0])
    assert header['entities'] == len(listing_graph.entities)
    loaded = KnowledgeGraph.load(path)
    assert loaded.snapshot_id == listing_graph.snapshot_id
    assert loaded.canonical() == listing_graph.canonical()
    assert loaded.entities == listing_graph.entities


def test_load_missing(tmp_path):
    with pytest.raises(UnreadablePath):
        KnowledgeGraph.load(tmp_path / 'missing.jsonl')


@pytest.mark.parametrize('mutate', ['empty', 'header', 'version', 'record', 'dangling'])
def test_load_corrupt(listing_graph, tmp_path, mutate):

    # Write a good graph, then break it.
    path = tmp_path / 'graph.jsonl'
    listing_graph.save(path)
    lines = path.read_text().split('\n')
    if mutate == 'empty':
        lines = []
    elif mutate == 'header':
        lines[0] = '{"format": "something-else"}'
    elif mutate == 'version':
        header = json.loads(lines[0])
        header['version'] = 999
        lines[0] = json.dumps(header)
    elif mutate == 'record':
        lines[1] = '{"record": "entity", "kind": "Module"'
    elif mutate == 'dangling':
        lines.append(json.dumps({'record': 'relation', 'src': 'a.go', 'dst': 'b.go', 'kind': 'Imports', 'path': 'a.go', 'line': 1}))
    path.write_text('\n'.join(lines))

    # Load.
    with pytest.raises(GraphFormatError):
        KnowledgeGraph.load(path)


def test_dangling_relation_rejected():
    entity = CodeEntity('a.py', EntityKind.FILE, 'a.py', 'a.py', 1, 1)
    relation = CodeRelation('a.py', 'b.py', RelationKind.IMPORTS, 'a.py', 1)
    with pytest.raises(GraphFormatError):
        KnowledgeGraph([entity], [relation], 'snapshot')


def test_duplicate_ids_rejected():
    first = CodeEntity('m.py#x@1:1', EntityKind.VARIABLE, 'x', 'm.py', 1, 1, start_column=1)
    second = CodeEntity('m.py#x@1:1', EntityKind.VARIABLE, 'x', 'm.py', 1, 1, start_column=8)
    with pytest.raises(GraphFormatError, match='Duplicate'):
        KnowledgeGraph([first, second], [], 'snapshot')
