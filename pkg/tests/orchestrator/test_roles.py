import pytest
from repair_agent.errors import PermissionDenied
from repair_agent.orchestrator.roles import DEFAULT_MATRIX, AgentRole, Tool, ToolPermissionMatrix, enforce



def test_matrix_covers_every_pair():
    assert len(DEFAULT_MATRIX.grants) == 42


@pytest.mark.parametrize('role', list(AgentRole))
def test_retrieval_tools(role):
    for tool in (Tool.CKG, Tool.LSP, Tool.GENERAL_FILE_INDEXING, Tool.GENERAL_BASH_COMMAND):
        assert DEFAULT_MATRIX.allows(role, tool) == (role != AgentRole.EDITOR)


@pytest.mark.parametrize('tool, roles', [
    (Tool.CODE_EDITING, {AgentRole.PROGRAMMER, AgentRole.EDITOR}),
    (Tool.RESET_REPOSITORY, {AgentRole.PROGRAMMER}),
    (Tool.REPRODUCTION_SCRIPT_EXECUTION, {AgentRole.REPRODUCER, AgentRole.TESTER}),
])
def test_restricted_tools(tool, roles):
    assert {r for r in AgentRole if DEFAULT_MATRIX.allows(r, tool)} == roles


def test_editor_only_edits():
    assert DEFAULT_MATRIX.tools(AgentRole.EDITOR) == [Tool.CODE_EDITING]


def test_lookup_by_name():
    assert DEFAULT_MATRIX.allows('Programmer', 'ResetRepository')
    assert not DEFAULT_MATRIX.allows('Tester', 'CodeEditing')


def test_enforce():
    assert enforce(DEFAULT_MATRIX, AgentRole.TESTER, Tool.REPRODUCTION_SCRIPT_EXECUTION)
    with pytest.raises(PermissionDenied) as e:
        enforce(DEFAULT_MATRIX, AgentRole.EDITOR, Tool.GENERAL_BASH_COMMAND)
    assert e.value.exit_code == 15


def test_incomplete_matrix():
    with pytest.raises(ValueError):
        ToolPermissionMatrix({(AgentRole.EDITOR, Tool.CKG): False})


def test_frame():
    frame = DEFAULT_MATRIX.to_frame()
    assert frame.shape == (7, 6)
    assert list(frame.columns) == ['Searcher', 'Planner', 'Reproducer', 'Programmer', 'Tester', 'Editor']
    assert frame.loc['ResetRepository'].sum() == 1
    assert bool(frame.loc['CodeEditing', 'Editor'])
