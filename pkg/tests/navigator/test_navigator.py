import io
import pytest
from repair_agent.config import RunConfig
from repair_agent.errors import BackendUnavailable, DiagnosticsTimeout
from repair_agent.navigator.backends import NavigationKind, StubBackend
from repair_agent.navigator.checks import Severity, stub_diagnostics
from repair_agent.navigator.lsp import LspClient, column_from_utf16, encode_message, read_message, utf16_offset
from repair_agent.navigator.navigator import Navigator, create_navigator
from repair_agent.navigator.positions import Location, PositionHint
from tests.config import config


FILE_A = 'main/fileA.go'
FILE_B = 'main/cmd/pkg_b/fileB.go'



def test_definition_through_call_site(listing_navigator):
    pos = listing_navigator.resolve_position(PositionHint(FILE_A, 21, 'FunctionB'))
    assert listing_navigator.navigate(NavigationKind.DEFINITION, pos) == [Location(FILE_B, 12, 18)]


def test_references_of_declaration(listing_navigator):
    pos = listing_navigator.resolve_position(PositionHint(FILE_B, 7, 'NewStructB'))
    assert listing_navigator.navigate('References', pos) == [Location(FILE_A, 14, 16), Location(FILE_A, 20, 16)]


def test_navigate_from_non_identifier(listing_navigator):
    pos = listing_navigator.resolve_position(PositionHint(FILE_A, 21, 'x'))
    pos = type(pos)(pos.path, pos.line, pos.column + 1, pos.identifier, pos.tier)
    assert listing_navigator.navigate(NavigationKind.DEFINITION, pos) == []


def test_overlay_is_used(listing_graph):
    backend = StubBackend(graph=listing_graph, root=config.paths.listing)
    backend.open(FILE_A, 'package main\n')
    assert backend.read(FILE_A) == 'package main\n'
    assert (config.paths.listing / FILE_A).read_text() != 'package main\n'


@pytest.mark.parametrize('path, content, codes', [
    ('a.go', 'package main\n\nfunc f() {\n', {'missing-token', 'syntax-error'}),
    ('a.go', 'package main\n\nfunc f() {}\n', set()),
    ('a.py', 'def f(:\n    pass\n', {'missing-token', 'syntax-error'}),
    ('a.py', 'import os\n\ndef f(x):\n    return os.path.join(x, len(x))\n', set()),
    ('a.py', 'def f(x):\n    return y\n', {'undefined-name'}),
    ('notes.txt', 'anything (\n', set()),
])
def test_stub_diagnostics(path, content, codes):
    diagnostics = stub_diagnostics(path, content)
    assert bool(diagnostics) == bool(codes)
    assert {x.code for x in diagnostics} <= codes
    assert all(x.severity == Severity.ERROR and x.severity.blocking for x in diagnostics)


def test_undefined_name_details():
    diagnostics = stub_diagnostics('a.py', 'def f(x):\n    return y\n')
    assert diagnostics[0].line == 2
    assert diagnostics[0].message == "'y' is not defined"


def test_severity_order():
    assert Severity.FATAL > Severity.ERROR > Severity.WARNING > Severity.INFO > Severity.HINT
    assert not Severity.WARNING.blocking


def test_collect_diagnostics(listing_navigator):
    assert listing_navigator.collect_diagnostics(FILE_A, 'package main\n\nfunc f() {}\n') == []
    with pytest.raises(BackendUnavailable):
        listing_navigator.collect_diagnostics('README.md', '# Title\n')


def test_lsp_falls_back_to_stub(tmp_path):
    run_config = RunConfig(navigator_backend='lsp', languages=['go'], lsp_commands={'go': ['no-such-language-server-xyz']})
    navigator = create_navigator(run_config, tmp_path)
    try:
        assert [type(x).__name__ for x in navigator.backends] == ['StubBackend']
    finally:
        navigator.close()


def test_message_framing():
    message = {'jsonrpc': '2.0', 'id': 1, 'method': 'm', 'params': {'text': 'ünïcode'}}
    framed = encode_message(message)
    header, body = framed.split(b'\r\n\r\n')
    assert header == f'Content-Length: {len(body)}'.encode()
    assert len(body) > len(body.decode('utf-8'))
    stream = io.BytesIO(framed + framed)
    assert read_message(stream) == message
    assert read_message(stream) == message
    assert read_message(stream) is None


@pytest.mark.parametrize('text, column, offset', [
    ('abc', 3, 2),
    ('a😀b', 3, 3),
    ('😀😀x', 3, 4),
])
def test_utf16_columns(text, column, offset):
    assert utf16_offset(text, column) == offset
    assert column_from_utf16(text, offset) == column


def test_lsp_client_request():
    reader = io.BytesIO(encode_message({'jsonrpc': '2.0', 'id': 1, 'result': {'capabilities': {}}}))
    writer = io.BytesIO()
    client = LspClient(reader=reader, writer=writer, timeout=5.0)
    assert client.request('initialize', {}) == {'capabilities': {}}
    assert read_message(io.BytesIO(writer.getvalue()))['method'] == 'initialize'
    with pytest.raises(BackendUnavailable):
        client.request('shutdown', None)


def test_lsp_client_diagnostics():
    notification = {'jsonrpc': '2.0', 'method': 'textDocument/publishDiagnostics', 'params': {
        'uri': 'file:///w/a.py', 'diagnostics': [{'message': 'boom', 'severity': 1}],
    }}
    client = LspClient(reader=io.BytesIO(encode_message(notification)), writer=io.BytesIO(), timeout=5.0)
    assert client.wait_for_diagnostics('file:///w/a.py', 0)[0]['message'] == 'boom'
    with pytest.raises((DiagnosticsTimeout, BackendUnavailable)):
        client.wait_for_diagnostics('file:///w/b.py', 0, timeout=0.2)
