import json
import logging
import subprocess
import threading
import time
from pathlib import Path
from typing import Any, BinaryIO, Dict, List, Optional, Tuple
from urllib.parse import unquote, urlparse
from repair_agent.errors import BackendUnavailable, DiagnosticsTimeout, PositionOutOfRange
from repair_agent.navigator.backends import NavigationBackend
from repair_agent.navigator.checks import Diagnostic, Severity
from repair_agent.navigator.positions import Location, ResolvedPosition
log = logging.getLogger(__name__)


LSP_SEVERITY = {1: Severity.ERROR, 2: Severity.WARNING, 3: Severity.INFO, 4: Severity.HINT}

LANGUAGE_IDS = {'.py': 'python', '.go': 'go'}



def encode_message(message: Dict) -> bytes:
    """Frames a JSON-RPC message:  `Content-Length` counts the UTF-8 bytes of the body."""
    body = json.dumps(message, ensure_ascii=False, separators=(',', ':')).encode('utf-8')
    return f'Content-Length: {len(body)}\r\n\r\n'.encode('ascii') + body


def read_message(stream: BinaryIO) -> Optional[Dict]:
    """
    Reads one framed message from a binary stream.

    Returns:
        Dict:  The decoded message, or None at end of stream.
    """
    headers = {}
    while True:
        line = stream.readline()
        if not line:
            return None
        line = line.decode('ascii').strip()
        if line == '':
            if headers:
                break
            continue
        key, _, value = line.partition(':')
        headers[key.strip().lower()] = value.strip()
    length = int(headers['content-length'])
    chunks, remaining = [], length
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return json.loads(b''.join(chunks).decode('utf-8'))


def utf16_offset(text: str, column: int) -> int:
    """Converts a 1-based character column into a 0-based UTF-16 code-unit offset."""
    prefix = text[:column - 1]
    return len(prefix.encode('utf-16-le')) // 2


def column_from_utf16(text: str, offset: int) -> int:
    """Converts a 0-based UTF-16 code-unit offset into a 1-based character column."""
    units = 0
    for index, char in enumerate(text):
        if units >= offset:
            return index + 1
        units += 2 if ord(char) > 0xFFFF else 1
    return len(text) + 1


def path_to_uri(root: Path, path: str) -> str:
    return (Path(root) / path).absolute().as_uri()


def uri_to_path(root: Path, uri: str) -> str:
    absolute = Path(unquote(urlparse(uri).path))
    try:
        return absolute.relative_to(Path(root).absolute()).as_posix()
    except ValueError:
        return absolute.as_posix()



class LspClient:
    """
    A minimal JSON-RPC client for one language-server session.

    Attributes:
        reader (BinaryIO):
            Stream of server messages, e.g. the server's stdout.

        writer (BinaryIO):
            Stream to the server, e.g. its stdin.

        timeout (float):
            Seconds to wait for a response or for diagnostics.

    Note:
        A background thread reads every message.  Responses are matched to requests by id;
        `textDocument/publishDiagnostics` notifications are kept per URI.  Requests are serialized
        with a lock, so one session handles one request at a time.
    """

    def __init__(self, **args):
        self.reader: BinaryIO = args.get('reader')
        self.writer: BinaryIO = args.get('writer')
        self.timeout: float = args.get('timeout', 30.0)
        self._next_id = 0
        self._request_lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._condition = threading.Condition()
        self._responses: Dict[int, Dict] = {}
        self._diagnostics: Dict[str, Tuple[int, List[Dict]]] = {}
        self._publish_count = 0
        self._closed = False
        self._thread = threading.Thread(target=self._read_loop, name='lsp-reader', daemon=True)
        self._thread.start()
        log.debug('Constructed new LspClient!')

    def _read_loop(self):
        try:
            while True:
                message = read_message(self.reader)
                if message is None:
                    break
                self._dispatch(message)
        except (OSError, ValueError) as e:
            log.warning(f'Language server stream failed:  {e}')
        finally:
            with self._condition:
                self._closed = True
                self._condition.notify_all()

    def _dispatch(self, message: Dict):
        with self._condition:
            if 'id' in message and 'method' not in message:
                self._responses[message['id']] = message
            elif message.get('method') == 'textDocument/publishDiagnostics':
                params = message.get('params', {})
                self._publish_count += 1
                self._diagnostics[params.get('uri')] = (self._publish_count, params.get('diagnostics', []))
            elif 'id' in message and 'method' in message:
                # Server-to-client request, e.g. workspace/configuration; answer with null.
                self._write({'jsonrpc': '2.0', 'id': message['id'], 'result': None})
            self._condition.notify_all()

    def _write(self, message: Dict):
        try:
            with self._write_lock:
                self.writer.write(encode_message(message))
                self.writer.flush()
        except (OSError, ValueError) as e:
            raise BackendUnavailable(f'Cannot write to language server:  {e}.') from e

    def request(self, method: str, params: Any) -> Any:
        with self._request_lock:
            self._next_id += 1
            request_id = self._next_id
            log.debug(f'Sending request {request_id}:  {method}.')
            self._write({'jsonrpc': '2.0', 'id': request_id, 'method': method, 'params': params})
            deadline = time.monotonic() + self.timeout
            with self._condition:
                while request_id not in self._responses:
                    remaining = deadline - time.monotonic()
                    if self._closed or remaining <= 0:
                        raise BackendUnavailable(f'No response to {method} from language server.')
                    self._condition.wait(remaining)
                response = self._responses.pop(request_id)
        if 'error' in response:
            raise BackendUnavailable(f'Language server error on {method}:  {response["error"].get("message")}.')
        return response.get('result')

    def notify(self, method: str, params: Any):
        self._write({'jsonrpc': '2.0', 'method': method, 'params': params})

    def publish_marker(self) -> int:
        with self._condition:
            return self._publish_count

    def wait_for_diagnostics(self, uri: str, after: int, timeout: float = None) -> List[Dict]:
        """Waits for a diagnostics notification for `uri` newer than marker `after`."""
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        with self._condition:
            while True:
                marker, diagnostics = self._diagnostics.get(uri, (0, None))
                if marker > after:
                    return diagnostics
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise DiagnosticsTimeout(f'No diagnostics for {uri} within {self.timeout:0.1f}s.')
                if self._closed:
                    raise BackendUnavailable('Language server closed the connection.')
                self._condition.wait(remaining)



class LspBackend(NavigationBackend):
    """
    Navigation backed by an external language server speaking JSON-RPC over stdio.

    Attributes:
        command (List[str]):
            Server command line, e.g. `['pylsp']`.

        root (Path):
            Workspace root, sent as `rootUri`.

        timeout (float):
            Seconds to wait for responses and diagnostics.

        client (LspClient):
            Optional pre-built client.  When given, no process is started.

    Note:
        Unsaved content is sent with `didOpen`/`didChange` (full-text sync).  Lines and columns are
        1-based characters on this side and 0-based UTF-16 code units on the wire.
    """

    def __init__(self, **args):
        self.command: List[str] = args.get('command')
        self.root: Path = Path(args.get('root'))
        self.timeout: float = args.get('timeout', 30.0)
        self.languages: List[str] = args.get('languages')
        self.process: Optional[subprocess.Popen] = None
        self.client: LspClient = args.get('client') or self._start()
        self._versions: Dict[str, int] = {}
        self._overlays: Dict[str, str] = {}
        self._initialize()
        log.info(f'Constructed new LspBackend!  command = {self.command}, root = {self.root}')

    def _start(self) -> LspClient:
        try:
            self.process = subprocess.Popen(
                self.command, cwd=self.root, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            )
        except (OSError, TypeError) as e:
            raise BackendUnavailable(f'Cannot start language server {self.command}:  {e}.') from e
        return LspClient(reader=self.process.stdout, writer=self.process.stdin, timeout=self.timeout)

    def _initialize(self):
        self.client.request('initialize', {
            'processId': None,
            'rootUri': self.root.absolute().as_uri(),
            'capabilities': {
                'general': {'positionEncodings': ['utf-16']},
                'textDocument': {
                    'synchronization': {'didSave': False},
                    'publishDiagnostics': {'versionSupport': True},
                    'definition': {'linkSupport': False},
                },
            },
            'workspaceFolders': None,
        })
        self.client.notify('initialized', {})

    def supports(self, path: str) -> bool:
        language = LANGUAGE_IDS.get(Path(path).suffix)
        return language is not None and (self.languages is None or language in self.languages)

    def read(self, path: str) -> str:
        if path in self._overlays:
            return self._overlays[path]
        try:
            return (self.root / path).read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise PositionOutOfRange(f'Unknown or unreadable file:  {path} ({e}).') from e

    def open(self, path: str, content: str):
        uri = path_to_uri(self.root, path)
        if path not in self._versions:
            self._versions[path] = 1
            self.client.notify('textDocument/didOpen', {'textDocument': {
                'uri': uri, 'languageId': LANGUAGE_IDS.get(Path(path).suffix, 'plaintext'),
                'version': 1, 'text': content,
            }})
        else:
            self._versions[path] += 1
            self.client.notify('textDocument/didChange', {
                'textDocument': {'uri': uri, 'version': self._versions[path]},
                'contentChanges': [{'text': content}],
            })
        self._overlays[path] = content

    def _position_params(self, pos: ResolvedPosition) -> Dict:
        if pos.path not in self._overlays:
            self.open(pos.path, self.read(pos.path))
        lines = self.read(pos.path).split('\n')
        if pos.line > len(lines):
            raise PositionOutOfRange(f'Line outside the file:  {pos.path}:{pos.line}.')
        return {
            'textDocument': {'uri': path_to_uri(self.root, pos.path)},
            'position': {'line': pos.line - 1, 'character': utf16_offset(lines[pos.line - 1], pos.column)},
        }

    def _locations(self, result) -> List[Location]:
        if result is None:
            return []
        if isinstance(result, dict):
            result = [result]
        locations = set()
        for item in result:
            uri = item.get('uri') or item.get('targetUri')
            span = item.get('range') or item.get('targetSelectionRange') or item.get('targetRange')
            path = uri_to_path(self.root, uri)
            line = span['start']['line'] + 1
            try:
                text = self.read(path).split('\n')[line - 1]
            except (PositionOutOfRange, IndexError):
                text = ''
            locations.add(Location(path, line, column_from_utf16(text, span['start']['character'])))
        return sorted(locations, key=lambda x: (x.path, x.line, x.column))

    def definition(self, pos: ResolvedPosition) -> List[Location]:
        return self._locations(self.client.request('textDocument/definition', self._position_params(pos)))

    def references(self, pos: ResolvedPosition) -> List[Location]:
        params = self._position_params(pos)
        params['context'] = {'includeDeclaration': False}
        return self._locations(self.client.request('textDocument/references', params))

    def diagnostics(self, path: str, content: str) -> List[Diagnostic]:
        marker = self.client.publish_marker()
        self.open(path, content)
        raw = self.client.wait_for_diagnostics(path_to_uri(self.root, path), marker, self.timeout)
        diagnostics = [
            Diagnostic(
                path=path,
                line=x['range']['start']['line'] + 1,
                severity=LSP_SEVERITY.get(x.get('severity', 1), Severity.ERROR),
                code=None if x.get('code') is None else str(x.get('code')),
                message=x.get('message', ''),
            )
            for x in raw
        ]
        return sorted(diagnostics, key=lambda x: (x.line, x.code or '', x.message))

    def close(self):
        try:
            self.client.request('shutdown', None)
            self.client.notify('exit', None)
        except BackendUnavailable as e:
            log.warning(f'Language server did not shut down cleanly:  {e}')
        if self.process is not None:
            try:
                self.process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.process.kill()
