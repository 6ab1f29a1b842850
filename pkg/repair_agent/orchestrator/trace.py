import hashlib
import json
import logging
import pandas
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pandas import DataFrame
from pathlib import Path
from typing import Dict, List, Optional, Tuple
from repair_agent.errors import GraphFormatError, UnreadablePath
log = logging.getLogger(__name__)


TRACE_SCHEMA = 'repair-agent-trace'
TRACE_VERSION = 1



def digest(value) -> str:
    """Short content hash of any JSON-serializable value or text."""
    text = value if isinstance(value, str) else json.dumps(value, sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


@dataclass(frozen=True)
class TraceEvent:
    """
    One step of a repair run.

    Attributes:
        seq (int):
            Position in the trace, from 1.

        time (float):
            Seconds since the trace started.

        role (str):
            Acting role, or `Orchestrator` for pipeline steps.

        tool (str):
            Tool used, or None for steps that use no tool (completions, routing, denials).

        action (str):
            What happened, e.g. `complete`, `edit`, `reset`, `permission-denied`.

        status (str):
            `ok`, `rejected`, `denied` or `error`.

        input_digest, output_digest (str):
            Short hashes of what went in and came out.

        detail (str):
            One-line human-readable note.
    """
    seq: int
    time: float
    role: str
    tool: Optional[str]
    action: str
    status: str
    input_digest: str
    output_digest: str
    detail: str = ''

    def to_record(self) -> Dict:
        return asdict(self)



class Trace:
    """
    Append-only event log of one task.

    Events are kept in memory and, if `path` is set, written as JSON lines as they happen.  The
    first line is a header record `{"schema": "repair-agent-trace", "version": 1, ...}`.
    """

    def __init__(self, **args):
        self.path: Optional[Path] = Path(args['path']) if args.get('path') else None
        self.task: str = args.get('task', '')
        self.events: List[TraceEvent] = []
        self._started = time.monotonic()
        self._lock = threading.Lock()
        self.header = {
            'schema': TRACE_SCHEMA,
            'version': TRACE_VERSION,
            'task': self.task,
            'started': datetime.now(timezone.utc).isoformat(timespec='seconds'),
        }
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, 'w', encoding='utf-8') as file:
                file.write(json.dumps(self.header) + '\n')
        log.debug(f'Constructed new Trace!  path = {self.path}')

    def record(self, role, tool, action: str, status: str = 'ok', inputs=None, outputs=None, detail: str = '') -> TraceEvent:
        with self._lock:
            event = TraceEvent(
                seq=len(self.events) + 1,
                time=round(time.monotonic() - self._started, 3),
                role=getattr(role, 'value', role),
                tool=getattr(tool, 'value', tool),
                action=action,
                status=status,
                input_digest=digest(inputs if inputs is not None else ''),
                output_digest=digest(outputs if outputs is not None else ''),
                detail=' '.join(str(detail).split())[:300],
            )
            self.events.append(event)
            if self.path is not None:
                with open(self.path, 'a', encoding='utf-8') as file:
                    file.write(json.dumps(event.to_record()) + '\n')
        log.debug(f'Trace:  {event.role} {event.tool or "-"} {event.action} {event.status}')
        return event

    def tool_uses(self) -> List[Tuple[str, str]]:
        return [(x.role, x.tool) for x in self.events if x.tool is not None]

    def to_frame(self) -> DataFrame:
        return events_frame(self.events)


def load_trace(path: Path) -> Tuple[Dict, List[TraceEvent]]:
    """
    Reads a trace file.

    Raises:
        UnreadablePath:  The file does not exist.
        GraphFormatError:  The header or a record is malformed, or the schema version differs.
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadablePath(path, 'no such file')
    with open(path, 'r', encoding='utf-8') as file:
        lines = [x for x in file.read().split('\n') if x.strip()]
    try:
        header = json.loads(lines[0])
        if header.get('schema') != TRACE_SCHEMA or header.get('version') != TRACE_VERSION:
            raise GraphFormatError(f'Unsupported trace schema:  {header.get("schema")} v{header.get("version")}.')
        events = [TraceEvent(**json.loads(x)) for x in lines[1:]]
    except (IndexError, ValueError, TypeError) as e:
        raise GraphFormatError(f'Corrupt trace file {path}:  {e}.') from e
    return header, events


def events_frame(events: List[TraceEvent]) -> DataFrame:
    columns = list(TraceEvent.__dataclass_fields__)
    return pandas.DataFrame([x.to_record() for x in events], columns=columns)
