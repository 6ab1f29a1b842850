"""
Command-line interface.

    repair-agent [--config FILE] [--json] [--log-level LEVEL] [--log-file FILE] <command> ...

Commands:

    index     Build a knowledge graph of a repository and save it.
    query     Rank the entities of a saved graph against a query.
    find      List the files of a repository matching a glob.
    grep      Search the files of a repository for a regular expression.
    edit      Apply an edit-block file to a repository in memory and print the diff.
    diagnose  Gate a diff against a file's diagnostics.
    solve     Resolve an issue end to end.
    trace     Print a trace file.

Exit codes are listed in `docs/cli.md`.  Every command except `index` and `solve` leaves the
repository untouched, and `solve` only ever modifies a temporary copy.
"""
import argparse
import json
import logging
import logging.config
import pandas
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence
from repair_agent.ckg.builder import build_graph
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.ckg.query import query_entities
from repair_agent.config import RunConfig, get_log_config, load_config
from repair_agent.diagnostics_gate.gate import DiagnosticsGate
from repair_agent.errors import DiffApplyFailure, RepairAgentError, UnreadablePath
from repair_agent.general_index.search import FileIndex
from repair_agent.navigator.navigator import create_navigator
from repair_agent.orchestrator.pipeline import solve
from repair_agent.orchestrator.trace import events_frame, load_trace
from repair_agent.patch_engine.blocks import parse_edit_blocks
from repair_agent.patch_engine.diffs import parse_unified_diff
from repair_agent.patch_engine.editing import apply_edits
log = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GATE_REJECTED = 13
EXIT_UNRESOLVED = 16



def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='repair-agent', description='Repository indexing, patching and issue repair.')
    parser.add_argument('--config', type=Path, help='YAML config file.')
    parser.add_argument('--json', action='store_true', help='Machine-readable output.')
    parser.add_argument('--log-level', default='WARNING', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--log-file', type=Path, help='Also write the log to this file.')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    # index
    sub = commands.add_parser('index', help='Build and save a knowledge graph.')
    sub.add_argument('repo', type=Path)
    sub.add_argument('--out', type=Path, required=True, help='Graph file to write.')
    sub.add_argument('--languages', type=_csv, help='Comma-separated language tags, e.g. go,python.')
    sub.add_argument('--workers', type=int)

    # query
    sub = commands.add_parser('query', help='Rank graph entities against a query.')
    sub.add_argument('graph', type=Path)
    sub.add_argument('query')
    sub.add_argument('--limit', type=int, default=20)

    # find
    sub = commands.add_parser('find', help='List files matching a glob.')
    sub.add_argument('repo', type=Path)
    sub.add_argument('pattern')

    # grep
    sub = commands.add_parser('grep', help='Search files for a regular expression.')
    sub.add_argument('repo', type=Path)
    sub.add_argument('pattern')
    sub.add_argument('--scope', help='Glob limiting the searched files.')

    # edit
    sub = commands.add_parser('edit', help='Apply edit blocks in memory and print the diff.')
    sub.add_argument('repo', type=Path)
    sub.add_argument('blocks', type=Path, help='File holding edit blocks.')
    sub.add_argument('--threshold', type=float, help='Fuzzy match threshold in (0, 1].')

    # diagnose
    sub = commands.add_parser('diagnose', help='Gate a diff against the diagnostics of a file.')
    sub.add_argument('file', type=Path, help='The original file.')
    sub.add_argument('diff', type=Path, help='Unified diff of the file.')

    # solve
    sub = commands.add_parser('solve', help='Resolve an issue.')
    sub.add_argument('repo', type=Path)
    sub.add_argument('issue', type=Path, help='Issue text file.')
    sub.add_argument('--replay', type=Path, help='Replay completions from this script; no network is used.')
    sub.add_argument('--out', type=Path, help='Write the solution diff here instead of stdout.')
    sub.add_argument('--trace', type=Path, help='Write the trace log here.')
    sub.add_argument('--runner', choices=['subprocess', 'container'])
    sub.add_argument('--n-candidates', type=int)
    sub.add_argument('--max-iterations', type=int)

    # trace
    sub = commands.add_parser('trace', help='Print a trace file.')
    sub.add_argument('path', type=Path)
    return parser


def _csv(text: str) -> List[str]:
    return [x.strip() for x in text.split(',') if x.strip()]


def _emit(args: argparse.Namespace, record, text: str):
    if args.json:
        print(json.dumps(record, indent=2, default=str))
    elif text:
        print(text, end='' if text.endswith('\n') else '\n')


def _reader(root: Path):
    """Returns a `read(path)` over files under `root`; paths escaping it read as missing."""
    root = root.resolve()

    def read(path: str) -> Optional[str]:
        target = (root / path).resolve()
        if root not in target.parents or not target.is_file():
            return None
        try:
            return target.read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise UnreadablePath(target, str(e)) from e

    return read



def cmd_index(args: argparse.Namespace, config: RunConfig) -> int:
    graph = build_graph(args.repo, config.languages, workers=config.workers, exclude_dirs=config.exclude_dirs)
    graph.save(args.out)
    record = {
        'graph': str(args.out),
        'snapshot_id': graph.snapshot_id,
        'entities': len(graph.entities),
        'relations': len(graph.relations),
        'report': graph.report.to_record() if graph.report else None,
    }
    _emit(args, record, f'Indexed {record["entities"]:,} entities and {record["relations"]:,} relations into {args.out}.')
    return EXIT_OK


def cmd_query(args: argparse.Namespace, config: RunConfig) -> int:
    graph = KnowledgeGraph.load(args.graph)
    records = query_entities(graph, args.query).to_records(graph)[:args.limit]
    frame = pandas.DataFrame(records, columns=['rank', 'score', 'kind', 'name', 'path', 'start_line', 'end_line'])
    _emit(args, records, frame.to_string(index=False) if records else 'No entities matched.')
    return EXIT_OK


def cmd_find(args: argparse.Namespace, config: RunConfig) -> int:
    paths = FileIndex(root=args.repo, exclude_dirs=config.exclude_dirs, grep_cap=config.grep_cap).find_file(args.pattern)
    _emit(args, paths, '\n'.join(paths))
    return EXIT_OK


def cmd_grep(args: argparse.Namespace, config: RunConfig) -> int:
    matches = FileIndex(root=args.repo, exclude_dirs=config.exclude_dirs, grep_cap=config.grep_cap).grep(args.pattern, args.scope)
    record = {'matches': [x.to_record() for x in matches], 'truncated': matches.truncated}
    text = '\n'.join(f'{x.path}:{x.line}:{x.column}:{x.line_text}' for x in matches)
    if matches.truncated:
        text += f'\n[truncated at {config.grep_cap} matches]'
    _emit(args, record, text)
    return EXIT_OK


def cmd_edit(args: argparse.Namespace, config: RunConfig) -> int:
    if not args.repo.is_dir():
        raise UnreadablePath(args.repo, 'not a directory')
    try:
        text = args.blocks.read_text(encoding='utf-8')
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadablePath(args.blocks, str(e)) from e
    blocks = parse_edit_blocks(text)
    batch = apply_edits(blocks, _reader(args.repo), args.threshold or config.fuzzy_threshold, config.context_lines)
    record = {
        'diff': batch.patch.to_text(),
        'files': batch.patch.paths,
        'matches': [
            {'path': b.path, **(r.match.to_record() if r.match else {}), 'indentation_undecidable': r.indentation_undecidable}
            for b, r in zip(blocks, batch.results)
        ],
        'malformed': [{'reason': x.reason, 'line': x.line} for x in blocks.malformed],
    }
    _emit(args, record, batch.patch.to_text())
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace, config: RunConfig) -> int:
    read = _reader(args.file.parent)
    original = read(args.file.name)
    if original is None:
        raise UnreadablePath(args.file, 'no such file')
    try:
        patch = parse_unified_diff(args.diff.read_text(encoding='utf-8'))
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadablePath(args.diff, str(e)) from e
    if len(patch) != 1:
        raise DiffApplyFailure(f'Expected a diff of exactly one file, found {len(patch)}.')
    navigator = create_navigator(config, args.file.parent)
    try:
        verdict = DiagnosticsGate(provider=navigator).evaluate(original, patch[0])
    finally:
        navigator.close()
    _emit(args, verdict.to_record(), verdict.message)
    return EXIT_OK if verdict.accepted else EXIT_GATE_REJECTED


def cmd_solve(args: argparse.Namespace, config: RunConfig) -> int:
    solution = solve(args.issue, config)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(solution.diff.to_text(), encoding='utf-8')
    record = solution.to_record()
    summary = f'{"Resolved" if solution.resolved else "Not resolved"} on the {solution.route.kind.value} route after {solution.attempts} attempt(s).'
    if args.json:
        _emit(args, record, '')
    else:
        if args.out is None:
            print(solution.diff.to_text(), end='')
        print(summary, file=sys.stderr)
    return EXIT_OK if solution.resolved else EXIT_UNRESOLVED


def cmd_trace(args: argparse.Namespace, config: RunConfig) -> int:
    header, events = load_trace(args.path)
    frame = events_frame(events)
    text = f'{header.get("task", "")}\n' + (frame.drop(columns=['input_digest', 'output_digest']).to_string(index=False) if events else '(no events)')
    _emit(args, {'header': header, 'events': [x.to_record() for x in events]}, text)
    return EXIT_OK


COMMANDS = {
    'index': cmd_index,
    'query': cmd_query,
    'find': cmd_find,
    'grep': cmd_grep,
    'edit': cmd_edit,
    'diagnose': cmd_diagnose,
    'solve': cmd_solve,
    'trace': cmd_trace,
}


def _flags(args: argparse.Namespace) -> Dict:
    """Config overrides given on the command line."""
    return {
        'repo': getattr(args, 'repo', None),
        'languages': getattr(args, 'languages', None),
        'workers': getattr(args, 'workers', None),
        'replay_script': getattr(args, 'replay', None),
        'trace_path': getattr(args, 'trace', None) if args.command == 'solve' else None,
        'sandbox_runner': getattr(args, 'runner', None),
        'n_candidates': getattr(args, 'n_candidates', None),
        'max_iterations': getattr(args, 'max_iterations', None),
    }


def main(argv: Sequence[str] = None) -> int:
    """Runs the CLI and returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.config.dictConfig(get_log_config(args.log_level, args.log_file))
    try:
        config = load_config(args.config, **_flags(args))
        return COMMANDS[args.command](args, config)
    except RepairAgentError as e:
        log.debug('Command failed.', exc_info=True)
        print(f'error: {e}', file=sys.stderr)
        return e.exit_code
