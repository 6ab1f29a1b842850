"""
Exception hierarchy for the repair agent.

Every domain error derives from `RepairAgentError` and carries a class-level `exit_code`, which
the CLI uses as the process exit status.  The full table is documented in `docs/cli.md`.
"""



class RepairAgentError(Exception):
    """Base class of all domain errors."""
    exit_code: int = 1


class ConfigError(RepairAgentError):
    exit_code = 18


# Filesystem and graph.

class UnreadablePath(RepairAgentError):
    exit_code = 3

    def __init__(self, path, reason: str = 'not readable'):
        super().__init__(f'Cannot read path:  {path} ({reason}).')
        self.path = path
        self.reason = reason


class GraphFormatError(RepairAgentError):
    exit_code = 4


class NoExtractorAvailable(RepairAgentError):
    exit_code = 5


class ParseFailure(RepairAgentError):
    """A single file could not be parsed.  Non-fatal during graph builds."""
    exit_code = 5

    def __init__(self, path, reason: str):
        super().__init__(f'Cannot parse {path}:  {reason}.')
        self.path = path
        self.reason = reason


class EmptyQuery(RepairAgentError):
    exit_code = 6


class ScorerFailure(RepairAgentError):
    exit_code = 6


class UnknownEntity(RepairAgentError):
    exit_code = 6

    def __init__(self, entity_id: str):
        super().__init__(f'Unknown entity:  {entity_id}.')
        self.entity_id = entity_id


# Navigation and diagnostics.

class NoIdentifierFound(RepairAgentError):
    exit_code = 7


class AmbiguousIdentifier(RepairAgentError):
    exit_code = 7

    def __init__(self, message: str, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class PositionOutOfRange(RepairAgentError):
    exit_code = 7


class BackendUnavailable(RepairAgentError):
    exit_code = 8


class DiagnosticsTimeout(BackendUnavailable):
    exit_code = 8


# General indexing.

class InvalidGlob(RepairAgentError):
    exit_code = 9


class InvalidPattern(RepairAgentError):
    exit_code = 9


# Patch engine.

class NoBlocksFound(RepairAgentError):
    exit_code = 10

    def __init__(self, message: str = 'No edit blocks found.', malformed=()):
        super().__init__(message)
        self.malformed = list(malformed)


class MalformedBlock(RepairAgentError):
    exit_code = 10

    def __init__(self, reason: str, line: int):
        super().__init__(f'Malformed edit block at line {line}:  {reason}.')
        self.reason = reason
        self.line = line


class NoAcceptableMatch(RepairAgentError):
    exit_code = 11

    def __init__(self, best_score: float, best_start: int, best_end: int, threshold: float, path: str = None):
        where = f' in {path}' if path else ''
        super().__init__(
            f'No acceptable match{where}:  best score {best_score:0.3f} at lines {best_start}-{best_end} '
            f'is below threshold {threshold:0.2f}.'
        )
        self.best_score = best_score
        self.best_start = best_start
        self.best_end = best_end
        self.threshold = threshold
        self.path = path


class AmbiguousExactMatch(RepairAgentError):
    exit_code = 11

    def __init__(self, starts, path: str = None):
        where = f' in {path}' if path else ''
        super().__init__(f'Search block occurs {len(starts)} times{where}, at lines {list(starts)}.')
        self.starts = list(starts)
        self.path = path


class DiffApplyFailure(RepairAgentError):
    exit_code = 12


# Sandbox.

class SandboxUnavailable(RepairAgentError):
    exit_code = 14


class SpawnFailure(RepairAgentError):
    exit_code = 14


class SnapshotMissing(RepairAgentError):
    exit_code = 14


# Orchestrator.

class PermissionDenied(RepairAgentError):
    exit_code = 15

    def __init__(self, role, tool):
        super().__init__(f'Role {getattr(role, "value", role)} is not permitted to use tool {getattr(tool, "value", tool)}.')
        self.role = role
        self.tool = tool


class EmptyContext(RepairAgentError):
    exit_code = 16


class ReproductionNotConfirmed(RepairAgentError):
    exit_code = 16

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class BudgetExhausted(RepairAgentError):
    exit_code = 16


class AllCandidatesRejected(RepairAgentError):
    exit_code = 16

    def __init__(self, message: str, reasons=()):
        super().__init__(message)
        self.reasons = list(reasons)


class ProviderError(RepairAgentError):
    exit_code = 17
