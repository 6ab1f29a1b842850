import builtins
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from tree_sitter import Node, Tree
from typing import Dict, List, Optional, Set
from repair_agent.ckg.extractors import Extractor, extractor_for_path, find_syntax_errors, is_field, node_line, walk
log = logging.getLogger(__name__)


MODULE_NAMES = frozenset({
    '__file__', '__name__', '__doc__', '__path__', '__package__', '__spec__', '__loader__',
    '__builtins__', '__annotations__', '__dict__', '__cached__', '__module__', '__qualname__',
    '__class__',
})

BUILTIN_NAMES = frozenset(dir(builtins)) | MODULE_NAMES

# Parents under which a child identifier binds a name.
_BINDING_PARENTS = frozenset({
    'parameters', 'lambda_parameters', 'list_splat_pattern', 'dictionary_splat_pattern',
    'pattern_list', 'tuple_pattern', 'list_pattern', 'as_pattern_target', 'global_statement',
    'nonlocal_statement', 'case_pattern', 'keyword_pattern', 'splat_pattern',
})



class Severity(str, Enum):
    FATAL = 'Fatal'
    ERROR = 'Error'
    WARNING = 'Warning'
    INFO = 'Info'
    HINT = 'Hint'

    @property
    def rank(self) -> int:
        """Fatal is highest (4), Hint lowest (0)."""
        return _SEVERITY_RANK[self]

    @property
    def blocking(self) -> bool:
        return self in (Severity.FATAL, Severity.ERROR)

    def __ge__(self, other):
        return self.rank >= Severity(other).rank

    def __gt__(self, other):
        return self.rank > Severity(other).rank

    def __le__(self, other):
        return self.rank <= Severity(other).rank

    def __lt__(self, other):
        return self.rank < Severity(other).rank


_SEVERITY_RANK = {Severity.FATAL: 4, Severity.ERROR: 3, Severity.WARNING: 2, Severity.INFO: 1, Severity.HINT: 0}


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    severity: Severity
    code: Optional[str]
    message: str

    def to_record(self) -> Dict:
        record = asdict(self)
        record['severity'] = self.severity.value
        return record

    @classmethod
    def from_record(cls, record: Dict) -> 'Diagnostic':
        record = dict(record)
        record['severity'] = Severity(record['severity'])
        return cls(**record)



def stub_diagnostics(path: str, content: str, extractor: Extractor = None) -> List[Diagnostic]:
    """
    In-process diagnostics for files with a shipped grammar.

    Reports syntax errors and missing tokens for every language, and undefined names for Python,
    all as `Error`.  Results are sorted by line, code and message.

    Returns:
        List[Diagnostic]:  Empty when `path` has no shipped grammar.
    """
    extractor = extractor or extractor_for_path(path)
    if extractor is None:
        return []
    source = content.encode('utf-8')
    tree = extractor.parse(source)
    diagnostics = _syntax_diagnostics(path, tree, source)
    if extractor.language == 'python' and not diagnostics:
        diagnostics.extend(_undefined_names(path, tree, source))
    diagnostics.sort(key=lambda x: (x.line, x.code or '', x.message))
    log.debug(f'Stub diagnostics for {path}:  {len(diagnostics)} finding(s).')
    return diagnostics


def _syntax_diagnostics(path: str, tree: Tree, source: bytes) -> List[Diagnostic]:
    diagnostics = []
    for node in find_syntax_errors(tree):
        if node.is_missing:
            diagnostics.append(Diagnostic(path, node_line(node), Severity.ERROR, 'missing-token', f"Missing '{node.type}'"))
        else:
            text = source[node.start_byte:node.end_byte].decode('utf-8', errors='replace').strip().split('\n')[0][:40]
            diagnostics.append(Diagnostic(path, node_line(node), Severity.ERROR, 'syntax-error', f'Syntax error near {text!r}'))
    return diagnostics


def _undefined_names(path: str, tree: Tree, source: bytes) -> List[Diagnostic]:
    """
    Flow-insensitive undefined-name check:  a name is defined if it is bound anywhere in the file
    or is a builtin.  A star import disables the check.
    """
    root = tree.root_node
    bound: Set[str] = set()
    loads: List[Node] = []
    for node in walk(root):
        if node.type == 'wildcard_import':
            return []
        if node.type != 'identifier':
            continue
        if _is_binding(node):
            bound.add(_text(node, source))
        elif _is_load(node):
            loads.append(node)
    diagnostics = []
    for node in loads:
        name = _text(node, source)
        if name not in bound and name not in BUILTIN_NAMES:
            diagnostics.append(Diagnostic(path, node_line(node), Severity.ERROR, 'undefined-name', f"'{name}' is not defined"))
    return diagnostics


def _is_binding(node: Node) -> bool:
    parent = node.parent
    if parent is None:
        return False
    if parent.type in _BINDING_PARENTS:
        return True
    if parent.type in ('function_definition', 'class_definition', 'default_parameter', 'typed_default_parameter', 'named_expression'):
        return is_field(parent, 'name', node)
    if parent.type == 'typed_parameter':
        return parent.named_children[0].id == node.id
    if parent.type in ('assignment', 'augmented_assignment', 'for_statement', 'for_in_clause'):
        return is_field(parent, 'left', node)
    if parent.type == 'as_pattern':
        return is_field(parent, 'alias', node)
    if parent.type == 'aliased_import':
        return is_field(parent, 'alias', node)
    if parent.type == 'except_clause':
        children = parent.children
        index = next(i for i, x in enumerate(children) if x.id == node.id)
        return index > 0 and children[index - 1].type == 'as'
    if parent.type == 'dotted_name' and parent.parent is not None:
        # `import a.b` binds `a`; `from m import y` binds `y`.
        grand = parent.parent
        if grand.type == 'import_statement':
            return parent.named_children[0].id == node.id
        if grand.type == 'import_from_statement':
            return not is_field(grand, 'module_name', parent)
    return False


def _is_load(node: Node) -> bool:
    parent = node.parent
    if parent is None:
        return False
    if parent.type == 'attribute':
        return is_field(parent, 'object', node)
    if parent.type == 'keyword_argument':
        return not is_field(parent, 'name', node)
    if parent.type in ('dotted_name', 'aliased_import', 'relative_import', 'function_definition',
                       'class_definition', 'lambda_parameters', 'parameters'):
        return False
    return True


def _text(node: Node, source: bytes) -> str:
    return source[node.start_byte:node.end_byte].decode('utf-8', errors='replace')
