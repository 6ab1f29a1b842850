import inspect
import logging
import threading
import tree_sitter_go
import tree_sitter_python
from dataclasses import dataclass, field
from tree_sitter import Language, Node, Parser, Tree
from typing import Dict, Iterator, List, Optional, Tuple
from repair_agent.ckg.entities import CodeEntity, EntityKind, make_entity_id
from repair_agent.errors import ParseFailure
log = logging.getLogger(__name__)



@dataclass
class PendingReference:
    """An unresolved use of `name` (optionally `qualifier.name`) inside entity `src`."""
    src: str
    name: str
    qualifier: Optional[str]
    path: str
    line: int


@dataclass
class PendingImport:
    """An unresolved import.  `module` is a Go import path or a (possibly relative) Python module."""
    src: str
    module: str
    names: List[str]
    alias: Optional[str]
    line: int


@dataclass
class ExtractedFile:
    """Everything one extractor found in one file, before cross-file resolution."""
    path: str
    language: str
    entities: List[CodeEntity] = field(default_factory=list)
    contains: List[Tuple[str, str, int]] = field(default_factory=list)
    calls: List[PendingReference] = field(default_factory=list)
    references: List[PendingReference] = field(default_factory=list)
    inherits: List[PendingReference] = field(default_factory=list)
    imports: List[PendingImport] = field(default_factory=list)

    @property
    def file_id(self) -> str:
        return self.path


def _coerce_language(obj) -> Language:
    """Language wheels return either a capsule/pointer or a `Language` depending on version."""
    return obj if isinstance(obj, Language) else Language(obj)


def node_text(node: Node, source: bytes) -> str:
    return source[node.start_byte:node.end_byte].decode('utf-8', errors='replace')


def node_line(node: Node) -> int:
    return node.start_point[0] + 1


def is_field(parent: Node, field_name: str, node: Node) -> bool:
    child = parent.child_by_field_name(field_name)
    return child is not None and child.id == node.id


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal of all descendants, including `node` itself."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def find_syntax_errors(tree: Tree) -> List[Node]:
    """Returns ERROR and MISSING nodes in source order."""
    if not tree.root_node.has_error:
        return []
    return [x for x in walk(tree.root_node) if x.type == 'ERROR' or x.is_missing]



class Extractor:
    """
    Common interface of the per-language entity extractors.

    Subclasses declare `language`, `extensions` and the grammar, and implement `_extract`.  Parsers
    are not thread-safe, so every thread gets its own via `threading.local`.

    Attributes:
        language (str):
            Language tag, e.g. `go`.

        extensions (Tuple[str]):
            File suffixes handled by this extractor, e.g. `('.go',)`.
    """
    language: str = None
    extensions: Tuple[str, ...] = ()

    def __init__(self):
        self._language = _coerce_language(self._grammar())
        self._local = threading.local()

    def _grammar(self):
        raise NotImplementedError

    @property
    def parser(self) -> Parser:
        if getattr(self._local, 'parser', None) is None:
            self._local.parser = Parser(self._language)
        return self._local.parser

    def handles(self, path: str) -> bool:
        return path.endswith(self.extensions)

    def parse(self, source: bytes) -> Tree:
        return self.parser.parse(source)

    def extract(self, path: str, source: bytes) -> ExtractedFile:
        """
        Extracts entities and pending relationships from one file.

        Raises:
            ParseFailure:  The file is not UTF-8, or the grammar reports syntax errors.
        """
        try:
            source.decode('utf-8')
        except UnicodeDecodeError as e:
            raise ParseFailure(path, f'not valid UTF-8 ({e.reason})')
        tree = self.parse(source)
        errors = find_syntax_errors(tree)
        if errors:
            raise ParseFailure(path, f'syntax error at line {node_line(errors[0])}')
        result = ExtractedFile(path=path, language=self.language)
        lines = source.count(b'\n') + (0 if source.endswith(b'\n') or not source else 1)
        file_entity = CodeEntity(
            id=make_entity_id(path, EntityKind.FILE, path, 1),
            kind=EntityKind.FILE,
            name=path.rsplit('/', 1)[-1],
            path=path,
            start_line=1,
            end_line=max(1, lines),
            language=self.language,
        )
        result.entities.append(file_entity)
        self._extract(tree, source, result)
        return result

    def _extract(self, tree: Tree, source: bytes, result: ExtractedFile):
        raise NotImplementedError

    def _add_entity(
        self,
        result: ExtractedFile,
        parent_id: str,
        kind: EntityKind,
        name: str,
        qualname: str,
        node: Node,
        source: bytes,
        signature: str = None,
        doc: str = None,
        anchor: Node = None,
    ) -> CodeEntity:
        """Adds an entity spanning `node`.  Its column is taken from `anchor` if given, e.g. an assignment target."""
        start = node_line(node)
        column = (anchor if anchor is not None else node).start_point[1] + 1
        entity = CodeEntity(
            id=make_entity_id(result.path, kind, qualname, start, column),
            kind=kind,
            name=name,
            path=result.path,
            start_line=start,
            end_line=max(start, node.end_point[0] + 1),
            signature=signature,
            doc=doc,
            qualname=qualname,
            language=self.language,
            start_column=column,
        )
        result.entities.append(entity)
        result.contains.append((parent_id, entity.id, start))
        return entity



class GoExtractor(Extractor):
    """
    Extracts structs, interfaces/types, functions, methods and package-level variables from Go.

    Methods are contained by their file (they are top-level declarations in Go) and reference
    their receiver type.  Embedded struct fields become `Inherits` edges.
    """
    language = 'go'
    extensions = ('.go',)

    def _grammar(self):
        return tree_sitter_go.language()

    def _extract(self, tree: Tree, source: bytes, result: ExtractedFile):
        file_id = result.file_id
        for child in tree.root_node.named_children:
            if child.type == 'import_declaration':
                self._extract_imports(child, source, result)
            elif child.type == 'function_declaration':
                name = node_text(child.child_by_field_name('name'), source)
                entity = self._add_entity(
                    result, file_id, EntityKind.FUNCTION, name, name, child, source,
                    signature=self._signature(child, source), doc=self._doc(child, source),
                )
                self._extract_uses(child, entity.id, source, result)
            elif child.type == 'method_declaration':
                name = node_text(child.child_by_field_name('name'), source)
                receiver = self._receiver_type(child, source)
                qualname = f'{receiver}.{name}' if receiver else name
                entity = self._add_entity(
                    result, file_id, EntityKind.METHOD, name, qualname, child, source,
                    signature=self._signature(child, source), doc=self._doc(child, source),
                )
                self._extract_uses(child, entity.id, source, result)
            elif child.type == 'type_declaration':
                self._extract_types(child, source, result)
            elif child.type in ('var_declaration', 'const_declaration'):
                self._extract_variables(child, source, result)

    def _extract_imports(self, node: Node, source: bytes, result: ExtractedFile):
        for spec in walk(node):
            if spec.type != 'import_spec':
                continue
            path = node_text(spec.child_by_field_name('path'), source).strip('"`')
            alias_node = spec.child_by_field_name('name')
            alias = node_text(alias_node, source) if alias_node is not None else path.rsplit('/', 1)[-1]
            result.imports.append(PendingImport(result.file_id, path, [], alias, node_line(spec)))

    def _extract_types(self, node: Node, source: bytes, result: ExtractedFile):
        for spec in node.named_children:
            if spec.type not in ('type_spec', 'type_alias'):
                continue
            name = node_text(spec.child_by_field_name('name'), source)
            type_node = spec.child_by_field_name('type')
            kind = EntityKind.STRUCT if type_node is not None and type_node.type == 'struct_type' else EntityKind.CLASS
            doc_anchor = node if len(node.named_children) == 1 else spec
            entity = self._add_entity(
                result, result.file_id, kind, name, name, spec, source,
                signature=f'type {name} {type_node.type.replace("_type", "") if type_node is not None else ""}'.strip(),
                doc=self._doc(doc_anchor, source),
            )
            if kind == EntityKind.STRUCT:
                self._extract_embedded(type_node, entity.id, source, result)

    def _extract_embedded(self, struct_node: Node, entity_id: str, source: bytes, result: ExtractedFile):
        for decl in walk(struct_node):
            if decl.type != 'field_declaration' or decl.child_by_field_name('name') is not None:
                continue
            type_node = decl.child_by_field_name('type')
            if type_node is None:
                continue
            ref = self._type_reference(type_node, entity_id, source, result.path)
            if ref is not None:
                result.inherits.append(ref)

    def _extract_variables(self, node: Node, source: bytes, result: ExtractedFile):
        for spec in walk(node):
            if spec.type not in ('var_spec', 'const_spec'):
                continue
            for name_node in spec.children_by_field_name('name'):
                name = node_text(name_node, source)
                if name == '_':
                    continue
                entity = self._add_entity(
                    result, result.file_id, EntityKind.VARIABLE, name, name, spec, source,
                    signature=' '.join(node_text(spec, source).split()), doc=self._doc(spec, source), anchor=name_node,
                )
                self._extract_uses(spec, entity.id, source, result)

    def _extract_uses(self, node: Node, src_id: str, source: bytes, result: ExtractedFile):
        """Records calls and type references inside a declaration."""
        for x in walk(node):
            if x.type == 'call_expression':
                function = x.child_by_field_name('function')
                if function is None:
                    continue
                if function.type == 'identifier':
                    result.calls.append(PendingReference(src_id, node_text(function, source), None, result.path, node_line(x)))
                elif function.type == 'selector_expression':
                    operand = function.child_by_field_name('operand')
                    qualifier = node_text(operand, source) if operand is not None and operand.type == 'identifier' else None
                    name = node_text(function.child_by_field_name('field'), source)
                    result.calls.append(PendingReference(src_id, name, qualifier, result.path, node_line(function.child_by_field_name('field'))))
            elif x.type in ('type_identifier', 'qualified_type') and x.parent is not None and x.parent.type != 'qualified_type':
                ref = self._type_reference(x, src_id, source, result.path)
                if ref is not None:
                    result.references.append(ref)

    def _type_reference(self, node: Node, src_id: str, source: bytes, path: str) -> Optional[PendingReference]:
        while node.type == 'pointer_type' and node.named_children:
            node = node.named_children[0]
        if node.type == 'type_identifier':
            return PendingReference(src_id, node_text(node, source), None, path, node_line(node))
        if node.type == 'qualified_type':
            package = node.child_by_field_name('package')
            name = node.child_by_field_name('name')
            return PendingReference(src_id, node_text(name, source), node_text(package, source), path, node_line(node))
        return None

    def _receiver_type(self, node: Node, source: bytes) -> Optional[str]:
        receiver = node.child_by_field_name('receiver')
        if receiver is None:
            return None
        for x in walk(receiver):
            if x.type == 'type_identifier':
                return node_text(x, source)
        return None

    def _signature(self, node: Node, source: bytes) -> str:
        body = node.child_by_field_name('body')
        end = body.start_byte if body is not None else node.end_byte
        return ' '.join(source[node.start_byte:end].decode('utf-8', errors='replace').split())

    def _doc(self, node: Node, source: bytes) -> Optional[str]:
        """Collects the run of line comments that ends on the line above `node`."""
        comments = []
        expected = node.start_point[0] - 1
        sibling = node.prev_named_sibling
        while sibling is not None and sibling.type == 'comment' and sibling.end_point[0] == expected:
            comments.append(node_text(sibling, source))
            expected = sibling.start_point[0] - 1
            sibling = sibling.prev_named_sibling
        if not comments:
            return None
        lines = [x[2:].strip() if x.startswith('//') else x.strip('/*').strip() for x in reversed(comments)]
        return '\n'.join(lines)



# Statements whose bodies bind names in the enclosing scope.
NESTED_STATEMENTS = (
    'block', 'if_statement', 'elif_clause', 'else_clause', 'try_statement', 'except_clause',
    'except_group_clause', 'finally_clause', 'with_statement', 'for_statement', 'while_statement',
    'match_statement', 'case_clause',
)



class PythonExtractor(Extractor):
    """
    Extracts classes, functions, methods and module/class-level variables from Python.  Variables
    bound under `if`, `try`, `with` and loop statements count as module or class variables.

    Functions defined directly in a class body are methods; nested functions are contained by
    their enclosing function.  Base classes become `Inherits` edges; bare names used inside
    functions and classes become candidate `References`.
    """
    language = 'python'
    extensions = ('.py',)

    def _grammar(self):
        return tree_sitter_python.language()

    def _extract(self, tree: Tree, source: bytes, result: ExtractedFile):
        self._visit_block(tree.root_node, result.file_id, EntityKind.FILE, '', source, result)

    def _visit_block(self, block: Node, scope_id: str, scope_kind: EntityKind, prefix: str, source: bytes, result: ExtractedFile):
        for child in block.named_children:
            if scope_kind in (EntityKind.FILE, EntityKind.CLASS):
                self._visit_assignments(child, scope_id, prefix, source, result)
            self._visit_node(child, scope_id, scope_kind, prefix, source, result)

    def _visit_assignments(self, node: Node, scope_id: str, prefix: str, source: bytes, result: ExtractedFile):
        """Module and class variables, including those bound under `if`, `try`, `with` and loops."""
        if node.type == 'expression_statement':
            self._visit_assignment(node, scope_id, prefix, source, result)
        elif node.type in NESTED_STATEMENTS:
            for child in node.named_children:
                self._visit_assignments(child, scope_id, prefix, source, result)

    def _visit_node(self, node: Node, scope_id: str, scope_kind: EntityKind, prefix: str, source: bytes, result: ExtractedFile):
        """
        Records calls, imports and (inside functions/classes) name references below `node`.

        Nested class and function definitions open a new scope and are not descended into here.
        """
        stack = [node]
        while stack:
            x = stack.pop()
            if x.type == 'class_definition':
                self._visit_class(x, scope_id, prefix, source, result)
                continue
            if x.type == 'function_definition':
                self._visit_function(x, scope_id, scope_kind, prefix, source, result)
                continue
            if x.type == 'call':
                ref = self._name_reference(x.child_by_field_name('function'), scope_id, source, result.path)
                if ref is not None:
                    result.calls.append(ref)
            elif x.type in ('import_statement', 'import_from_statement'):
                self._extract_import(x, source, result)
                continue
            elif x.type == 'identifier' and scope_kind != EntityKind.FILE and self._is_load(x):
                result.references.append(PendingReference(scope_id, node_text(x, source), None, result.path, node_line(x)))
            stack.extend(reversed(x.children))

    def _visit_class(self, node: Node, scope_id: str, prefix: str, source: bytes, result: ExtractedFile):
        name = node_text(node.child_by_field_name('name'), source)
        qualname = prefix + name
        body = node.child_by_field_name('body')
        entity = self._add_entity(
            result, scope_id, EntityKind.CLASS, name, qualname, node, source,
            signature=self._signature(node, source), doc=self._docstring(body, source),
        )
        bases = node.child_by_field_name('superclasses')
        if bases is not None:
            for base in bases.named_children:
                ref = self._name_reference(base, entity.id, source, result.path)
                if ref is not None:
                    result.inherits.append(ref)
        if body is not None:
            self._visit_block(body, entity.id, EntityKind.CLASS, qualname + '.', source, result)

    def _visit_function(self, node: Node, scope_id: str, scope_kind: EntityKind, prefix: str, source: bytes, result: ExtractedFile):
        name = node_text(node.child_by_field_name('name'), source)
        kind = EntityKind.METHOD if scope_kind == EntityKind.CLASS else EntityKind.FUNCTION
        body = node.child_by_field_name('body')
        entity = self._add_entity(
            result, scope_id, kind, name, prefix + name, node, source,
            signature=self._signature(node, source), doc=self._docstring(body, source),
        )
        for field_name in ('parameters', 'return_type'):
            part = node.child_by_field_name(field_name)
            if part is not None:
                self._visit_node(part, entity.id, kind, prefix + name + '.', source, result)
        if body is not None:
            self._visit_block(body, entity.id, kind, prefix + name + '.', source, result)

    def _visit_assignment(self, statement: Node, scope_id: str, prefix: str, source: bytes, result: ExtractedFile):
        for assignment in statement.named_children:
            if assignment.type != 'assignment':
                continue
            left = assignment.child_by_field_name('left')
            targets = [left] if left is not None and left.type == 'identifier' else []
            if left is not None and left.type in ('pattern_list', 'tuple_pattern'):
                targets = [x for x in left.named_children if x.type == 'identifier']
            for target in targets:
                name = node_text(target, source)
                self._add_entity(
                    result, scope_id, EntityKind.VARIABLE, name, prefix + name, statement, source,
                    signature=' '.join(node_text(statement, source).split())[:200], anchor=target,
                )

    def _is_load(self, node: Node) -> bool:
        """True for identifiers that read a name (not definitions, attributes, keywords or callees)."""
        parent = node.parent
        if parent is None:
            return False
        if parent.type == 'attribute':
            return is_field(parent, 'object', node)
        if parent.type == 'call':
            return not is_field(parent, 'function', node)
        if parent.type in ('keyword_argument', 'default_parameter', 'typed_default_parameter'):
            return not is_field(parent, 'name', node)
        if parent.type in ('assignment', 'augmented_assignment'):
            return not is_field(parent, 'left', node)
        if parent.type in ('function_definition', 'class_definition', 'parameters', 'lambda_parameters',
                           'typed_parameter', 'dotted_name', 'aliased_import'):
            return False
        return True

    def _extract_import(self, node: Node, source: bytes, result: ExtractedFile):
        line = node_line(node)
        if node.type == 'import_statement':
            for name in node.children_by_field_name('name'):
                if name.type == 'aliased_import':
                    module = node_text(name.child_by_field_name('name'), source)
                    alias = node_text(name.child_by_field_name('alias'), source)
                else:
                    module = node_text(name, source)
                    alias = module.split('.')[0]
                result.imports.append(PendingImport(result.file_id, module, [], alias, line))
        else:
            module = node_text(node.child_by_field_name('module_name'), source)
            names = []
            for name in node.children_by_field_name('name'):
                if name.type == 'aliased_import':
                    name = name.child_by_field_name('name')
                names.append(node_text(name, source))
            result.imports.append(PendingImport(result.file_id, module, names, None, line))

    def _name_reference(self, node: Node, src_id: str, source: bytes, path: str) -> Optional[PendingReference]:
        if node is None:
            return None
        if node.type == 'identifier':
            return PendingReference(src_id, node_text(node, source), None, path, node_line(node))
        if node.type == 'attribute':
            obj = node.child_by_field_name('object')
            attr = node.child_by_field_name('attribute')
            return PendingReference(src_id, node_text(attr, source), node_text(obj, source), path, node_line(attr))
        return None

    def _signature(self, node: Node, source: bytes) -> str:
        body = node.child_by_field_name('body')
        end = body.start_byte if body is not None else node.end_byte
        return ' '.join(source[node.start_byte:end].decode('utf-8', errors='replace').split()).rstrip(':')

    def _docstring(self, body: Optional[Node], source: bytes) -> Optional[str]:
        if body is None or not body.named_children:
            return None
        first = body.named_children[0]
        if first.type != 'expression_statement' or not first.named_children or first.named_children[0].type != 'string':
            return None
        text = node_text(first.named_children[0], source)
        for quote in ('"""', "'''", '"', "'"):
            start = text.find(quote)
            if start != -1 and text.endswith(quote) and len(text) >= start + 2 * len(quote):
                return inspect.cleandoc(text[start + len(quote):len(text) - len(quote)])
        return None



EXTRACTORS: Dict[str, type] = {
    'go': GoExtractor,
    'python': PythonExtractor,
}


def get_extractors(languages) -> List[Extractor]:
    """Instantiates the shipped extractors for the requested language tags; unknown tags are skipped."""
    extractors = []
    for tag in sorted({x.lower() for x in languages}):
        if tag in EXTRACTORS:
            extractors.append(EXTRACTORS[tag]())
        else:
            log.warning(f'No extractor ships for language:  {tag}.')
    return extractors


def extractor_for_path(path: str, extractors: List[Extractor] = None) -> Optional[Extractor]:
    """Returns the first extractor whose extensions match `path`."""
    for extractor in extractors if extractors is not None else _default_extractors():
        if extractor.handles(path):
            return extractor
    return None


_DEFAULTS: List[Extractor] = []
_DEFAULTS_LOCK = threading.Lock()


def _default_extractors() -> List[Extractor]:
    with _DEFAULTS_LOCK:
        if not _DEFAULTS:
            _DEFAULTS.extend(get_extractors(EXTRACTORS))
        return _DEFAULTS
