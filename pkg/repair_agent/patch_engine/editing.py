import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence
from repair_agent.config import DEFAULTS
from repair_agent.errors import AmbiguousExactMatch, MalformedBlock, NoAcceptableMatch, UnreadablePath
from repair_agent.patch_engine.blocks import EditBlock
from repair_agent.patch_engine.diffs import PatchSet, UnifiedDiff, render_unified_diff, split_keepends
from repair_agent.patch_engine.matching import MatchResult, locate_match
log = logging.getLogger(__name__)



@dataclass
class EditResult:
    """
    Outcome of one simulated edit.  Nothing is written to disk.

    Attributes:
        new_content (str):
            File text after the edit.

        diff (UnifiedDiff):
            Change from the old to the new text.  Applying it to the old text gives `new_content`.

        match (MatchResult):
            Where the search block was found.  None for file creation.

        indentation_undecidable (bool):
            The first lines of both the search block and the matched segment are blank, so the
            replacement was inserted without re-indentation.
    """
    new_content: str
    diff: UnifiedDiff
    match: Optional[MatchResult] = None
    indentation_undecidable: bool = False


@dataclass
class EditBatch:
    """Result of `apply_edits`:  final text per touched file, the combined patch, and each block's result."""
    contents: Dict[str, str] = field(default_factory=dict)
    originals: Dict[str, Optional[str]] = field(default_factory=dict)
    patch: PatchSet = field(default_factory=PatchSet)
    results: List[EditResult] = field(default_factory=list)



def _indentation(line: str) -> str:
    return line[:len(line) - len(line.lstrip())]


def reindent(lines: Sequence[str], search_first: str, match_first: str) -> List[str]:
    """
    Moves replacement lines from the search block's indentation to the matched segment's.

    A line starting with the search block's first-line indentation gets that prefix swapped for
    the matched segment's, so tabs and spaces are copied verbatim from the file.  Other lines are
    shifted by the difference in indentation width.  Blank lines are left alone.
    """
    source, target = _indentation(search_first), _indentation(match_first)
    if source == target:
        return list(lines)
    unit = target[:1] or source[:1] or ' '
    offset = len(target) - len(source)
    result = []
    for line in lines:
        if not line.strip():
            result.append(line)
        elif line.startswith(source):
            result.append(target + line[len(source):])
        elif offset > 0:
            result.append(unit * offset + line)
        else:
            removable = min(-offset, len(_indentation(line)))
            result.append(line[removable:])
    return result


def apply_edit(
    content: Optional[str], block: EditBlock, threshold: float = DEFAULTS['fuzzy_threshold'],
    context: int = DEFAULTS['context_lines'],
) -> EditResult:
    """
    Applies an edit block to file text, in memory.

    Args:
        content (str):
            Current file text, or None if the file does not exist.

        block (EditBlock):
            The edit.  An empty search section creates the file.

        threshold (float):
            Minimum fuzzy score accepted by `locate_match`.

        context (int):
            Context lines of the returned diff.

    Returns:
        EditResult:  The new text and its diff.  The file ends with a newline iff it did before;
        created files always do.

    Raises:
        MalformedBlock:  An empty search section for a file that exists.
        UnreadablePath:  A non-empty search section for a file that does not exist.
        NoAcceptableMatch, AmbiguousExactMatch:  From `locate_match`, with the path attached.
    """

    # Create.
    if content is None:
        if not block.creates_file:
            raise UnreadablePath(block.path, 'does not exist')
        new = ''.join(x + '\n' for x in block.replace)
        log.debug(f'Creating {block.path} with {len(block.replace)} line(s).')
        return EditResult(new, render_unified_diff(None, new, block.path, context))
    if block.creates_file:
        raise MalformedBlock(f'empty search section, but {block.path} already exists', block.line)

    # Locate.
    try:
        match = locate_match(content, block.search, threshold)
    except NoAcceptableMatch as e:
        raise NoAcceptableMatch(e.best_score, e.best_start, e.best_end, e.threshold, block.path) from None
    except AmbiguousExactMatch as e:
        raise AmbiguousExactMatch(e.starts, block.path) from None
    if block.search == block.replace:
        return EditResult(content, render_unified_diff(content, content, block.path, context), match)

    # Replace.
    lines = split_keepends(content)
    matched = lines[match.start_line - 1:match.end_line]
    match_first = matched[0].rstrip('\r\n')
    undecidable = not block.search[0].strip() and not match_first.strip()
    if undecidable:
        log.warning(f'Cannot decide indentation for {block.path}:{match.start_line}; inserting without re-indenting.')
        replacement = list(block.replace)
    else:
        replacement = reindent(block.replace, block.search[0], match_first)
    eol = '\r\n' if matched[0].endswith('\r\n') else '\n'
    new = ''.join(lines[:match.start_line - 1] + [x + eol for x in replacement] + lines[match.end_line:])
    if not content.endswith('\n') and new.endswith('\n'):
        new = new[:-2] if new.endswith('\r\n') else new[:-1]
    log.debug(f'Edited {block.path}:  lines {match.start_line}-{match.end_line} via {match.strategy.value}, score = {match.score:0.3f}')
    return EditResult(new, render_unified_diff(content, new, block.path, context), match, undecidable)


def apply_edits(
    blocks: Sequence[EditBlock], read: Callable[[str], Optional[str]], threshold: float = DEFAULTS['fuzzy_threshold'],
    context: int = DEFAULTS['context_lines'],
) -> EditBatch:
    """
    Applies a list of edit blocks, all or nothing.

    Blocks for the same file are applied in order against the running text.  The first failing
    block raises and no result is returned, so nothing can be half-applied.

    Args:
        blocks (Sequence[EditBlock]):
            Parsed edit blocks.

        read (Callable[[str], Optional[str]]):
            Returns the current text of a path, or None if it does not exist.

    Returns:
        EditBatch:  Final text per touched file and one diff per file, from original to final.
    """
    batch = EditBatch()
    for block in blocks:
        if block.path not in batch.contents:
            batch.originals[block.path] = read(block.path)
            current = batch.originals[block.path]
        else:
            current = batch.contents[block.path]
        result = apply_edit(current, block, threshold, context)
        batch.contents[block.path] = result.new_content
        batch.results.append(result)
    for path in sorted(batch.contents):
        diff = render_unified_diff(batch.originals[path], batch.contents[path], path, context)
        if not diff.is_empty():
            batch.patch.append(diff)
    log.info(f'Applied {len(blocks)} edit block(s) to {len(batch.contents)} file(s) in memory.')
    return batch
