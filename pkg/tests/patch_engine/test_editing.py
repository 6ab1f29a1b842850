import pytest
from repair_agent.errors import AmbiguousExactMatch, MalformedBlock, NoAcceptableMatch, UnreadablePath
from repair_agent.patch_engine.blocks import EditBlock, parse_edit_blocks
from repair_agent.patch_engine.editing import apply_edit, apply_edits, reindent
from repair_agent.patch_engine.matching import MatchStrategy
from tests.config import config



def test_listing_edit():
    root = config.paths.example
    blocks = parse_edit_blocks((config.paths.edits / 'example.edit').read_text())
    batch = apply_edits(blocks, lambda path: (root / path).read_text())
    assert batch.patch.to_text() == (config.paths.edits / 'example.diff').read_text()
    assert batch.contents['example.txt'].endswith('See you later!\n')
    assert batch.results[0].match.strategy == MatchStrategy.EXACT
    assert (root / 'example.txt').read_text().endswith('Goodbye!\n')


def test_reindent_to_match():
    content = 'def f(x):\n    if x:\n        return 1\n    return 0\n'
    block = EditBlock('f.py', ['if x:', '    return 1'], ['if x > 0:', '    return 2'])
    result = apply_edit(content, block)
    assert result.new_content == 'def f(x):\n    if x > 0:\n        return 2\n    return 0\n'
    assert result.match.strategy == MatchStrategy.WHITESPACE_NORMALIZED
    assert result.diff.apply(content) == result.new_content


@pytest.mark.parametrize('lines, search_first, match_first, expected', [
    (['a', '    b'], 'a', '  a', ['  a', '      b']),
    (['    a', '', '        b'], '    a', 'a', ['a', '', '    b']),
    (['  a', 'b'], '    x', 'x', ['a', 'b']),
    (['a'], '\tx', '\tx', ['a']),
])
def test_reindent(lines, search_first, match_first, expected):
    assert reindent(lines, search_first, match_first) == expected


def test_line_endings_are_kept():
    result = apply_edit('a\r\nb\r\nc\r\n', EditBlock('f.txt', ['b'], ['B', 'B2']))
    assert result.new_content == 'a\r\nB\r\nB2\r\nc\r\n'
    result = apply_edit('a\nb', EditBlock('f.txt', ['b'], ['c']))
    assert result.new_content == 'a\nc'


def test_create_file():
    result = apply_edit(None, EditBlock('new.py', [], ['x = 1']))
    assert result.new_content == 'x = 1\n'
    assert result.diff.old_path == '/dev/null'
    assert result.match is None


def test_empty_search_on_existing_file():
    with pytest.raises(MalformedBlock):
        apply_edit('x = 1\n', EditBlock('a.py', [], ['y = 2'], 4))


def test_search_in_missing_file():
    with pytest.raises(UnreadablePath):
        apply_edit(None, EditBlock('a.py', ['x'], ['y']))


def test_errors_carry_path():
    with pytest.raises(AmbiguousExactMatch) as e:
        apply_edit('x\nx\n', EditBlock('a.py', ['x'], ['y']))
    assert e.value.path == 'a.py'
    with pytest.raises(NoAcceptableMatch) as e:
        apply_edit('completely\ndifferent\n', EditBlock('a.py', ['nothing like it at all'], ['y']))
    assert e.value.path == 'a.py'
    assert 'a.py' in str(e.value)


def test_indentation_undecidable():
    content = 'a\n\n    b\n'
    result = apply_edit(content, EditBlock('f.py', ['', 'b'], ['', 'c']))
    assert result.indentation_undecidable
    assert result.new_content == 'a\n\nc\n'


def test_identical_replace_is_empty():
    result = apply_edit('x\n', EditBlock('a.py', ['x'], ['x']))
    assert result.diff.is_empty()
    assert result.new_content == 'x\n'


def test_blocks_chain_on_one_file():
    files = {'a.py': 'one\ntwo\n'}
    blocks = [EditBlock('a.py', ['one'], ['uno']), EditBlock('a.py', ['uno', 'two'], ['uno', 'dos']), EditBlock('b.py', [], ['new'])]
    batch = apply_edits(blocks, files.get)
    assert batch.contents == {'a.py': 'uno\ndos\n', 'b.py': 'new\n'}
    assert batch.patch.paths == ['a.py', 'b.py']
    assert batch.originals == {'a.py': 'one\ntwo\n', 'b.py': None}
    assert batch.patch.apply(files.get) == batch.contents


def test_batch_is_all_or_nothing():
    files = {'a.py': 'one\n'}
    blocks = [EditBlock('a.py', ['one'], ['uno']), EditBlock('a.py', ['missing line'], ['x'])]
    with pytest.raises(NoAcceptableMatch):
        apply_edits(blocks, files.get)
    assert files == {'a.py': 'one\n'}
