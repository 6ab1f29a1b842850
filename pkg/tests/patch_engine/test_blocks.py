import pytest
from repair_agent.errors import NoBlocksFound
from repair_agent.patch_engine.blocks import EditBlock, parse_edit_blocks
from tests.config import config



def test_listing_block():
    blocks = parse_edit_blocks((config.paths.edits / 'example.edit').read_text())
    assert blocks == [EditBlock(
        'example.txt',
        ['It contains multiple lines of text.', 'Here is another line.', 'Goodbye!'],
        ['It contains a few lines of text.', 'Here is yet another line.', 'See you later!'],
        2,
    )]
    assert blocks.malformed == []


@pytest.mark.parametrize('text', [
    'Fix below.\n\nsrc/app.py\n<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\nDone.\n',
    '```python\nsrc/app.py\n<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\n```\n',
    'src/app.py\n```python\n<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\n```\n',
    '**src/app.py**\n\n<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\n',
    'src/app.py\r\n<<<<<<< SEARCH\r\nold\r\n=======\r\nnew\r\n>>>>>>> REPLACE\r\n',
])
def test_prose_and_fences_are_ignored(text):
    blocks = parse_edit_blocks(text)
    assert [(x.path, x.search, x.replace) for x in blocks] == [('src/app.py', ('old',), ('new',))]


def test_several_blocks_keep_order():
    text = (
        'a.py\n<<<<<<< SEARCH\n1\n=======\n2\n>>>>>>> REPLACE\n'
        'b.py\n<<<<<<< SEARCH\n=======\nprint("new")\n>>>>>>> REPLACE\n'
        'a.py\n<<<<<<< SEARCH\n2\n=======\n3\n>>>>>>> REPLACE\n'
    )
    blocks = parse_edit_blocks(text)
    assert [x.path for x in blocks] == ['a.py', 'b.py', 'a.py']
    assert [x.line for x in blocks] == [2, 8, 13]
    assert blocks[1].creates_file
    assert not blocks[0].creates_file


def test_malformed_blocks_are_reported():
    text = (
        '<<<<<<< SEARCH\norphan\n=======\nx\n>>>>>>> REPLACE\n'
        'a.py\n<<<<<<< SEARCH\nunterminated\n'
        'b.py\n<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\n'
    )
    blocks = parse_edit_blocks(text)
    assert [x.path for x in blocks] == ['b.py']
    assert [x.line for x in blocks.malformed] == [1, 7]
    assert 'missing file path' in blocks.malformed[0].reason


@pytest.mark.parametrize('text, malformed', [
    ('', 0),
    ('Nothing to change here.\n', 0),
    ('<<<<<<< SEARCH\nold\n=======\nnew\n>>>>>>> REPLACE\n', 1),
    ('a.py\n<<<<<<< SEARCH\nold\n=======\nnew\n', 1),
])
def test_no_blocks(text, malformed):
    with pytest.raises(NoBlocksFound) as e:
        parse_edit_blocks(text)
    assert len(e.value.malformed) == malformed


def test_render_parses_back():
    block = EditBlock('pkg/mod.py', ['    x = 1', '', '    y = 2'], ['    x = 2'], 2)
    assert parse_edit_blocks(block.render()) == [block]
