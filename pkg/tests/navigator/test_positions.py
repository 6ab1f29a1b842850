import pytest
from repair_agent.errors import AmbiguousIdentifier, NoIdentifierFound, PositionOutOfRange
from repair_agent.navigator.positions import PositionHint, Tier, identifier_tokens, resolve_position
from tests.config import config


FILE_A = 'main/fileA.go'
FILE_B = 'main/cmd/pkg_b/fileB.go'



@pytest.fixture(scope='module')
def snapshot():
    root = config.paths.listing
    return {x: (root / x).read_text() for x in (FILE_A, FILE_B)}


@pytest.mark.parametrize('hint, expected', [
    (PositionHint(FILE_A, 21, 'FunctionB'), (FILE_A, 21, 7, 'FunctionB', Tier.EXACT_LINE)),
    (PositionHint(FILE_A, 19, 'FunctionB'), (FILE_A, 21, 7, 'FunctionB', Tier.NEARBY_LINE)),
    (PositionHint(FILE_A, 18, 'NewStructB'), (FILE_A, 20, 16, 'NewStructB', Tier.NEARBY_LINE)),
    (PositionHint(FILE_A, 10), (FILE_A, 10, 6, 'StructA', Tier.EXACT_LINE)),
    (PositionHint(FILE_A, 3), (FILE_A, 2, 9, 'main', Tier.NEARBY_LINE)),
    (PositionHint(FILE_A, 2, 'NewStructB', (FILE_B,)), (FILE_B, 7, 6, 'NewStructB', Tier.OPENED_FILES)),
])
def test_resolve_position(snapshot, hint, expected):
    tiers = []
    pos = resolve_position(hint, snapshot, radius=3, observer=tiers.append)
    assert (pos.path, pos.line, pos.column, pos.identifier, pos.tier) == expected
    assert tiers[-1] == expected[-1]
    assert tiers == list(Tier)[:len(tiers)]


def test_nearby_prefers_nearest_line(snapshot):
    pos = resolve_position(PositionHint(FILE_A, 17, 'x'), snapshot, radius=3)
    assert (pos.line, pos.column) == (15, 12)


def test_nearby_ties_prefer_smaller_column():
    snapshot = {'t.py': 'z = 0; a = 1\n\na = 2\n'}
    pos = resolve_position(PositionHint('t.py', 2, 'a'), snapshot, radius=3)
    assert (pos.line, pos.column) == (3, 1)


def test_ambiguous_without_identifier(snapshot):
    with pytest.raises(AmbiguousIdentifier) as e:
        resolve_position(PositionHint(FILE_A, 21), snapshot, radius=3)
    assert {x[3] for x in e.value.candidates} == {'x', 'FunctionB'}


def test_not_found(snapshot):
    with pytest.raises(NoIdentifierFound):
        resolve_position(PositionHint(FILE_A, 2, 'Missing', (FILE_B,)), snapshot, radius=3)


def test_unknown_file(snapshot):
    with pytest.raises(PositionOutOfRange):
        resolve_position(PositionHint('main/nowhere.go', 1, 'x'), snapshot)


@pytest.mark.parametrize('args, error', [
    (('a.go', 0, 'x'), PositionOutOfRange),
    (('a.go', 1, 'two words'), NoIdentifierFound),
    (('a.go', 1, 'pkg.Name'), NoIdentifierFound),
])
def test_invalid_hint(args, error):
    with pytest.raises(error):
        PositionHint(*args)


def test_tokens_skip_strings_and_comments():
    tokens = identifier_tokens('a.py', 'x = "y"  # z\n')
    assert tokens == {1: [(1, 'x')]}


def test_tokens_fallback_skips_keywords():
    tokens = identifier_tokens('notes.txt', 'return value if ready\n')
    assert tokens == {1: [(8, 'value'), (17, 'ready')]}
