import pytest
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.ckg.query import EntityScorer, Provenance, fallback_rerank, query_entities
from repair_agent.errors import EmptyQuery, ScorerFailure



class FailingScorer(EntityScorer):
    def score(self, graph, query):
        raise RuntimeError('scorer down')


def _names(graph, ranked):
    return [graph.entity(x).name for x in ranked.ids]


def test_struct_b_constructor(listing_graph):
    ranked = query_entities(listing_graph, 'struct b constructor')
    names = _names(listing_graph, ranked)
    scores = dict(zip(names, [s for _, s in ranked]))
    assert names[0] == 'StructB'
    assert scores['StructB'] == pytest.approx(2 / 3)
    assert scores['NewStructB'] == pytest.approx(0.5)
    assert scores['StructA'] == pytest.approx(0.25)
    assert names.index('NewStructB') < names.index('StructA')


def test_exact_mention(listing_graph):
    ranked = query_entities(listing_graph, 'FunctionB')
    records = ranked.to_records(listing_graph)
    assert records[0]['name'] == 'FunctionB'
    assert records[0]['score'] == 1.0
    assert records[0]['rank'] == 1
    assert {'EntityRecognition', 'Keyword'} <= set(records[0]['provenance'])


def test_scores_non_increasing_and_unique(listing_graph):
    ranked = query_entities(listing_graph, 'Why does XFunction call FunctionB on StructB?')
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)
    assert len(set(ranked.ids)) == len(ranked.ids)
    assert all(0.0 <= s <= 1.0 for s in scores)
    assert len(ranked.provenance) == len(ranked.items)


@pytest.mark.parametrize('query', ['', '   \n'])
def test_empty_query(listing_graph, query):
    with pytest.raises(EmptyQuery):
        query_entities(listing_graph, query)


def test_empty_graph():
    assert len(query_entities(KnowledgeGraph([], [], 'empty'), 'anything')) == 0


def test_recognizer_failure_falls_back(listing_graph):
    def recognizer(query):
        raise TimeoutError('provider down')

    ranked = query_entities(listing_graph, 'NewStructB misbehaves', recognizer=recognizer)
    assert _names(listing_graph, ranked)[0] == 'NewStructB'


def test_recognizer_mentions(listing_graph):
    ranked = query_entities(listing_graph, 'the constructor is wrong', recognizer=lambda q: ['NewStructB'])
    assert _names(listing_graph, ranked)[0] == 'NewStructB'
    assert Provenance.ENTITY_RECOGNITION in ranked.provenance[0]


def test_one_scorer_failing(listing_graph):
    ranked = query_entities(listing_graph, 'FunctionB', scorers={Provenance.KEYWORD: FailingScorer()})
    assert _names(listing_graph, ranked)[0] == 'FunctionB'


def test_all_scorers_failing(listing_graph):
    scorers = {x: FailingScorer() for x in Provenance}
    with pytest.raises(ScorerFailure):
        query_entities(listing_graph, 'FunctionB', scorers=scorers)


def test_reranker_failure_uses_fallback(listing_graph):
    def reranker(graph, query, candidates):
        raise RuntimeError('reranker down')

    expected = query_entities(listing_graph, 'struct b constructor')
    ranked = query_entities(listing_graph, 'struct b constructor', reranker=reranker)
    assert ranked.items == expected.items


def test_reranker_order_is_kept(listing_graph):
    def reranker(graph, query, candidates):
        return [(x, 0.5) for x in sorted(candidates, reverse=True)]

    ranked = query_entities(listing_graph, 'struct b constructor', reranker=reranker)
    assert ranked.ids == sorted(ranked.ids, reverse=True)


def test_fallback_tie_break(listing_graph):
    struct_b = listing_graph.by_name('StructB')[0]
    new_struct_b = listing_graph.by_name('NewStructB')[0]
    candidates = {
        struct_b.id: {Provenance.KEYWORD: 0.5},
        new_struct_b.id: {Provenance.SIMILARITY: 0.5},
    }
    ranked = fallback_rerank(listing_graph, 'q', candidates)
    assert [x for x, _ in ranked] == [new_struct_b.id, struct_b.id]
