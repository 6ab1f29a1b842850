import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Set, Tuple
from repair_agent.ckg.entities import KIND_PRIORITY, split_identifier
from repair_agent.ckg.graph import KnowledgeGraph
from repair_agent.errors import EmptyQuery, ScorerFailure
log = logging.getLogger(__name__)


STOPWORDS = frozenset('''
    a an and are as at be by do does for from has have how i in is it its of on or so that the
    this to was we what when where which who why will with
'''.split())

_WORD = re.compile(r'[A-Za-z0-9_]+')
_IDENTIFIER = re.compile(r'[A-Za-z_][A-Za-z0-9_]*')



class Provenance(str, Enum):
    ENTITY_RECOGNITION = 'EntityRecognition'
    SIMILARITY = 'Similarity'
    KEYWORD = 'Keyword'


@dataclass
class RankedEntityList:
    """
    Final ranked candidates of an entity query.

    Attributes:
        items (List[Tuple[str, float]]):
            `(entity id, score)` pairs, scores non-increasing, ids unique.

        provenance (List[Set[Provenance]]):
            Per item, the candidate lists that surfaced it.
    """
    items: List[Tuple[str, float]] = field(default_factory=list)
    provenance: List[Set[Provenance]] = field(default_factory=list)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def ids(self) -> List[str]:
        return [x for x, _ in self.items]

    def to_records(self, graph: KnowledgeGraph) -> List[Dict]:
        records = []
        for rank, ((entity_id, score), tags) in enumerate(zip(self.items, self.provenance), start=1):
            entity = graph.entity(entity_id)
            records.append({
                'rank': rank,
                'id': entity_id,
                'kind': entity.kind.value,
                'name': entity.name,
                'path': entity.path,
                'start_line': entity.start_line,
                'end_line': entity.end_line,
                'score': round(score, 6),
                'provenance': sorted(x.value for x in tags),
            })
        return records



class EntityScorer:
    """
    One candidate-list strategy.  `score` returns `{entity id: score in [0, 1]}` for the entities it
    proposes; entities it does not propose are absent.
    """
    provenance: Provenance = None

    def score(self, graph: KnowledgeGraph, query: str) -> Dict[str, float]:
        raise NotImplementedError


class MentionScorer(EntityScorer):
    """
    Looks up entity mentions by name in SQL.

    Mentions come from `recognizer` (typically backed by the completion provider).  If it is not
    set, fails or returns nothing, the identifier-like tokens of the query are used instead.
    Exact-case name matches score 1.0, case-insensitive ones 0.9.
    """
    provenance = Provenance.ENTITY_RECOGNITION

    def __init__(self, recognizer: Callable[[str], List[str]] = None):
        self.recognizer = recognizer

    def mentions(self, query: str) -> List[str]:
        mentions = []
        if self.recognizer is not None:
            try:
                mentions = [x.strip() for x in self.recognizer(query) if x and x.strip()]
            except Exception as e:
                log.warning(f'Mention recognition failed, using query tokens instead:  {e}')
                mentions = []
        if not mentions:
            mentions = _IDENTIFIER.findall(query)
        return list(dict.fromkeys(mentions))

    def score(self, graph: KnowledgeGraph, query: str) -> Dict[str, float]:
        mentions = self.mentions(query)
        df = graph.store.ids_by_name(mentions, case_sensitive=False)
        exact = set(mentions)
        return {row.id: 1.0 if row.name in exact else 0.9 for row in df.itertuples()}


class TokenOverlapScorer(EntityScorer):
    """Jaccard similarity between the split, case-folded identifier tokens of query and entity name."""
    provenance = Provenance.SIMILARITY

    def score(self, graph: KnowledgeGraph, query: str) -> Dict[str, float]:
        query_tokens = set(split_identifier(query))
        if not query_tokens:
            return {}
        scores = {}
        for entity in graph.entities.values():
            tokens = set(split_identifier(entity.name))
            overlap = len(query_tokens & tokens)
            if overlap:
                scores[entity.id] = overlap / len(query_tokens | tokens)
        return scores


class KeywordScorer(EntityScorer):
    """
    Turns the query into keywords and retrieves entities by name in SQL.

    Per keyword, an entity scores 1.0 if the keyword equals its whole name, 0.75 if it equals one
    of its name tokens, 0.5 if it is a substring of the name.  The entity score is the mean over
    all keywords.
    """
    provenance = Provenance.KEYWORD

    def keywords(self, query: str) -> List[str]:
        words = [x.lower() for x in _WORD.findall(query)]
        return list(dict.fromkeys(x for x in words if x not in STOPWORDS))

    def score(self, graph: KnowledgeGraph, query: str) -> Dict[str, float]:
        keywords = self.keywords(query)
        df = graph.store.ids_by_keyword(keywords)
        scores = {}
        for row in df.itertuples():
            name = row.name.lower()
            tokens = set(split_identifier(row.name))
            total = 0.0
            for keyword in keywords:
                if keyword == name:
                    total += 1.0
                elif keyword in tokens:
                    total += 0.75
                elif keyword in name:
                    total += 0.5
            scores[row.id] = total / len(keywords)
        return scores


Reranker = Callable[[KnowledgeGraph, str, Dict[str, Dict[Provenance, float]]], List[Tuple[str, float]]]


def fallback_rerank(graph: KnowledgeGraph, query: str, candidates: Dict[str, Dict[Provenance, float]]) -> List[Tuple[str, float]]:
    """
    Deterministic re-ranking:  score is the maximum strategy score; ties go to the higher kind
    priority (functions and methods, then classes and structs, then variables, then files), then to
    the lexicographically smaller name, then id.
    """
    def key(item):
        entity = graph.entities[item[0]]
        return -item[1], KIND_PRIORITY[entity.kind], entity.name, entity.id

    return sorted(((x, max(scores.values())) for x, scores in candidates.items()), key=key)


def query_entities(
    graph: KnowledgeGraph,
    query: str,
    scorers: Mapping[Provenance, EntityScorer] = None,
    reranker: Reranker = None,
    recognizer: Callable[[str], List[str]] = None,
) -> RankedEntityList:
    """
    Answers a retrieval query with a ranked list of entities.

    Args:
        graph (KnowledgeGraph):
            Graph to search.

        query (str):
            Free text, possibly including code.

        scorers (Mapping[Provenance, EntityScorer]):
            Overrides for individual candidate lists, e.g. an embedding-backed scorer for
            `Similarity`.  Lists not overridden use the lexical defaults.

        reranker (Reranker):
            Merges and orders the candidates.  Falls back to `fallback_rerank` if omitted or if it
            fails.

        recognizer (Callable[[str], List[str]]):
            Entity-mention recognizer for the default `EntityRecognition` list.

    Returns:
        RankedEntityList:  The deduplicated union of the three candidate lists.

    Raises:
        EmptyQuery:  The query is blank.
        ScorerFailure:  Every candidate list failed.
    """
    if query is None or not query.strip():
        raise EmptyQuery('Query is empty.')
    active = {
        Provenance.ENTITY_RECOGNITION: MentionScorer(recognizer),
        Provenance.SIMILARITY: TokenOverlapScorer(),
        Provenance.KEYWORD: KeywordScorer(),
    }
    active.update(scorers or {})
    if not graph.entities:
        log.warning('Querying an empty graph.')
        return RankedEntityList()

    # Candidate lists.
    candidates: Dict[str, Dict[Provenance, float]] = {}
    failures = []
    for provenance, scorer in active.items():
        try:
            scores = scorer.score(graph, query)
        except Exception as e:
            log.warning(f'Candidate list {provenance.value} failed:  {e}')
            failures.append(provenance)
            continue
        for entity_id, score in scores.items():
            if entity_id in graph.entities:
                candidates.setdefault(entity_id, {})[provenance] = min(1.0, max(0.0, float(score)))
    if len(failures) == len(active):
        raise ScorerFailure(f'All candidate lists failed for query:  {query!r}.')

    # Rerank.
    ranked: Optional[List[Tuple[str, float]]] = None
    if reranker is not None:
        try:
            ranked = _normalize_ranking(reranker(graph, query, candidates), candidates)
        except Exception as e:
            log.warning(f'Reranker failed, using fallback ranking:  {e}')
    if ranked is None:
        ranked = fallback_rerank(graph, query, candidates)
    result = RankedEntityList(
        items=ranked,
        provenance=[set(candidates[x]) for x, _ in ranked],
    )
    log.debug(f'Query {query!r} returned {len(result):,} entities.')
    return result


def _normalize_ranking(ranked: List[Tuple[str, float]], candidates: Dict) -> List[Tuple[str, float]]:
    """Keeps the reranker's order but enforces unique ids, full coverage and non-increasing scores."""
    seen, result = set(), []
    for entity_id, score in ranked:
        if entity_id in candidates and entity_id not in seen:
            seen.add(entity_id)
            result.append((entity_id, min(1.0, max(0.0, float(score)))))
    missing = [x for x in candidates if x not in seen]
    if missing:
        raise ValueError(f'reranker dropped {len(missing)} candidate(s)')
    for i in range(1, len(result)):
        if result[i][1] > result[i - 1][1]:
            result[i] = (result[i][0], result[i - 1][1])
    return result
