"""Tokenization helpers shared by matching, dedup and embeddings."""
import re

_TOKEN_RE = re.compile(r"[^\W_]+")

# Fixed 35-word list: articles, copulas, personal pronouns, common
# prepositions and the two coordinating conjunctions. Changing it changes
# dedup scores and stored anchor rankings.
STOPWORDS = frozenset(
    """
    a an the
    is am are was were be been being
    i you he she it we they me him her us them
    in on at to of for with from by about
    and or
    """.split()
)
assert len(STOPWORDS) == 35


def tokens(text):
    """Lowercased alphanumeric tokens in order, duplicates kept."""
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


def content_words(text):
    """Ordered, de-duplicated tokens with stopwords removed."""
    seen = {}
    for tok in tokens(text):
        if tok not in STOPWORDS and tok not in seen:
            seen[tok] = None
    return list(seen)


def content_word_set(text):
    return set(content_words(text))


def jaccard(a, b):
    """Jaccard overlap of two sets; two empty sets score 0."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def squash(text):
    """Collapse all whitespace runs (including newlines) to single spaces."""
    return " ".join(str(text).split())
