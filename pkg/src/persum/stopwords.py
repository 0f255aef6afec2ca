"""Fixed English stopword list (127 entries) and small word heuristics.

The list ships in-repo so tokenisation is reproducible without external
resources; an alternative list can be supplied per corpus via a plain
one-word-per-line file.
"""

STOPWORDS = frozenset([
    "a", "about", "above", "after", "again", "against", "all", "am", "an",
    "and", "any", "are", "as", "at", "be", "because", "been", "before",
    "being", "below", "between", "both", "but", "by", "can",
    "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is",
    "it", "its", "itself", "just", "me", "more", "most", "my", "myself",
    "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "same", "she", "should",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "then", "there", "these", "they", "this", "those", "through", "to",
    "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "within", "would", "you", "your", "yours", "yourself",
    "also", "may", "might", "must", "shall",
])

# Connective cues that open a sentence which coherently follows its
# predecessor; used by the coherence edge-weight proxy.
CONNECTIVES = frozenset([
    "however", "therefore", "moreover", "furthermore", "thus", "hence",
    "consequently", "meanwhile", "nevertheless", "nonetheless", "instead",
    "additionally", "finally", "similarly", "accordingly", "indeed",
    "besides", "still", "then", "also", "yet", "next", "overall",
])

# Suffixes that mark a token as verb/adverb-like for the noun heuristic.
VERB_SUFFIXES = ("ing", "ed", "ly")


def is_stopword(token: str) -> bool:
    return token in STOPWORDS


def is_noun_like(token: str) -> bool:
    """Heuristic content-noun test: not a stopword, not verb/adverb shaped."""
    if token in STOPWORDS or len(token) < 3:
        return False
    return not token.endswith(VERB_SUFFIXES)


def load_stopwords(path) -> frozenset:
    """Load a one-word-per-line replacement stopword list."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())
