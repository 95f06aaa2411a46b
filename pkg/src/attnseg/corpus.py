"""Corpus ingestion: preprocessing, vocabularies, embeddings, features.

Corpus files follow the bakeoff convention: UTF-8 text, one sentence per
line, words separated by whitespace.  Preprocessing collapses runs of
Latin letters and of digits into the <ENG> / <NUM> flag tokens and can
replace idioms from a user-supplied lexicon with <IDIOM>; the flag tokens
then count as single characters everywhere downstream.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tagging

PAD, UNK, ENG, NUM = "<PAD>", "<UNK>", "<ENG>", "<NUM>"
IDIOM = "<IDIOM>"
RESERVED = (PAD, UNK, ENG, NUM)
SPECIALS = frozenset((PAD, UNK, ENG, NUM, IDIOM))

_FULLWIDTH_UPPER = set(chr(c) for c in range(0xFF21, 0xFF3B))
_FULLWIDTH_LOWER = set(chr(c) for c in range(0xFF41, 0xFF5B))
_FULLWIDTH_DIGIT = set(chr(c) for c in range(0xFF10, 0xFF1A))


def _is_latin(tok):
    if len(tok) != 1:
        return False
    return ("a" <= tok <= "z") or ("A" <= tok <= "Z") or \
        tok in _FULLWIDTH_UPPER or tok in _FULLWIDTH_LOWER


def _is_digit(tok):
    if len(tok) != 1:
        return False
    return ("0" <= tok <= "9") or tok in _FULLWIDTH_DIGIT


def load_lexicon(path):
    """Idiom lexicon: UTF-8, one idiom per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        idioms = [line.strip() for line in fh]
    return frozenset(i for i in idioms if i)


def preprocess(sentence, lexicon=None):
    """Normalize a sentence (a string, or a list of tokens) to a token list.

    Maximal runs of Latin letters collapse to one <ENG> token and maximal
    runs of digits to one <NUM> token (fullwidth forms included).  With a
    lexicon, exact idiom matches collapse to <IDIOM>, longest match first.
    Flag tokens already present pass through untouched, which makes the
    function idempotent.
    """
    toks = list(sentence)
    idioms = sorted(lexicon, key=len, reverse=True) if lexicon else ()
    out = []
    i = 0
    n = len(toks)
    while i < n:
        tok = toks[i]
        if tok in SPECIALS:
            out.append(tok)
            i += 1
            continue
        matched = False
        for idiom in idioms:
            k = len(idiom)
            if i + k <= n and toks[i:i + k] == list(idiom):
                out.append(IDIOM)
                i += k
                matched = True
                break
        if matched:
            continue
        if _is_latin(tok):
            while i < n and _is_latin(toks[i]):
                i += 1
            out.append(ENG)
        elif _is_digit(tok):
            while i < n and _is_digit(toks[i]):
                i += 1
            out.append(NUM)
        else:
            out.append(tok)
            i += 1
    return out


class Vocab:
    """Token <-> id map with fixed reserved slots 0..3 (PAD, UNK, ENG, NUM)."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            raise ValueError(f"vocab must start with the reserved tokens {RESERVED}")
        self.id_to_token = tokens
        self.token_to_id = {tok: i for i, tok in enumerate(tokens)}
        if len(self.token_to_id) != len(tokens):
            raise ValueError("duplicate token in vocab")

    @classmethod
    def build(cls, sentences):
        """Vocab over all tokens of an iterable of token sequences, in
        first-seen order after the reserved slots."""
        tokens = list(RESERVED)
        seen = set(RESERVED)
        for sent in sentences:
            for tok in sent:
                if tok not in seen:
                    seen.add(tok)
                    tokens.append(tok)
        return cls(tokens)

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def id(self, token):
        return self.token_to_id.get(token, 1)

    def encode(self, tokens):
        t2i = self.token_to_id
        return [t2i.get(tok, 1) for tok in tokens]


def bigram_key(first, second):
    """Vocab token for a character bigram (tab never occurs in tokens)."""
    return first + "\t" + second


def sentence_bigrams(tokens):
    """Bigram tokens (c_t, c_{t+1}) per position, <PAD> past the end."""
    keys = []
    for t in range(len(tokens)):
        nxt = tokens[t + 1] if t + 1 < len(tokens) else PAD
        keys.append(bigram_key(tokens[t], nxt))
    return keys


def build_bigram_vocab(corpus):
    return Vocab.build(sentence_bigrams(sent.tokens) for sent in corpus)


@dataclass
class Sentence:
    """One preprocessed sentence with its gold tags."""

    tokens: list
    tags: list
    raw: str = ""

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"{len(self.tokens)} tokens vs {len(self.tags)} tags"
            )
        if not self.tokens:
            raise ValueError("empty sentence")

    def words(self):
        return tagging.decode_tags(self.tokens, self.tags)


@dataclass
class Corpus:
    sentences: list = field(default_factory=list)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]


def load_corpus(path, lexicon=None):
    """Parse a bakeoff-format file into a Corpus.

    Each line is split on whitespace into words, each word is
    preprocessed (so a replacement token counts as one character), and
    the resulting segmentation is encoded to BMES tags.  Blank lines are
    skipped; a file yielding zero sentences, or one that is not valid
    UTF-8, is an error naming the line.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    sentences = []
    for lineno, line_bytes in enumerate(raw.split(b"\n"), start=1):
        try:
            line = line_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValueError(f"{path}: line {lineno}: not valid UTF-8") from exc
        words = line.split()
        if not words:
            continue
        token_words = [preprocess(w, lexicon) for w in words]
        tags = tagging.encode_tags(token_words)
        tokens = [tok for w in token_words for tok in w]
        sentences.append(Sentence(tokens=tokens, tags=tags, raw=line.strip()))
    if not sentences:
        raise ValueError(f"{path}: no sentences found")
    return Corpus(sentences)


def load_toy_corpus():
    """The bundled 32-sentence corpus used by the overfitting smoke test."""
    from importlib.resources import as_file, files

    ref = files("attnseg").joinpath("data/toy.txt")
    with as_file(ref) as path:
        return load_corpus(path)


def split_train_dev(corpus, dev_fraction, seed):
    """Deterministic shuffled split; dev gets round(dev_fraction * N).

    Rounding is half-up.  Raises when either side would be empty.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    n = len(corpus)
    n_dev = int(np.floor(dev_fraction * n + 0.5))
    if n_dev == 0 or n_dev == n:
        raise ValueError(
            f"corpus of {n} sentences is too small for a {dev_fraction} split"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    dev = Corpus([corpus[i] for i in order[:n_dev]])
    train = Corpus([corpus[i] for i in order[n_dev:]])
    return train, dev


def random_embeddings(count, dim, rng):
    """Uniform rows in [-0.05, 0.05], the init used for untrained tables."""
    return rng.uniform(-0.05, 0.05, size=(count, dim))


def load_embeddings(path, vocab, seed):
    """Load pretrained vectors in the textual "count dim" header format.

    Rows align to vocab ids.  Vocab tokens absent from the file keep a
    uniform random row in [-0.05, 0.05] drawn under `seed`; file tokens
    absent from the vocab are ignored.  Malformed lines are errors naming
    the line number.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: line 1: malformed header {header!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"{path}: line 1: malformed header {header!r}") from exc
        if count < 0 or dim <= 0:
            raise ValueError(f"{path}: line 1: malformed header {header!r}")
        rng = np.random.default_rng(seed)
        table = random_embeddings(len(vocab), dim, rng)
        seen = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise ValueError(
                    f"{path}: line {lineno}: expected {dim + 1} fields, "
                    f"got {len(fields)}"
                )
            token = fields[0]
            try:
                values = [float(v) for v in fields[1:]]
            except ValueError as exc:
                raise ValueError(
                    f"{path}: line {lineno}: non-numeric value"
                ) from exc
            seen += 1
            if token in vocab:
                table[vocab.id(token)] = values
        if seen != count:
            raise ValueError(
                f"{path}: header promised {count} vectors, file has {seen}"
            )
    return table


def featurize(ids, table, window, bigram_ids=None, bigram_table=None):
    """Per-character input vectors: a window of embeddings, centered.

    Row t is the concatenation of the embeddings of the `window`
    characters centered at t (the <PAD> row beyond sentence edges),
    optionally followed by the bigram embedding of (c_t, c_{t+1}).
    Returns an (n, window*dim [+ bigram_dim]) array.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if (bigram_ids is None) != (bigram_table is None):
        raise ValueError("bigram_ids and bigram_table go together")
    ids = np.asarray(ids, dtype=np.intp)
    n = ids.shape[0]
    half = window // 2
    padded = np.concatenate([np.zeros(half, dtype=np.intp), ids,
                             np.zeros(half, dtype=np.intp)])
    rows = table[padded]
    x = np.concatenate([rows[j:j + n] for j in range(window)], axis=1)
    if bigram_ids is not None:
        bigram_ids = np.asarray(bigram_ids, dtype=np.intp)
        if bigram_ids.shape[0] != n:
            raise ValueError(
                f"{bigram_ids.shape[0]} bigram ids for {n} characters"
            )
        x = np.concatenate([x, bigram_table[bigram_ids]], axis=1)
    return x


def window_ids(ids, window):
    """(n, window) matrix of the padded character ids each row of
    featurize() reads, used to scatter gradients back into the table."""
    ids = np.asarray(ids, dtype=np.intp)
    n = ids.shape[0]
    half = window // 2
    padded = np.concatenate([np.zeros(half, dtype=np.intp), ids,
                             np.zeros(half, dtype=np.intp)])
    return np.stack([padded[j:j + n] for j in range(window)], axis=1)
