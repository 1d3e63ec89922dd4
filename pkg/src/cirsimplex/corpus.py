"""Sparse bag-of-words corpora: file format, synthesis, held-out splits.

File format (plain text):

    D          number of documents
    W          vocabulary size
    NNZ        number of (doc, word) entries that follow
    docID wordID count      one triple per line, 1-indexed, count >= 1

The optional vocabulary file holds one token per line (wordID order).
Saving always writes triples sorted by (doc, word), so save(load(f)) is a
fixpoint byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError
from .rng import RngStream


@dataclass
class Corpus:
    n_docs: int
    n_words: int
    doc_words: list          # per doc: sorted unique word ids, 0-indexed int64
    doc_counts: list         # per doc: counts aligned with doc_words
    vocab: list | None = None

    def __post_init__(self):
        if len(self.doc_words) != self.n_docs or len(self.doc_counts) != self.n_docs:
            raise DataError("document arrays do not match n_docs")
        if self.vocab is not None and len(self.vocab) != self.n_words:
            raise DataError("vocabulary size does not match n_words")

    def n_tokens(self) -> int:
        return int(sum(int(c.sum()) for c in self.doc_counts))

    def doc_length(self, d: int) -> int:
        return int(self.doc_counts[d].sum())

    def tokens(self, d: int) -> np.ndarray:
        """Word ids of document d expanded to one entry per token."""
        return np.repeat(self.doc_words[d], self.doc_counts[d])


def _read_int(line: str, what: str, lineno: int) -> int:
    try:
        return int(line.strip())
    except ValueError:
        raise DataError(f"line {lineno}: expected integer {what}, got {line!r}") from None


def load_corpus(path, vocab_path=None) -> Corpus:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    if len(lines) < 3:
        raise DataError("corpus file too short for its three-line header")
    n_docs = _read_int(lines[0], "document count", 1)
    n_words = _read_int(lines[1], "vocabulary size", 2)
    nnz = _read_int(lines[2], "entry count", 3)
    if n_docs < 1 or n_words < 1 or nnz < 0:
        raise DataError("corpus header values out of range")
    body = [ln for ln in lines[3:] if ln.strip()]
    if len(body) != nnz:
        raise DataError(f"header promises {nnz} entries, file has {len(body)}")

    per_doc: dict[int, list] = {}
    for off, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 3:
            raise DataError(f"line {off + 4}: expected `docID wordID count`")
        d, w, c = (_read_int(p, "field", off + 4) for p in parts)
        if not (1 <= d <= n_docs):
            raise DataError(f"line {off + 4}: docID {d} out of range")
        if not (1 <= w <= n_words):
            raise DataError(f"line {off + 4}: wordID {w} out of range")
        if c < 1:
            raise DataError(f"line {off + 4}: count must be >= 1")
        per_doc.setdefault(d - 1, []).append((w - 1, c))

    doc_words, doc_counts = [], []
    for d in range(n_docs):
        entries = sorted(per_doc.get(d, []))
        ws = [w for w, _ in entries]
        if len(set(ws)) != len(ws):
            raise DataError(f"document {d + 1} has duplicate word entries")
        doc_words.append(np.array(ws, dtype=np.int64))
        doc_counts.append(np.array([c for _, c in entries], dtype=np.int64))

    vocab = None
    if vocab_path is not None:
        try:
            with open(vocab_path) as fh:
                vocab = [ln.rstrip("\n") for ln in fh]
        except OSError as exc:
            raise DataError(f"cannot read vocabulary file {vocab_path}: {exc}") from exc
        while vocab and vocab[-1] == "":
            vocab.pop()
        if len(vocab) != n_words:
            raise DataError(
                f"vocabulary has {len(vocab)} tokens, corpus expects {n_words}")
    return Corpus(n_docs, n_words, doc_words, doc_counts, vocab)


def save_corpus(corpus: Corpus, path, vocab_path=None):
    nnz = sum(len(w) for w in corpus.doc_words)
    out = [str(corpus.n_docs), str(corpus.n_words), str(nnz)]
    for d in range(corpus.n_docs):
        order = np.argsort(corpus.doc_words[d])
        for i in order:
            out.append(f"{d + 1} {corpus.doc_words[d][i] + 1} {corpus.doc_counts[d][i]}")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    if vocab_path is not None:
        if corpus.vocab is None:
            raise DataError("corpus has no vocabulary to save")
        with open(vocab_path, "w") as fh:
            fh.write("\n".join(corpus.vocab) + "\n")


def synthetic_corpus(stream: RngStream, n_docs: int, n_words: int,
                     n_topics: int, doc_length, topic_conc: float = 0.1,
                     doc_conc: float = 1.0, vocab: bool = True):
    """Generate a topic-model corpus; returns (Corpus, ground_truth dict).

    doc_length is either a fixed int or ("poisson", lam) with a floor of one
    token. ground_truth holds the topic-word rows `omega` (n_topics, n_words)
    and document mixtures `eta` (n_docs, n_topics) that generated the data.
    """
    if n_docs < 1 or n_words < 2 or n_topics < 1:
        raise ParameterError("need n_docs >= 1, n_words >= 2, n_topics >= 1")
    omega = stream.gamma(topic_conc, 1.0, size=(n_topics, n_words))
    omega /= omega.sum(axis=1, keepdims=True)
    eta = stream.gamma(doc_conc, 1.0, size=(n_docs, n_topics))
    eta /= eta.sum(axis=1, keepdims=True)

    if isinstance(doc_length, tuple):
        kind, lam = doc_length
        if kind != "poisson" or lam <= 0:
            raise ParameterError("doc_length must be an int or ('poisson', lam > 0)")
        lengths = np.maximum(1, stream.poisson(float(lam), size=n_docs))
    else:
        if int(doc_length) < 1:
            raise ParameterError("doc_length must be >= 1")
        lengths = np.full(n_docs, int(doc_length))

    doc_words, doc_counts = [], []
    for d in range(n_docs):
        z = stream.categorical(eta[d], size=int(lengths[d]))
        words = np.empty(int(lengths[d]), dtype=np.int64)
        for k in np.unique(z):
            mask = z == k
            words[mask] = stream.categorical(omega[k], size=int(mask.sum()))
        bins = np.bincount(words, minlength=n_words)
        nz = np.nonzero(bins)[0]
        doc_words.append(nz.astype(np.int64))
        doc_counts.append(bins[nz].astype(np.int64))

    voc = [f"w{i:04d}" for i in range(n_words)] if vocab else None
    corpus = Corpus(n_docs, n_words, doc_words, doc_counts, voc)
    return corpus, {"omega": omega, "eta": eta}


@dataclass
class HeldOutDoc:
    doc_id: int                # id in the original corpus
    train_tokens: np.ndarray   # word ids, one per token
    test_tokens: np.ndarray


@dataclass
class HoldoutSplit:
    train: Corpus
    heldout: list
    heldout_ids: np.ndarray
    n_too_short: int = 0

    def n_test_tokens(self) -> int:
        return int(sum(len(d.test_tokens) for d in self.heldout))


def split_holdout(stream: RngStream, corpus: Corpus, n_holdout: int,
                  test_fraction: float = 0.1) -> HoldoutSplit:
    """Hold out n_holdout documents and split each one's tokens for completion.

    Each held-out document keeps floor(test_fraction * length) tokens for
    testing (chosen by a stream permutation) and the rest for inferring its
    topic mixture. Documents whose test share rounds down to zero go wholly
    to the train side and are counted in n_too_short.
    """
    if not (0 < n_holdout < corpus.n_docs):
        raise ParameterError("need 0 < n_holdout < n_docs")
    if not (0.0 < test_fraction < 1.0):
        raise ParameterError("test_fraction must be in (0, 1)")
    held = stream.without_replacement(corpus.n_docs, n_holdout)
    held_set = set(int(d) for d in held)

    train_words = [corpus.doc_words[d] for d in range(corpus.n_docs)
                   if d not in held_set]
    train_counts = [corpus.doc_counts[d] for d in range(corpus.n_docs)
                    if d not in held_set]
    train = Corpus(corpus.n_docs - n_holdout, corpus.n_words,
                   train_words, train_counts, corpus.vocab)

    heldout, n_too_short = [], 0
    for d in held:
        toks = corpus.tokens(int(d))
        n_test = int(len(toks) * test_fraction)
        if n_test == 0:
            n_too_short += 1
            heldout.append(HeldOutDoc(int(d), toks,
                                      np.empty(0, dtype=np.int64)))
            continue
        perm = stream.permutation(len(toks))
        heldout.append(HeldOutDoc(int(d), toks[perm[n_test:]],
                                  toks[perm[:n_test]]))
    return HoldoutSplit(train, heldout, held, n_too_short)
