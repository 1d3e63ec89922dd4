"""Training a small topic model with subsampled gamma-coordinate kernels.

A synthetic bag-of-words corpus (2000 documents, 200 words, 5 planted topics)
is fit by stochastic minibatch updates of the unnormalized topic-word matrix:
50 documents per step, gradients estimated by collapsed Gibbs sweeps over the
minibatch, held-out perplexity by document completion (a Gibbs pass on 90% of
each held-out document's tokens, scored on the remaining 10%).

Run:  python3 demos/topic_model.py          (about a minute)
"""

import os

import numpy as np

from cirsimplex import (LdaConfig, RngStream, split_holdout, synthetic_corpus,
                        train_lda)
from cirsimplex.svg import line_plot

OUT = os.path.join(os.path.dirname(__file__), "..", "runs", "demos")

stream = RngStream(21)
corpus, truth = synthetic_corpus(stream, n_docs=2000, n_words=200, n_topics=5,
                                 doc_length=("poisson", 40))
split = split_holdout(stream.child(1), corpus, n_holdout=200, test_fraction=0.1)
print(f"corpus: {corpus.n_docs} docs, {corpus.n_words} words, "
      f"{corpus.n_tokens()} tokens; {split.n_test_tokens()} held-out test tokens")
print(f"uniform-prediction perplexity would be {corpus.n_words}\n")

histories = {}
for j, kernel in enumerate(("cv-alt", "sgrld")):
    cfg = LdaConfig(n_topics=5, kernel=kernel, gibbs_sweeps=50, n_threads=4)
    res = train_lda(corpus, cfg, RngStream(100).child(j), 150, split=split)
    histories[kernel] = res.history
    print(f"{kernel}: final perplexity {res.history[-1][2]:.2f}; "
          f"counters {res.counters}")

print("\n iter   cv-altperp   sgrldperp")
for (it, _, p1), (_, _, p2) in zip(histories["cv-alt"], histories["sgrld"]):
    if it % 25 == 0:
        print(f"{it:5d}  {p1:11.2f}  {p2:10.2f}")

os.makedirs(OUT, exist_ok=True)
path = os.path.abspath(os.path.join(OUT, "topic_perplexity.svg"))
iters = np.array([row[0] for row in histories["cv-alt"]], dtype=float)
line_plot(path, iters,
          {k: np.array([row[2] for row in v]) for k, v in histories.items()},
          title="held-out perplexity by document completion",
          xlabel="iteration", ylabel="perplexity")
print(f"\nwrote {path}")
