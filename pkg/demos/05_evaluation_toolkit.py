"""
Scoring translations: BLEU, significance, length bins, alignments
==================================================================

Corpus BLEU here follows the classic multi-reference-script conventions:
case-insensitive by default, geometric mean of 1..4-gram precisions with no
smoothing, and a brevity penalty only when the hypothesis side is strictly
shorter than the references. On top of that sit a paired bootstrap test,
a BLEU-by-source-length report, and attention alignment dumps.

    python3 demos/05_evaluation_toolkit.py
"""

import numpy as np

from synmt import tensor as T
from synmt.data import build_vocab
from synmt.evaluate import (bleu, bleu_by_length, bootstrap_significance,
                            dump_alignments, read_alignments, write_alignments)
from synmt.seq2seq import TranslationModel

# ---------------------------------------------------------------------------
# Corpus BLEU. Inputs are aligned lists of sentences, either whitespace
# strings or pre-split token lists.

hyps = ["the cat sat on the mat",
        "a quick brown fox jumps over the lazy dog",
        "it rained all night"]
refs = ["the cat sat on the mat",
        "the quick brown fox jumped over the lazy dog",
        "it rained the whole night"]

report = bleu(hyps, refs)
print(f"BLEU {report.score:.2f}")
print("  n-gram precisions:", " ".join(f"{p:.3f}" for p in report.precisions))
print(f"  brevity penalty {report.bp:.3f} "
      f"(hyp {report.hyp_len} tokens, ref {report.ref_len})")

# A perfect system scores 100, but only if the sentences actually contain
# 4-grams; precision of an order with zero matches collapses the geometric
# mean to zero, and that is faithful to the un-smoothed convention.
print("identity, 6-word sentences:", bleu(refs, refs).score)
print("identity, 3-word sentences:", bleu(["so it goes"], ["so it goes"]).score)

# The brevity penalty kicks in only when the hypothesis is strictly shorter.
short = bleu(["a b c d"], ["a b c d e"])
print(f"4 of 5 reference words: BLEU {short.score:.2f} "
      f"= 100 * exp(1 - 5/4) = {100 * np.exp(1 - 5 / 4):.2f}")

# ---------------------------------------------------------------------------
# Is system A really better than system B, or did it get lucky on this test
# set? Paired bootstrap resampling answers with the fraction of resampled
# test sets on which the apparent loser catches up.

rng = T.make_rng(13)
words = list("abcdefghij")
ref_corpus = [" ".join(words[i]
                       for i in rng.integers(0, 10, size=rng.integers(4, 19)))
              for _ in range(120)]


def corrupt(sentence, k, tag):
    toks = sentence.split()
    for j in range(k):
        toks[int(rng.integers(0, len(toks)))] = tag
    return " ".join(toks)


system_a = [corrupt(s, 1, "errA") for s in ref_corpus]  # one bad word each
system_b = [corrupt(s, 3, "errB") for s in ref_corpus]  # three bad words

score_a = bleu(system_a, ref_corpus).score
score_b = bleu(system_b, ref_corpus).score
p = bootstrap_significance(system_a, system_b, ref_corpus, samples=1000, seed=1)
print(f"\nsystem A {score_a:.2f} vs system B {score_b:.2f}: "
      f"p = {p:.4f} over 1000 resamples")

# Two samples of the same system should not look significantly different.
system_a2 = [corrupt(s, 1, "errA") for s in ref_corpus]
p_same = bootstrap_significance(system_a, system_a2, ref_corpus,
                                samples=1000, seed=1)
print(f"system A vs a rerun of itself:  p = {p_same:.4f} (no real difference)")

# ---------------------------------------------------------------------------
# Where do the systems differ? Binning BLEU by source length is the usual
# first diagnostic; syntax tends to pay off on the long tail.

sources = ref_corpus  # pretend the references are also the source text
bins = bleu_by_length(system_a, ref_corpus, sources, bin_edges=[6, 12])
for b in bins:
    tail = "+" if b.hi is None else f"-{b.hi}"
    score = "  (empty)" if b.report is None else f"{b.report.score:8.2f}"
    print(f"  source length {b.lo:>2}{tail:<3} n={b.count:<4} BLEU {score}")

# ---------------------------------------------------------------------------
# Attention alignments. Greedy-decode each sentence and keep the attention
# row of every emitted token; the JSONL dump round-trips losslessly. The
# model here is untrained, the point is the record format.

vocab = build_vocab([s.split() for s in ref_corpus], 50)
model = TranslationModel(len(vocab), len(vocab), mode="none",
                         emb_dim=8, hidden_dim=16, dropout=0.0, seed=8)
records = dump_alignments(model, ref_corpus[:3], vocab, vocab, max_len=10)
write_alignments(records, "/tmp/demo_alignments.jsonl")
loaded = read_alignments("/tmp/demo_alignments.jsonl")

rec = loaded[0]
print(f"\nrecord 0: {len(rec.src)} source tokens, {len(rec.tgt)} emitted, "
      f"{len(rec.attn)} attention rows of width {len(rec.attn[0])}")
print("rows sum to one:",
      all(abs(sum(row) - 1.0) < 1e-9 for row in rec.attn))
