"""Task data: the detect-"A" toy task, plain-text LM corpora, CoNLL-U readers.

Conventions shared by every task:

* Vocabulary ids 0-3 are reserved: pad=0, start=1, stop=2, unk=3; real
  tokens follow in first-appearance order, so ids are stable for identical
  corpus bytes.
* A training example is a pair (input ids, target ids).
* Batches are padded per batch to the longest member; boolean masks mark
  real positions, and masked-out positions hold the pad id.

The toy task asks a model to say, at the final step only, whether a single
"A" occurred anywhere in a sequence of "B"s: T positive samples (one per
"A" position) plus one all-"B" negative. Its target sequence is pad
everywhere except the last position, which carries the class label, so the
usual masked loss trains exactly the final-step classification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD, START, STOP, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<s>", "</s>", "<unk>")


class ParseError(ValueError):
    """Malformed input file; message carries the 1-based line number."""


class Vocabulary:
    """Frozen token <-> id bijection with four reserved ids."""

    def __init__(self, tokens=()):
        self._tokens = list(RESERVED_TOKENS)
        self._ids = {t: i for i, t in enumerate(self._tokens)}
        for tok in tokens:
            if tok not in self._ids:
                self._ids[tok] = len(self._tokens)
                self._tokens.append(tok)

    @classmethod
    def from_sequences(cls, sequences):
        def walk():
            for seq in sequences:
                yield from seq

        return cls(walk())

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids

    def id(self, token):
        return self._ids.get(token, UNK)

    def token(self, idx):
        return self._tokens[idx]

    def encode(self, tokens):
        return [self.id(t) for t in tokens]

    def decode(self, ids):
        return [self.token(i) for i in ids]

    def to_list(self):
        """Non-reserved tokens in id order (checkpoint serialization)."""
        return self._tokens[len(RESERVED_TOKENS):]


@dataclass
class SequenceBatch:
    """One padded batch: int id matrices plus lengths and validity masks."""

    inputs: np.ndarray
    targets: np.ndarray
    input_lengths: np.ndarray
    target_lengths: np.ndarray
    input_mask: np.ndarray
    target_mask: np.ndarray

    @property
    def size(self):
        return self.inputs.shape[0]


def make_batch(input_seqs, target_seqs):
    """Pad parallel id sequences into one SequenceBatch."""
    if not input_seqs:
        raise ValueError("empty batch")
    in_lens = np.array([len(s) for s in input_seqs], dtype=np.int64)
    tgt_lens = np.array([len(s) for s in target_seqs], dtype=np.int64)
    b, t_in, t_tgt = len(input_seqs), int(in_lens.max()), int(tgt_lens.max())
    inputs = np.full((b, t_in), PAD, dtype=np.int64)
    targets = np.full((b, t_tgt), PAD, dtype=np.int64)
    for row, (xs, ys) in enumerate(zip(input_seqs, target_seqs)):
        inputs[row, : len(xs)] = xs
        targets[row, : len(ys)] = ys
    input_mask = np.arange(t_in)[None, :] < in_lens[:, None]
    # pad is never a prediction target, so in-sequence pad ids (e.g. the
    # classify-at-the-end toy task) drop out of loss and accuracy alongside
    # batch padding
    target_mask = (np.arange(t_tgt)[None, :] < tgt_lens[:, None]) & (targets != PAD)
    return SequenceBatch(inputs, targets, in_lens, tgt_lens, input_mask, target_mask)


def make_batches(pairs, batch_size, rng=None):
    """Chunk (input, target) pairs into padded batches, optionally shuffled."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(pairs))
    if rng is not None:
        order = rng.permutation(len(pairs))
    batches = []
    for lo in range(0, len(pairs), batch_size):
        chunk = [pairs[i] for i in order[lo : lo + batch_size]]
        batches.append(make_batch([p[0] for p in chunk], [p[1] for p in chunk]))
    return batches


# ---------------------------------------------------------------------------
# detect-"A" toy task


@dataclass
class DetectASample:
    """Sequence over {A, B}; present samples contain exactly one A."""

    sequence: list[str]
    label: str  # "present" | "absent"


def gen_detect_a(T):
    """T positive samples (A at each position) plus the all-B negative."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    samples = []
    for pos in range(T):
        seq = ["B"] * T
        seq[pos] = "A"
        samples.append(DetectASample(sequence=seq, label="present"))
    samples.append(DetectASample(sequence=["B"] * T, label="absent"))
    return samples


def detect_a_task(T):
    """Encoded toy dataset: pairs with a final-step-only classification target.

    Returns (pairs, source vocabulary over {A, B}, target vocabulary over
    {present, absent}); targets are pad everywhere except position T.
    """
    src_vocab = Vocabulary(["A", "B"])
    tgt_vocab = Vocabulary(["present", "absent"])
    pairs = []
    for sample in gen_detect_a(T):
        target = [PAD] * (T - 1) + [tgt_vocab.id(sample.label)]
        pairs.append((src_vocab.encode(sample.sequence), target))
    return pairs, src_vocab, tgt_vocab


def detect_a_sample_ids(T, a_position, src_vocab):
    """Input ids for one probe sequence with "A" at a 1-based position."""
    if not 1 <= a_position <= T:
        raise ValueError(f"A-position {a_position} outside 1..{T}")
    seq = ["B"] * T
    seq[a_position - 1] = "A"
    return src_vocab.encode(seq)


# ---------------------------------------------------------------------------
# plain-text language modeling


def read_text_lm(path):
    """Next-token prediction pairs from a one-sentence-per-line text file.

    For tokens (a, b, c) the pair is input (a, b, c), target (b, c, </s>).
    Empty lines are skipped; an empty corpus is an error.
    """
    sequences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if not tokens:
                continue
            sequences.append((tokens, tokens[1:] + [RESERVED_TOKENS[STOP]]))
    if not sequences:
        raise ValueError(f"empty corpus: {path}")
    return sequences


def lm_task(path, vocab=None):
    """Encoded LM dataset; builds the vocabulary from this file if not given."""
    sequences = read_text_lm(path)
    if vocab is None:
        vocab = Vocabulary.from_sequences(tokens for tokens, _ in sequences)
    pairs = [
        (vocab.encode(tokens), vocab.encode(targets))
        for tokens, targets in sequences
    ]
    return pairs, vocab


# ---------------------------------------------------------------------------
# CoNLL-U


def _conllu_rows(path):
    """Token rows grouped by sentence, with multiword/empty ids dropped."""
    sentences = []
    current = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                if current:
                    sentences.append(current)
                    current = []
                continue
            if line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 10:
                raise ParseError(
                    f"{path}:{lineno}: expected 10 tab-separated fields, "
                    f"got {len(fields)}"
                )
            token_id = fields[0]
            if "-" in token_id or "." in token_id:
                continue  # multiword range or empty node
            current.append(fields)
    if current:
        sentences.append(current)
    return sentences


def read_conllu_pos(path):
    """Parallel (lemma sequence, universal POS tag sequence) per sentence."""
    lemmas, tags = [], []
    for rows in _conllu_rows(path):
        lemmas.append([f[2] for f in rows])
        tags.append([f[3] for f in rows])
    return lemmas, tags


def read_conllu_dp(path):
    """(lemma sequences, interleaved relation/head-position target sequences).

    Each token contributes two target symbols — its dependency relation and
    its head position as a discrete token — so targets are twice the input
    length.
    """
    lemmas, targets = [], []
    for rows in _conllu_rows(path):
        lemmas.append([f[2] for f in rows])
        interleaved = []
        for f in rows:
            interleaved.append(f[7])
            interleaved.append(f[6])
        targets.append(interleaved)
    return lemmas, targets


def pos_task(path, src_vocab=None, tgt_vocab=None):
    """Encoded POS tagging dataset (one tag per input token)."""
    lemmas, tags = read_conllu_pos(path)
    if src_vocab is None:
        src_vocab = Vocabulary.from_sequences(lemmas)
    if tgt_vocab is None:
        tgt_vocab = Vocabulary.from_sequences(tags)
    pairs = [
        (src_vocab.encode(xs), tgt_vocab.encode(ys))
        for xs, ys in zip(lemmas, tags)
    ]
    return pairs, src_vocab, tgt_vocab


def dp_task(path, src_vocab=None, tgt_vocab=None):
    """Encoded dependency-parsing dataset (two target symbols per token)."""
    lemmas, interleaved = read_conllu_dp(path)
    if src_vocab is None:
        src_vocab = Vocabulary.from_sequences(lemmas)
    if tgt_vocab is None:
        tgt_vocab = Vocabulary.from_sequences(interleaved)
    pairs = [
        (src_vocab.encode(xs), tgt_vocab.encode(ys))
        for xs, ys in zip(lemmas, interleaved)
    ]
    return pairs, src_vocab, tgt_vocab
