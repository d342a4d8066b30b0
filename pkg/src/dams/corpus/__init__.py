"""Vocabulary, corpus schemas, noise, synthetic data, and batch streams."""

from .noise import MASK_RATE, UNIT_KEEP_PROB, NoisedSequence, add_noise, truncate_pieces
from .records import (ArticleSummary, Dialogue, TextPiece, read_articles,
                      read_dialogues, read_finetune, read_shorttexts,
                      write_articles, write_dialogues, write_shorttexts)
from .stream import (MixedStream, RecBatch, Seq2SeqBatch, SeqLimits,
                     SourceCycler, StepTriple, TokenizedDialogue,
                     TokenizedSentences, collate_gen, collate_rec,
                     collate_seq2seq, decoder_pair, mixed_stream, pad_stack)
from .synthetic import (NAMES, OBJECTS, ORGS, VERBS, SynthSpec,
                        article_summary, dialogue_summary, generate_synthetic)
from .vocab import (BOS, CLS, EOS, MASK, PAD, SPECIALS, UNK, Vocab,
                    build_vocab, detokenize, format_utterance, tokenize)
