"""Synthetic corpora with learnable structure.

Every record is template-generated around a salient fact:

  * dialogues embed one (verb, object) plan proposed by the two speakers,
    surrounded by informal chatter and a distractor object;
  * articles mark one salient sentence ("announced a plan to ...") among
    formal filler and a distractor project sentence;
  * short texts are sentences drawn from the summary language itself;
  * fine-tune pairs are dialogues with their template summary attached.

Reference summaries are deterministic functions of the salient content, so
an oracle that knows the facts reproduces them exactly. Dialogue and
article styles use disjoint filler vocabularies, which gives the domain
probe its signal.
"""

from dataclasses import dataclass

import numpy as np

from .records import ArticleSummary, Dialogue, TextPiece

NAMES = [
    "anna", "ben", "carla", "dan", "emma", "felix", "gina", "hugo",
    "iris", "jonas", "kira", "leo", "mara", "nina", "otto", "paula",
    "rosa", "sam", "tina", "ugo", "vera", "wanda", "yuri", "zoe",
]
OBJECTS = [
    "museum", "bridge", "market", "garden", "library", "harbor",
    "castle", "theater", "bakery", "stadium", "gallery", "station",
    "tower", "school", "orchard", "mill", "plaza", "arena",
]
VERBS = [
    "visit", "paint", "clean", "open", "close", "repair",
    "tour", "decorate", "inspect", "photograph",
]
ORGS = ["council", "committee", "mayor", "board", "department", "district"]

_DIAL_OPENERS = [
    "hey {b}", "yo {b} whats up", "hi {b} u there ?", "hey hey {b}",
]
_DIAL_REPLIES = [
    "hey lol", "yeah whats up", "hi hi", "yo", "hey u !",
]
_DIAL_SALIENT = [
    "wanna {v} the {o} ?", "lets {v} the {o}", "wanna {v} the {o} lol",
]
_DIAL_CONFIRM = [
    "ok cool", "yeah sure", "sounds cool lol", "sure thing", "ok ok nice",
]
_DIAL_DISTRACTOR = [
    "btw the {o2} was nice lol", "i saw the {o2} haha", "the {o2} is so cool",
]
_DIAL_CLOSER = [
    "ok gotta go ttyl", "brb lol", "cool cool ttyl",
]

_NEWS_FILLER = [
    "the {org2} held a review session on {day} .",
    "reporters attended the public meeting on {day} .",
    "the {org2} published an agenda update on {day} .",
    "residents followed the press briefing on {day} .",
]
_NEWS_DISTRACTOR = [
    "the {org3} discussed the {o2} project during the session .",
    "a budget report mentioned the {o2} works .",
]
_NEWS_SALIENT = [
    "the {subj} announced a plan to {v} the {o} .",
    "the {subj} confirmed it will {v} the {o} .",
]
_DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday"]


def dialogue_summary(name_a, name_b, verb, obj):
    """Reference summary template for a dialogue's salient fact."""
    return f"{name_a} and {name_b} will {verb} the {obj} ."


def article_summary(subj, verb, obj):
    return f"the {subj} will {verb} the {obj} ."


@dataclass
class SynthSpec:
    n_dialogues: int = 2000
    n_shorttexts: int = 2000
    n_articles: int = 2000
    n_finetune: int = 400
    seed: int = 0

    def __post_init__(self):
        for n in (self.n_dialogues, self.n_shorttexts, self.n_articles,
                  self.n_finetune):
            if n < 1:
                raise ValueError("synthetic corpus sizes must be >= 1")


def _pick(rng, pool):
    return pool[int(rng.integers(0, len(pool)))]


def _make_dialogue(rng, with_summary):
    a, b = rng.choice(len(NAMES), size=2, replace=False)
    name_a, name_b = NAMES[a], NAMES[b]
    verb = _pick(rng, VERBS)
    obj = _pick(rng, OBJECTS)
    o2 = _pick(rng, [o for o in OBJECTS if o != obj])
    utts = [(name_a, _pick(rng, _DIAL_OPENERS).format(b=name_b))]
    if rng.random() < 0.6:
        utts.append((name_b, _pick(rng, _DIAL_REPLIES)))
    salient_speaker, other = (name_a, name_b) if rng.random() < 0.5 else (name_b, name_a)
    utts.append((salient_speaker, _pick(rng, _DIAL_SALIENT).format(v=verb, o=obj)))
    utts.append((other, _pick(rng, _DIAL_CONFIRM)))
    if rng.random() < 0.7:
        sp = name_a if rng.random() < 0.5 else name_b
        utts.append((sp, _pick(rng, _DIAL_DISTRACTOR).format(o2=o2)))
    if rng.random() < 0.5:
        sp = name_a if rng.random() < 0.5 else name_b
        utts.append((sp, _pick(rng, _DIAL_CLOSER)))
    summary = dialogue_summary(name_a, name_b, verb, obj) if with_summary else None
    return Dialogue(utts, summary)


def _make_article(rng):
    subj = _pick(rng, ORGS)
    verb = _pick(rng, VERBS)
    obj = _pick(rng, OBJECTS)
    o2 = _pick(rng, [o for o in OBJECTS if o != obj])
    org2 = _pick(rng, ORGS)
    org3 = _pick(rng, [o for o in ORGS if o != subj])
    day = _pick(rng, _DAYS)
    sentences = [_pick(rng, _NEWS_FILLER).format(org2=org2, day=day)]
    if rng.random() < 0.7:
        sentences.append(_pick(rng, _NEWS_DISTRACTOR).format(org3=org3, o2=o2))
    sentences.append(_pick(rng, _NEWS_SALIENT).format(subj=subj, v=verb, o=obj))
    if rng.random() < 0.5:
        sentences.append(_pick(rng, _NEWS_FILLER).format(org2=_pick(rng, ORGS), day=_pick(rng, _DAYS)))
    order = rng.permutation(len(sentences)) if rng.random() < 0.5 else np.arange(len(sentences))
    sentences = [sentences[i] for i in order]
    return ArticleSummary(sentences, article_summary(subj, verb, obj))


def _make_shorttext(rng):
    sents = []
    for _ in range(1 + int(rng.integers(0, 2))):
        if rng.random() < 0.5:
            a, b = rng.choice(len(NAMES), size=2, replace=False)
            sents.append(dialogue_summary(NAMES[a], NAMES[b], _pick(rng, VERBS),
                                          _pick(rng, OBJECTS)))
        else:
            sents.append(article_summary(_pick(rng, ORGS), _pick(rng, VERBS),
                                         _pick(rng, OBJECTS)))
    return TextPiece(sents)


def generate_synthetic(spec):
    """Generate (dialogues, shorttexts, articles, finetune_pairs)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    dialogues = [_make_dialogue(rng, False) for _ in range(spec.n_dialogues)]
    shorttexts = [_make_shorttext(rng) for _ in range(spec.n_shorttexts)]
    articles = [_make_article(rng) for _ in range(spec.n_articles)]
    finetune = [_make_dialogue(rng, True) for _ in range(spec.n_finetune)]
    return dialogues, shorttexts, articles, finetune
