"""Corpus record types and their line-delimited JSON file formats."""

import json
from dataclasses import dataclass, field

from ..errors import DataError


@dataclass
class Dialogue:
    utterances: list  # of (speaker, text) pairs
    summary: str | None = None

    def __post_init__(self):
        if not self.utterances:
            raise DataError("dialogue with no utterances")
        for sp, _ in self.utterances:
            if not sp:
                raise DataError("dialogue with an empty speaker name")


@dataclass
class TextPiece:
    sentences: list = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= len(self.sentences) <= 2:
            raise DataError("text piece must hold 1 or 2 sentences")


@dataclass
class ArticleSummary:
    article_sentences: list
    summary: str

    def __post_init__(self):
        if not self.article_sentences:
            raise DataError("article with no sentences")
        if not self.summary:
            raise DataError("article with an empty summary")


def _iter_json_lines(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})")


def _dialogue_from_obj(obj, path, lineno, need_summary):
    try:
        utts = [(u["speaker"], u["text"]) for u in obj["utterances"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}:{lineno}: bad dialogue record ({exc})")
    summary = obj.get("summary")
    if need_summary and not summary:
        raise DataError(f"{path}:{lineno}: record is missing a summary")
    try:
        return Dialogue(utts, summary)
    except DataError as exc:
        raise DataError(f"{path}:{lineno}: {exc}")


def read_dialogues(path):
    return [_dialogue_from_obj(o, path, n, False) for n, o in _iter_json_lines(path)]


def read_finetune(path):
    return [_dialogue_from_obj(o, path, n, True) for n, o in _iter_json_lines(path)]


def read_shorttexts(path):
    out = []
    for lineno, obj in _iter_json_lines(path):
        try:
            out.append(TextPiece(list(obj["sentences"])))
        except (KeyError, TypeError, DataError) as exc:
            raise DataError(f"{path}:{lineno}: bad short-text record ({exc})")
    return out


def read_articles(path):
    out = []
    for lineno, obj in _iter_json_lines(path):
        try:
            out.append(ArticleSummary(list(obj["article_sentences"]), obj["summary"]))
        except (KeyError, TypeError, DataError) as exc:
            raise DataError(f"{path}:{lineno}: bad article record ({exc})")
    return out


def _dump(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_dialogues(path, dialogues):
    with open(path, "w", encoding="utf-8") as f:
        for d in dialogues:
            obj = {"utterances": [{"speaker": s, "text": t} for s, t in d.utterances]}
            if d.summary is not None:
                obj["summary"] = d.summary
            f.write(_dump(obj) + "\n")


def write_shorttexts(path, pieces):
    with open(path, "w", encoding="utf-8") as f:
        for p in pieces:
            f.write(_dump({"sentences": p.sentences}) + "\n")


def write_articles(path, articles):
    with open(path, "w", encoding="utf-8") as f:
        for a in articles:
            f.write(_dump({"article_sentences": a.article_sentences,
                           "summary": a.summary}) + "\n")
