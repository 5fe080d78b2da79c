"""Keyword lexicon: the panel of dementia-relevant terms scanned for in notes.

Every keyword belongs to one of eight semantic groups and carries a flag
marking terms that name cognitive tests (so they can be ablated as a
predictor family). The default panel below is a curated starter set; real
deployments extend it via a lexicon file (one keyword per line,
tab-separated group and cognitive-test flag).

Keywords are matched case-insensitively at word boundaries, so entries are
stored lowercase. Multi-word entries match across single spaces; hyphens
are matched literally.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

GROUPS = (
    "cognition_speech_language",
    "cognition_memory",
    "cognition_other",
    "physiology_behavior",
    "mood",
    "testing",
    "anatomy",
    "other",
)


@dataclass(frozen=True)
class LexiconEntry:
    keyword: str
    group: str
    is_cognitive_test: bool = False


# fmt: off
_DEFAULT = [
    # keyword, group, cognitive-test flag
    ("memory",                      "cognition_memory", False),
    ("forgetfulness",               "cognition_memory", False),
    ("forgetful",                   "cognition_memory", False),
    ("amnesia",                     "cognition_memory", False),
    ("misplacing",                  "cognition_memory", False),
    ("recall",                      "cognition_memory", False),
    ("speaking",                    "cognition_speech_language", False),
    ("language",                    "cognition_speech_language", False),
    ("speech",                      "cognition_speech_language", False),
    ("aphasia",                     "cognition_speech_language", False),
    ("word finding",                "cognition_speech_language", False),
    ("naming",                      "cognition_speech_language", False),
    ("articulation",                "cognition_speech_language", False),
    ("concentration",               "cognition_other", False),
    ("judgement",                   "cognition_other", False),
    ("confusion",                   "cognition_other", False),
    ("disorientation",              "cognition_other", False),
    ("attention",                   "cognition_other", False),
    ("comprehension",               "cognition_other", False),
    ("executive function",          "cognition_other", False),
    ("insight",                     "cognition_other", False),
    ("wandering",                   "physiology_behavior", False),
    ("agitation",                   "physiology_behavior", False),
    ("restlessness",                "physiology_behavior", False),
    ("incontinence",                "physiology_behavior", False),
    ("gait",                        "physiology_behavior", False),
    ("tremor",                      "physiology_behavior", False),
    ("falls",                       "physiology_behavior", False),
    ("sleep disturbance",           "physiology_behavior", False),
    ("appetite",                    "physiology_behavior", False),
    ("mood",                        "mood", False),
    ("depression",                  "mood", False),
    ("anxiety",                     "mood", False),
    ("irritability",                "mood", False),
    ("apathy",                      "mood", False),
    ("tearful",                     "mood", False),
    ("withdrawn",                   "mood", False),
    ("affect",                      "mood", False),
    ("mmse",                        "testing", True),
    ("mini-cog",                    "testing", True),
    ("moca",                        "testing", True),
    ("clock drawing",               "testing", True),
    ("neuropsychological testing",  "testing", True),
    ("cognitive screen",            "testing", True),
    ("slums",                       "testing", True),
    ("hippocampus",                 "anatomy", False),
    ("hippocampal",                 "anatomy", False),
    ("atrophy",                     "anatomy", False),
    ("temporal lobe",               "anatomy", False),
    ("white matter",                "anatomy", False),
    ("ventricles",                  "anatomy", False),
    ("dementia",                    "other", False),
    ("cognitive decline",           "other", False),
    ("caregiver",                   "other", False),
    ("adl",                         "other", False),
    ("supervision",                 "other", False),
    ("safety concern",              "other", False),
]
# fmt: on


class Lexicon:
    """An ordered, validated set of keywords with group metadata."""

    def __init__(self, entries: list[LexiconEntry]):
        if not entries:
            raise ConfigError("lexicon is empty")
        seen: set[str] = set()
        for e in entries:
            if not e.keyword:
                raise ConfigError("empty keyword in lexicon")
            if e.keyword != e.keyword.lower():
                raise ConfigError(f"keyword not lowercase: {e.keyword!r}")
            if "  " in e.keyword or e.keyword != e.keyword.strip():
                raise ConfigError(f"keyword has stray whitespace: {e.keyword!r}")
            if e.keyword in seen:
                raise ConfigError(f"duplicate keyword: {e.keyword!r}")
            if e.group not in GROUPS:
                raise ConfigError(f"unknown group {e.group!r} for {e.keyword!r}")
            seen.add(e.keyword)
        self.entries = list(entries)
        self._index = {e.keyword: i for i, e in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, keyword: str) -> bool:
        return keyword in self._index

    @property
    def keywords(self) -> list[str]:
        return [e.keyword for e in self.entries]

    def index_of(self, keyword: str) -> int:
        return self._index[keyword]

    def group_of(self, keyword: str) -> str:
        return self.entries[self._index[keyword]].group

    def is_cognitive_test(self, keyword: str) -> bool:
        return self.entries[self._index[keyword]].is_cognitive_test

    def without_cognitive_tests(self) -> "Lexicon":
        kept = [e for e in self.entries if not e.is_cognitive_test]
        return Lexicon(kept)

    def subset(self, keywords) -> "Lexicon":
        wanted = set(keywords)
        missing = wanted - set(self._index)
        if missing:
            raise ConfigError(f"keywords not in lexicon: {sorted(missing)}")
        return Lexicon([e for e in self.entries if e.keyword in wanted])


def default_lexicon() -> Lexicon:
    return Lexicon([LexiconEntry(k, g, t) for k, g, t in _DEFAULT])


def load_lexicon(path: str) -> Lexicon:
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected keyword<TAB>group<TAB>flag")
            keyword, group, flag = parts
            if flag not in ("0", "1"):
                raise ConfigError(f"{path}:{lineno}: flag must be 0 or 1")
            entries.append(LexiconEntry(keyword.strip().lower(), group.strip(), flag == "1"))
    return Lexicon(entries)


def save_lexicon(lex: Lexicon, path: str) -> None:
    with open(path, "w") as f:
        for e in lex.entries:
            f.write(f"{e.keyword}\t{e.group}\t{1 if e.is_cognitive_test else 0}\n")
