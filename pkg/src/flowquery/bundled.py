"""Access to resources shipped with the package (grammar, lexicons, data)."""

from importlib import resources

from .errors import DatasetNotFound
from .tagging import INDICATORS, VERB, Lexicon

POS_CLASSES = (
    "Verb",
    "Noun",
    "Adjective",
    "Preposition",
    "Determiner",
    "Conjunction",
    "Number",
    "Pronoun",
    "Other",
)


def _root():
    return resources.files("flowquery").joinpath("resources")


def read_resource(*parts: str) -> str:
    return _root().joinpath(*parts).read_text(encoding="utf-8")


def dataset_names() -> list[str]:
    data_dir = _root().joinpath("data")
    return sorted(
        entry.name[: -len(".csv")]
        for entry in data_dir.iterdir()
        if entry.name.endswith(".csv")
    )


def read_dataset(name: str) -> str:
    """Text of a bundled dataset, by bare name (no extension)."""
    if name not in dataset_names():
        raise DatasetNotFound(f"no bundled dataset named '{name}'")
    return read_resource("data", f"{name}.csv")


def load_function_words(path: str | None = None) -> Lexicon:
    text = open(path, encoding="utf-8").read() if path else read_resource("function_words.txt")
    return Lexicon.parse(text, INDICATORS)


def load_pos_lexicon(path: str | None = None) -> Lexicon:
    """POS lexicon merged with the function-indicator words tagged as verbs."""
    text = open(path, encoding="utf-8").read() if path else read_resource("pos_lexicon.txt")
    lexicon = Lexicon.parse(text, POS_CLASSES)
    for word in load_function_words().entries:
        lexicon.entries.setdefault(word, VERB)
    return lexicon
