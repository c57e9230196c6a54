"""Tabular data model: delimited-text ingestion and row subsets."""

import io
import math
from dataclasses import dataclass, field

from .errors import MalformedData

NUMERIC = "numeric"
TEXT = "text"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # NUMERIC or TEXT


class Table:
    """An immutable named table of text cells with per-column kind.

    Numeric columns keep a parallel float view; unparseable or empty cells
    in a numeric column are flagged missing (None in the float view).
    """

    def __init__(self, name: str, columns: list[Column], rows: list[tuple[str, ...]]):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise MalformedData(f"duplicate column names in table '{name}'")
        for i, row in enumerate(rows):
            if len(row) != len(columns):
                raise MalformedData(f"row {i} has {len(row)} cells, expected {len(columns)}")
        self.name = name
        self.columns = list(columns)
        self.rows = [tuple(r) for r in rows]
        self._col_index = {c.name: i for i, c in enumerate(columns)}
        self._numeric: dict[str, list[float | None]] = {}
        for col in columns:
            if col.kind == NUMERIC:
                idx = self._col_index[col.name]
                self._numeric[col.name] = [_parse_number(r[idx]) for r in self.rows]

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def has_column(self, name: str) -> bool:
        return name in self._col_index

    def column_kind(self, name: str) -> str:
        return self.columns[self._col_index[name]].kind

    def cell(self, row: int, column: str) -> str:
        return self.rows[row][self._col_index[column]]

    def numeric(self, row: int, column: str) -> float | None:
        """Float view of a numeric column; None for missing cells."""
        return self._numeric[column][row]

    def numeric_column_names(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == NUMERIC]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "columns": [{"name": c.name, "kind": c.kind} for c in self.columns],
            "rows": [list(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Table":
        cols = [Column(c["name"], c["kind"]) for c in doc["columns"]]
        return cls(doc["name"], cols, [tuple(r) for r in doc["rows"]])


def _parse_number(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_table(source: str | io.TextIOBase, name: str, delimiter: str = ",") -> Table:
    """Parse delimited text with a header row into a Table.

    A column is numeric iff every non-empty cell parses as a finite number;
    one non-numeric cell forces the whole column to text.
    """
    if isinstance(source, str):
        text = source
    else:
        text = source.read()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise MalformedData("empty input: no header row")
    header = _split_row(lines[0], delimiter)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = _split_row(line, delimiter)
        if len(cells) != len(header):
            raise MalformedData(f"line {lineno}: {len(cells)} cells, expected {len(header)}")
        rows.append(tuple(cells))
    columns = []
    for i, col_name in enumerate(header):
        non_empty = [r[i] for r in rows if r[i].strip()]
        numeric = bool(non_empty) and all(_parse_number(c) is not None for c in non_empty)
        columns.append(Column(col_name.strip(), NUMERIC if numeric else TEXT))
    return Table(name, columns, rows)


def _split_row(line: str, delimiter: str) -> list[str]:
    """Split one delimited line, honoring double-quoted cells."""
    cells = []
    buf = []
    in_quotes = False
    i = 0
    while i < len(line):
        ch = line[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < len(line) and line[i + 1] == '"':
                    buf.append('"')
                    i += 1
                else:
                    in_quotes = False
            else:
                buf.append(ch)
        elif ch == '"':
            in_quotes = True
        elif ch == delimiter:
            cells.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
        i += 1
    cells.append("".join(buf).strip())
    return cells


@dataclass
class Subset:
    """A row subset flowing along diagram edges, with optional per-row visuals."""

    table: str | None  # table name; None for the empty payload of unwired inputs
    row_indices: tuple[int, ...] = ()
    visuals: dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        self.row_indices = tuple(self.row_indices)
        self.visuals = {i: dict(v) for i, v in self.visuals.items() if i in set(self.row_indices)}

    @property
    def size(self) -> int:
        return len(self.row_indices)

    def restrict(self, rows: set[int]) -> "Subset":
        kept = tuple(i for i in self.row_indices if i in rows)
        return Subset(self.table, kept, {i: v for i, v in self.visuals.items() if i in rows})

    def with_visuals(self, assign: dict[int, dict]) -> "Subset":
        merged = {i: dict(v) for i, v in self.visuals.items()}
        for i, v in assign.items():
            merged.setdefault(i, {}).update(v)
        return Subset(self.table, self.row_indices, merged)


@dataclass(frozen=True)
class Constants:
    """Distinct cell values extracted from one column, for equality filters."""

    column: str
    values: tuple[str, ...]
