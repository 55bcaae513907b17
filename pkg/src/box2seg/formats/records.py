"""Annotation records and category tables, including the three built-in rosters."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import GeometryError
from ..geometry import HBox, RBox


@dataclass(frozen=True)
class InstanceAnnotation:
    """One detected object: category plus at least one box form."""

    category_id: int
    hbox: HBox | None = None
    rbox: RBox | None = None
    difficulty: bool = False
    source_instance_id: str = ""

    def __post_init__(self):
        if self.hbox is None and self.rbox is None:
            raise GeometryError("annotation carries neither an hbox nor an rbox")


def normalize_category(name: str) -> str:
    """Case-fold and collapse hyphen/underscore/space runs for matching."""
    return re.sub(r"[\s_\-]+", " ", name.strip().lower())


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    abbreviation: str


@dataclass(frozen=True)
class CategoryTable:
    """Ordered category roster; ids run 1..K with 0 reserved for background."""

    dataset: str
    entries: tuple[Category, ...]

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if ids != list(range(1, len(self.entries) + 1)):
            raise ValueError(f"category ids must be contiguous 1..K, got {ids}")
        abbrs = [e.abbreviation for e in self.entries]
        if len(set(abbrs)) != len(abbrs):
            raise ValueError(f"duplicate abbreviations in {self.dataset}")
        lookup: dict[str, int] = {}
        for e in self.entries:
            for key in (normalize_category(e.name), normalize_category(e.abbreviation)):
                if key in lookup and lookup[key] != e.id:
                    raise ValueError(f"ambiguous category key {key!r} in {self.dataset}")
                lookup[key] = e.id
        object.__setattr__(self, "_lookup", lookup)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def id_for(self, name: str) -> int:
        """Resolve a category name or abbreviation; KeyError when unknown."""
        key = normalize_category(name)
        lookup: dict[str, int] = getattr(self, "_lookup")
        if key not in lookup:
            raise KeyError(f"unknown category {name!r} for table {self.dataset!r}")
        return lookup[key]

    def entry(self, category_id: int) -> Category:
        if not 1 <= category_id <= len(self.entries):
            raise KeyError(f"category id {category_id} outside 1..{len(self.entries)}")
        return self.entries[category_id - 1]

    def name_for(self, category_id: int) -> str:
        return self.entry(category_id).name

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "entries": [
                {"id": e.id, "name": e.name, "abbr": e.abbreviation} for e in self.entries
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CategoryTable":
        entries = tuple(
            Category(id=e["id"], name=e["name"], abbreviation=e["abbr"])
            for e in data["entries"]
        )
        return cls(dataset=data["dataset"], entries=entries)


def _table(tag: str, rows: list[tuple[str, str]]) -> CategoryTable:
    entries = tuple(
        Category(id=i, name=name, abbreviation=abbr)
        for i, (abbr, name) in enumerate(rows, start=1)
    )
    return CategoryTable(dataset=tag, entries=entries)


_SOTA_ROWS = [
    ("LV", "large vehicle"),
    ("SP", "swimming pool"),
    ("HC", "helicopter"),
    ("BR", "bridge"),
    ("PL", "plane"),
    ("SH", "ship"),
    ("SBF", "soccer ball field"),
    ("BC", "basketball court"),
    ("GTF", "ground track field"),
    ("SV", "small vehicle"),
    ("BD", "baseball diamond"),
    ("TC", "tennis court"),
    ("RA", "roundabout"),
    ("ST", "storage tanK"),
    ("HA", "harbor"),
    ("CC", "container crane"),
    ("AP", "airport"),
    ("HP", "helipad"),
]

_SIOR_ROWS = [
    ("APL", "airplane"),
    ("APO", "airport"),
    ("BF", "baseballfield"),
    ("BC", "basketballcourt"),
    ("BR", "bridge"),
    ("CH", "chimney"),
    ("ESA", "expressway service area"),
    ("ETS", "expressway toll station"),
    ("DA", "dam"),
    ("GF", "golffield"),
    ("GTF", "groundtrackfield"),
    ("HA", "harbor"),
    ("OP", "overpass"),
    ("SH", "ship"),
    ("STD", "stadium"),
    ("STT", "storagetank"),
    ("TC", "tenniscourt"),
    ("TS", "trainstation"),
    ("VH", "vehicle"),
    ("WD", "windmill"),
]

_FAST_ROWS = [
    ("A2", "A220"),
    ("A3", "A321"),
    ("A4", "A330"),
    ("A5", "A350"),
    ("ARJ", "ARJ21"),
    ("BF", "baseball field"),
    ("BC", "basketball court"),
    ("B3", "boeing737"),
    ("B4", "boeing747"),
    ("B7", "boeing777"),
    ("B8", "boeing787"),
    ("BR", "bridge"),
    ("BU", "bus"),
    ("C9", "C919"),
    ("CT", "cargo truck"),
    ("DCS", "dry cargo ship"),
    ("DT", "dump truck"),
    ("ES", "engineering ship"),
    ("EV", "excavator"),
    ("FB", "fishing boat"),
    ("FF", "football field"),
    ("IN", "intersection"),
    ("LCS", "liquid cargo ship"),
    ("MB", "motorboat"),
    ("OA", "other airplane"),
    ("OS", "other ship"),
    ("OV", "other vehicle"),
    ("PS", "passenger ship"),
    ("RA", "roundabout"),
    ("SC", "small car"),
    ("TC", "tennis court"),
    ("TRT", "tractor"),
    ("TRL", "trailer"),
    ("TUT", "truck tractor"),
    ("TB", "tugboat"),
    ("VA", "van"),
    ("WS", "warship"),
]

_BUILTIN_ROWS = {"sota": _SOTA_ROWS, "sior": _SIOR_ROWS, "fast": _FAST_ROWS}


def builtin_table(tag: str) -> CategoryTable:
    """The built-in SOTA/SIOR/FAST rosters (18/20/37 categories)."""
    key = tag.strip().lower()
    if key not in _BUILTIN_ROWS:
        raise KeyError(f"no built-in category table {tag!r} (have sota, sior, fast)")
    return _table(key.upper(), _BUILTIN_ROWS[key])
