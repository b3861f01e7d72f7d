"""Fixed region registry: 17 communities, 2 autonomous cities, and the nation."""

import csv
import functools
from dataclasses import dataclass
from importlib import resources

from .errors import UnknownRegion

NATIONAL = "ES"


@dataclass(frozen=True)
class Region:
    code: str
    name: str
    kind: str  # community | city | national


@functools.lru_cache(maxsize=None)
def registry():
    text = resources.files("epiforge").joinpath("data/regions.csv").read_text(encoding="utf-8")
    rows = csv.DictReader(text.splitlines())
    return {r["code"]: Region(r["code"], r["name"], r["kind"]) for r in rows}


def get_region(code):
    try:
        return registry()[code]
    except KeyError:
        raise UnknownRegion(f"unknown region code {code!r}") from None


def is_known(code):
    return code in registry()


def communities():
    return [r.code for r in registry().values() if r.kind == "community"]


def is_city(code):
    return get_region(code).kind == "city"
