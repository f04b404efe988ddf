"""Class taxonomies: the class universe split into static and dynamic sets.

A taxonomy declares the ordered class list (contiguous ids starting at 0),
marks each class as static or dynamic, carries a display palette, and a
many-to-one remap table translating raw source-dataset ids into taxonomy ids.
Two taxonomies ship built in: "carla9" and "cityscapes12".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Tuple

import numpy as np

STATIC = "static"
DYNAMIC = "dynamic"
UNLABELED = "Unlabeled"


class TaxonomyError(ValueError):
    """Raised when a taxonomy definition violates its invariants."""


@dataclass(frozen=True)
class ClassDef:
    id: int
    name: str
    kind: str  # STATIC or DYNAMIC
    color: Tuple[int, int, int]


@dataclass(frozen=True)
class ClassTaxonomy:
    name: str
    classes: Tuple[ClassDef, ...]
    remap: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = [c.id for c in self.classes]
        if ids != list(range(len(ids))):
            raise TaxonomyError(f"class ids must be 0..{len(ids) - 1} contiguous, got {ids}")
        for c in self.classes:
            if c.kind not in (STATIC, DYNAMIC):
                raise TaxonomyError(f"class {c.name!r} has unknown kind {c.kind!r}")
        if not self.static_ids:
            raise TaxonomyError("empty static set")
        if not self.dynamic_ids:
            raise TaxonomyError("empty dynamic set")
        names = {c.name for c in self.classes}
        if UNLABELED not in names:
            raise TaxonomyError("missing Unlabeled class")
        if self.class_by_name(UNLABELED).kind != STATIC:
            raise TaxonomyError("Unlabeled class must be static")
        for raw, tid in self.remap.items():
            if not 0 <= tid < len(self.classes):
                raise TaxonomyError(f"remap target {tid} for raw id {raw} out of range")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def static_ids(self) -> Tuple[int, ...]:
        return tuple(c.id for c in self.classes if c.kind == STATIC)

    @property
    def dynamic_ids(self) -> Tuple[int, ...]:
        return tuple(c.id for c in self.classes if c.kind == DYNAMIC)

    @property
    def unlabeled_id(self) -> int:
        return self.class_by_name(UNLABELED).id

    def class_by_name(self, name: str) -> ClassDef:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def is_static_lut(self) -> np.ndarray:
        """Boolean lookup table indexed by class id."""
        lut = np.zeros(self.num_classes, dtype=bool)
        lut[list(self.static_ids)] = True
        return lut

    def remap_lut(self, max_raw: int = 256) -> np.ndarray:
        """Raw-id -> taxonomy-id table; unmapped raw ids fall back to Unlabeled."""
        lut = np.full(max_raw, self.unlabeled_id, dtype=np.uint8)
        for raw, tid in self.remap.items():
            if 0 <= raw < max_raw:
                lut[raw] = tid
        return lut

    def palette(self) -> np.ndarray:
        """(num_classes, 3) uint8 RGB palette."""
        return np.array([c.color for c in self.classes], dtype=np.uint8)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "classes": [
                {"id": c.id, "name": c.name, "kind": c.kind, "color": list(c.color)}
                for c in self.classes
            ],
            "remap": {str(k): v for k, v in self.remap.items()},
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ClassTaxonomy":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise TaxonomyError(f"taxonomy parse failure: {e}") from e
        try:
            classes = tuple(
                ClassDef(int(c["id"]), str(c["name"]), str(c["kind"]), tuple(c["color"]))
                for c in doc["classes"]
            )
            remap = {int(k): int(v) for k, v in doc.get("remap", {}).items()}
            name = str(doc["name"])
        except (KeyError, TypeError, ValueError) as e:
            raise TaxonomyError(f"malformed taxonomy document: {e}") from e
        ids = [c.id for c in classes]
        if len(set(ids)) != len(ids):
            raise TaxonomyError("duplicate class ids")
        return ClassTaxonomy(name=name, classes=classes, remap=remap)


def _carla9() -> ClassTaxonomy:
    classes = (
        ClassDef(0, UNLABELED, STATIC, (0, 0, 0)),
        ClassDef(1, "Road", STATIC, (128, 64, 128)),
        ClassDef(2, "Sidewalk", STATIC, (244, 35, 232)),
        ClassDef(3, "Building", STATIC, (70, 70, 70)),
        ClassDef(4, "Fence", STATIC, (190, 153, 153)),
        ClassDef(5, "Pole", STATIC, (153, 153, 153)),
        ClassDef(6, "Vegetation", STATIC, (107, 142, 35)),
        ClassDef(7, "Person", DYNAMIC, (220, 20, 60)),
        ClassDef(8, "Car", DYNAMIC, (0, 0, 142)),
    )
    # CARLA 0.8.x raw semantic ids: 0 None, 1 Buildings, 2 Fences, 3 Other,
    # 4 Pedestrians, 5 Poles, 6 RoadLines, 7 Roads, 8 Sidewalks, 9 Vegetation,
    # 10 Vehicles, 11 Walls, 12 TrafficSigns.
    remap = {
        0: 0, 1: 3, 2: 4, 3: 0, 4: 7, 5: 5, 6: 1,
        7: 1, 8: 2, 9: 6, 10: 8, 11: 4, 12: 5,
    }
    return ClassTaxonomy("carla9", classes, remap)


def _cityscapes12() -> ClassTaxonomy:
    classes = (
        ClassDef(0, UNLABELED, STATIC, (0, 0, 0)),
        ClassDef(1, "Road", STATIC, (128, 64, 128)),
        ClassDef(2, "Sidewalk and Parking", STATIC, (244, 35, 232)),
        ClassDef(3, "Building", STATIC, (70, 70, 70)),
        ClassDef(4, "Wall and Fence", STATIC, (190, 153, 153)),
        ClassDef(5, "Traffic Sign", STATIC, (220, 220, 0)),
        ClassDef(6, "Vegetation and Terrain", STATIC, (107, 142, 35)),
        ClassDef(7, "Sky", STATIC, (70, 130, 180)),
        ClassDef(8, "Person", DYNAMIC, (220, 20, 60)),
        ClassDef(9, "Car", DYNAMIC, (0, 0, 142)),
        ClassDef(10, "Truck and Bus", DYNAMIC, (0, 0, 70)),
        ClassDef(11, "Two Wheeled Vehicle", DYNAMIC, (119, 11, 32)),
    )
    # Cityscapes raw labelIds (0..33) grouped into the 12 categories.
    remap = {
        0: 0, 1: 0, 2: 0, 3: 0, 4: 0, 5: 0, 6: 0,
        7: 1, 9: 2, 8: 2, 10: 0,
        11: 3, 15: 3, 16: 3,
        12: 4, 13: 4, 14: 4,
        17: 5, 18: 5, 19: 5, 20: 5,
        21: 6, 22: 6,
        23: 7,
        24: 8, 25: 8,
        26: 9,
        27: 10, 28: 10, 29: 10, 30: 10, 31: 10,
        32: 11, 33: 11,
    }
    return ClassTaxonomy("cityscapes12", classes, remap)


_BUILTINS = {"carla9": _carla9, "cityscapes12": _cityscapes12}


def builtin_names() -> Sequence[str]:
    return sorted(_BUILTINS)


def get_taxonomy(name: str) -> ClassTaxonomy:
    """Resolve a built-in taxonomy by name."""
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise TaxonomyError(f"unknown built-in taxonomy {name!r}; choices: {builtin_names()}")


def load_taxonomy(path) -> ClassTaxonomy:
    """Load and validate a taxonomy from a JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        return ClassTaxonomy.from_json(f.read())
