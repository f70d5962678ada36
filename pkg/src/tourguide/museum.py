"""Museum world model: occupancy grid, areas, artworks, loading and validation.

The museum is described by a JSON document (see ``load_museum``). Once loaded,
a MuseumMap is immutable and safe to share across concurrent sessions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ParseError, UnknownArtwork, ValidationError

_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class Pose:
    """Planar pose; heading normalized into (-pi, pi]."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))


def normalize_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class OccupancyGrid:
    width: int
    height: int
    resolution: float  # meters per cell
    cells: tuple  # row-major booleans, True = occupied

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def is_occupied(self, row: int, col: int) -> bool:
        return bool(self.cells[row * self.width + col])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(y / self.resolution)), int(math.floor(x / self.resolution))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (col + 0.5) * self.resolution, (row + 0.5) * self.resolution


@dataclass(frozen=True)
class Area:
    id: str
    name: str
    waypoint: Pose
    boundary: tuple  # ((x, y), ...) convex polygon, closed containment
    intro_text: str
    mandatory_rank: Optional[int] = None


@dataclass(frozen=True)
class Artwork:
    id: str
    title: str
    author: str
    position: tuple  # (x, y)
    facts: tuple
    trigger_radius: float
    passing_utterance: str


@dataclass(frozen=True)
class MuseumMap:
    grid: OccupancyGrid
    areas: tuple  # ordered
    artworks: tuple
    entrance_area_id: str
    _areas_by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_areas_by_id", {a.id: a for a in self.areas})

    def area(self, area_id: str) -> Optional[Area]:
        return self._areas_by_id.get(area_id)

    def area_by_name(self, name: str) -> Optional[Area]:
        low = name.lower()
        for a in self.areas:
            if a.name.lower() == low:
                return a
        return None

    @property
    def entrance(self) -> Area:
        return self._areas_by_id[self.entrance_area_id]

    def exhibit_areas(self) -> list[Area]:
        """All areas except the entrance, in document order."""
        return [a for a in self.areas if a.id != self.entrance_area_id]

    def mandatory_area(self, rank: int) -> Optional[Area]:
        for a in self.areas:
            if a.mandatory_rank == rank:
                return a
        return None

    def artworks_in(self, area_id: str) -> list[Artwork]:
        out = []
        for art in self.artworks:
            owner = _owner_of(self, art)
            if owner is not None and owner.id == area_id:
                out.append(art)
        return out


def _point_on_segment(p, a, b) -> bool:
    (px, py), (ax, ay), (bx, by) = p, a, b
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > _EDGE_EPS:
        return False
    dot = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
    sq = (bx - ax) ** 2 + (by - ay) ** 2
    return -_EDGE_EPS <= dot <= sq + _EDGE_EPS


def point_in_polygon(point, polygon) -> bool:
    """Closed containment test: boundary points count as inside."""
    n = len(polygon)
    for i in range(n):
        if _point_on_segment(point, polygon[i], polygon[(i + 1) % n]):
            return True
    x, y = point
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = polygon[i]
        xj, yj = polygon[j]
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < _EDGE_EPS:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4


def _self_intersecting(polygon) -> bool:
    n = len(polygon)
    for i in range(n):
        a1, a2 = polygon[i], polygon[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, polygon[j], polygon[(j + 1) % n]):
                return True
    return False


def _owner_of(museum: MuseumMap, artwork: Artwork) -> Optional[Area]:
    # Ties on shared edges/vertices resolve by document order.
    for area in museum.areas:
        if point_in_polygon(artwork.position, area.boundary):
            return area
    return None


def owner_area(museum: MuseumMap, artwork_id: str) -> Area:
    """The unique area whose boundary contains the artwork position."""
    for art in museum.artworks:
        if art.id == artwork_id:
            owner = _owner_of(museum, art)
            if owner is None:
                raise UnknownArtwork(f"artwork {artwork_id} lies outside every area")
            return owner
    raise UnknownArtwork(artwork_id)


def validate_museum(museum: MuseumMap) -> list[str]:
    """Every violated invariant, each naming the offending entity. Total function."""
    v: list[str] = []
    grid = museum.grid

    if grid.resolution <= 0:
        v.append("grid: resolution must be strictly positive")
    if len(grid.cells) != grid.width * grid.height:
        v.append("grid: cells length does not equal width * height")

    ids = [a.id for a in museum.areas]
    for aid in sorted({i for i in ids if ids.count(i) > 1}):
        v.append(f"area {aid}: duplicate identifier")

    if museum.entrance_area_id not in ids:
        v.append(f"entrance: id {museum.entrance_area_id!r} does not resolve to an area")

    for rank in (1, 2):
        holders = [a.id for a in museum.areas if a.mandatory_rank == rank]
        if len(holders) == 0:
            v.append(f"mandatory rank {rank}: no area carries it")
        elif len(holders) > 1:
            v.append(f"mandatory rank {rank}: duplicate holders {holders}")
    for a in museum.areas:
        if a.mandatory_rank is not None and a.mandatory_rank not in (1, 2):
            v.append(f"area {a.id}: mandatory_rank must be 1 or 2")

    sane_grid = grid.resolution > 0 and len(grid.cells) == grid.width * grid.height
    for a in museum.areas:
        if len(a.boundary) < 3:
            v.append(f"area {a.id}: boundary needs at least 3 vertices")
            continue
        if _self_intersecting(a.boundary):
            v.append(f"area {a.id}: boundary is self-intersecting")
        if not point_in_polygon((a.waypoint.x, a.waypoint.y), a.boundary):
            v.append(f"area {a.id}: waypoint lies outside its boundary")
        if sane_grid:
            row, col = grid.cell_of(a.waypoint.x, a.waypoint.y)
            if not grid.in_bounds(row, col):
                v.append(f"area {a.id}: waypoint lies outside the grid")
            elif grid.is_occupied(row, col):
                v.append(f"area {a.id}: waypoint lies on an occupied cell")

    art_ids = [art.id for art in museum.artworks]
    for aid in sorted({i for i in art_ids if art_ids.count(i) > 1}):
        v.append(f"artwork {aid}: duplicate identifier")
    for art in museum.artworks:
        if art.trigger_radius <= 0:
            v.append(f"artwork {art.id}: trigger_radius must be strictly positive")
        if not art.facts:
            v.append(f"artwork {art.id}: facts must be non-empty")
        if _owner_of(museum, art) is None:
            v.append(f"artwork {art.id}: position lies outside every area boundary")

    return v


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ParseError(f"{where}: missing key {key!r}")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError(f"{where}: {key!r} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise ParseError(f"{where}: {key!r} has the wrong type")
    return value


def _parse_pose(raw, where: str) -> Pose:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ParseError(f"{where}: pose must be [x, y, theta]")
    return Pose(float(raw[0]), float(raw[1]), float(raw[2]))


def _parse_points(raw, where: str) -> tuple:
    if not isinstance(raw, list):
        raise ParseError(f"{where}: expected a list of [x, y] points")
    pts = []
    for p in raw:
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise ParseError(f"{where}: expected [x, y] points")
        pts.append((float(p[0]), float(p[1])))
    return tuple(pts)


def museum_from_dict(doc: dict) -> MuseumMap:
    """Build a MuseumMap from a parsed document. Raises ParseError only."""
    if not isinstance(doc, dict):
        raise ParseError("document root must be an object")
    graw = _require(doc, "grid", dict, "document")
    width = int(_require(graw, "width", float, "grid"))
    height = int(_require(graw, "height", float, "grid"))
    resolution = _require(graw, "resolution_m", float, "grid")
    occupied = graw.get("occupied", [])
    cells = [False] * (width * height)
    for rc in occupied:
        if not isinstance(rc, (list, tuple)) or len(rc) != 2:
            raise ParseError("grid: occupied entries must be [row, col]")
        row, col = int(rc[0]), int(rc[1])
        if not (0 <= row < height and 0 <= col < width):
            raise ParseError(f"grid: occupied cell [{row}, {col}] out of bounds")
        cells[row * width + col] = True
    grid = OccupancyGrid(width, height, resolution, tuple(cells))

    entrance = _require(doc, "entrance", str, "document")

    areas = []
    for i, araw in enumerate(_require(doc, "areas", list, "document")):
        where = f"areas[{i}]"
        if not isinstance(araw, dict):
            raise ParseError(f"{where}: must be an object")
        rank = araw.get("mandatory_rank")
        if rank is not None and not isinstance(rank, int):
            raise ParseError(f"{where}: mandatory_rank must be an integer")
        areas.append(Area(
            id=_require(araw, "id", str, where),
            name=_require(araw, "name", str, where),
            waypoint=_parse_pose(_require(araw, "waypoint", list, where), where),
            boundary=_parse_points(_require(araw, "boundary", list, where), where),
            intro_text=_require(araw, "intro_text", str, where),
            mandatory_rank=rank,
        ))

    artworks = []
    for i, wraw in enumerate(doc.get("artworks", [])):
        where = f"artworks[{i}]"
        if not isinstance(wraw, dict):
            raise ParseError(f"{where}: must be an object")
        pos = _parse_points([_require(wraw, "position", list, where)], where)[0]
        facts = _require(wraw, "facts", list, where)
        if not all(isinstance(f, str) for f in facts):
            raise ParseError(f"{where}: facts must be strings")
        artworks.append(Artwork(
            id=_require(wraw, "id", str, where),
            title=_require(wraw, "title", str, where),
            author=_require(wraw, "author", str, where),
            position=pos,
            facts=tuple(facts),
            trigger_radius=_require(wraw, "trigger_radius_m", float, where),
            passing_utterance=_require(wraw, "passing_utterance", str, where),
        ))

    return MuseumMap(grid=grid, areas=tuple(areas), artworks=tuple(artworks),
                     entrance_area_id=entrance)


def load_museum(document) -> MuseumMap:
    """Parse and validate a museum description (JSON text or parsed dict)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
    else:
        doc = document
    museum = museum_from_dict(doc)
    violations = validate_museum(museum)
    if violations:
        raise ValidationError(violations)
    return museum


def load_museum_file(path) -> MuseumMap:
    with open(path, "r", encoding="utf-8") as fh:
        return load_museum(fh.read())


def serialize_museum(museum: MuseumMap) -> dict:
    """Inverse of museum_from_dict (round-trips field by field)."""
    occupied = []
    for row in range(museum.grid.height):
        for col in range(museum.grid.width):
            if museum.grid.is_occupied(row, col):
                occupied.append([row, col])
    return {
        "grid": {
            "width": museum.grid.width,
            "height": museum.grid.height,
            "resolution_m": museum.grid.resolution,
            "occupied": occupied,
        },
        "entrance": museum.entrance_area_id,
        "areas": [
            {
                "id": a.id,
                "name": a.name,
                "waypoint": [a.waypoint.x, a.waypoint.y, a.waypoint.heading],
                "boundary": [[x, y] for x, y in a.boundary],
                "intro_text": a.intro_text,
                **({"mandatory_rank": a.mandatory_rank} if a.mandatory_rank is not None else {}),
            }
            for a in museum.areas
        ],
        "artworks": [
            {
                "id": w.id,
                "title": w.title,
                "author": w.author,
                "position": [w.position[0], w.position[1]],
                "facts": list(w.facts),
                "trigger_radius_m": w.trigger_radius,
                "passing_utterance": w.passing_utterance,
            }
            for w in museum.artworks
        ],
    }
