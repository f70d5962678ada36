"""Deterministic 2D navigation simulator.

Grid path planning (4-connected shortest path), rotate-then-translate
kinematics, and proximity/orientation-gated artwork notifications with
once-per-pass arming.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import NoPath, OccupiedEndpoint, OutOfBounds
from .museum import Artwork, OccupancyGrid, Pose, normalize_angle

WAYPOINT_EPS = 1e-6
REARM_FACTOR = 1.5

# Expansion preference: north, east, south, west (north = +y = +row).
_NEIGHBORS = ((1, 0), (0, 1), (-1, 0), (0, -1))


@dataclass(frozen=True)
class Path:
    waypoints: tuple  # ((x, y), ...)


@dataclass(frozen=True)
class Notification:
    artwork_id: str
    utterance: str
    logical_time: float


@dataclass(frozen=True)
class NavState:
    pose: Pose
    path: Optional[Path] = None
    target_area: Optional[str] = None
    linear_speed: float = 0.7
    angular_speed: float = math.pi / 2
    trigger_arming: dict = field(default_factory=dict)  # artwork id -> armed


def _endpoint_cell(grid: OccupancyGrid, x: float, y: float, what: str) -> tuple[int, int]:
    row, col = grid.cell_of(x, y)
    if not grid.in_bounds(row, col):
        raise OutOfBounds(f"{what} ({x}, {y}) maps outside the grid")
    if grid.is_occupied(row, col):
        raise OccupiedEndpoint(f"{what} ({x}, {y}) maps to an occupied cell")
    return row, col


def plan_path(grid: OccupancyGrid, start: Pose, goal: tuple[float, float]) -> Path:
    """Minimal 4-connected path of cell centers from start's cell to goal's cell.

    Tie-breaking is deterministic: neighbors expand north, east, south, west.
    """
    s = _endpoint_cell(grid, start.x, start.y, "start")
    g = _endpoint_cell(grid, goal[0], goal[1], "goal")
    if s == g:
        return Path((grid.cell_center(*s),))

    parent = {s: None}
    queue = deque([s])
    while queue:
        cell = queue.popleft()
        if cell == g:
            break
        row, col = cell
        for dr, dc in _NEIGHBORS:
            nxt = (row + dr, col + dc)
            if nxt in parent or not grid.in_bounds(*nxt) or grid.is_occupied(*nxt):
                continue
            parent[nxt] = cell
            queue.append(nxt)
    if g not in parent:
        raise NoPath(f"goal cell {g} unreachable from {s}")

    cells = []
    cur: Optional[tuple[int, int]] = g
    while cur is not None:
        cells.append(cur)
        cur = parent[cur]
    cells.reverse()
    return Path(tuple(grid.cell_center(r, c) for r, c in cells))


def advance(nav: NavState, dt: float) -> tuple[NavState, bool]:
    """Move along the current path for dt seconds; rotate toward the next
    waypoint first, then translate. Returns (new state, arrived)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if nav.path is None or not nav.path.waypoints:
        return replace(nav, path=None), True

    pose = nav.pose
    wps = list(nav.path.waypoints)
    remaining = dt
    while remaining > 1e-12 and wps:
        tx, ty = wps[0]
        dx, dy = tx - pose.x, ty - pose.y
        dist = math.hypot(dx, dy)
        if dist <= WAYPOINT_EPS:
            wps.pop(0)
            continue
        desired = math.atan2(dy, dx)
        diff = normalize_angle(desired - pose.heading)
        if abs(diff) > 1e-9:
            t_rot = abs(diff) / nav.angular_speed
            if t_rot >= remaining - 1e-12:
                turned = math.copysign(nav.angular_speed * remaining, diff)
                pose = Pose(pose.x, pose.y, pose.heading + turned)
                remaining = 0.0
                break
            pose = Pose(pose.x, pose.y, desired)
            remaining -= t_rot
        step = min(nav.linear_speed * remaining, dist)
        pose = Pose(pose.x + step * math.cos(pose.heading),
                    pose.y + step * math.sin(pose.heading),
                    pose.heading)
        remaining -= step / nav.linear_speed
        if step >= dist - WAYPOINT_EPS:
            wps.pop(0)

    arrived = not wps
    new_path = None if arrived else Path(tuple(wps))
    return replace(nav, pose=pose, path=new_path), arrived


def check_notifications(nav: NavState, artworks: list[Artwork], fov_half_angle: float,
                        now: float) -> tuple[NavState, list[Notification]]:
    """Fire at most one notification per armed artwork within its trigger
    radius and the frontal field of view; firing disarms, leaving beyond
    1.5x the radius re-arms."""
    if not (0 < fov_half_angle <= math.pi):
        raise ValueError("fov_half_angle must lie in (0, pi]")
    arming = dict(nav.trigger_arming)
    fired: list[Notification] = []
    for art in artworks:
        armed = arming.get(art.id, True)
        dx = art.position[0] - nav.pose.x
        dy = art.position[1] - nav.pose.y
        dist = math.hypot(dx, dy)
        if not armed:
            if dist > art.trigger_radius * REARM_FACTOR:
                arming[art.id] = True
            continue
        if dist > art.trigger_radius:
            continue
        bearing = normalize_angle(math.atan2(dy, dx) - nav.pose.heading)
        if abs(bearing) > fov_half_angle:
            continue
        fired.append(Notification(art.id, art.passing_utterance, now))
        arming[art.id] = False
    return replace(nav, trigger_arming=arming), fired
