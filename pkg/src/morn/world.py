"""Synthetic navigation world: occupancy-grid maps with geodesic
distances, a stochastic evidence generator standing in for open-vocabulary
perception, and a frontier-exploring reactive navigator.

The navigator is deliberately blind to budgets and meta-states: it reads
only the map, its own coverage and the evidence stream, so the executive
can be deleted without changing a single primitive action until the first
intervention.

Fixture maps use a plain-text format, one character per cell:
'#' = wall, '.' = free, 'S' = spawn, digits 1-9 = goal positions
(goal cells are free).
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FREE = 0
WALL = 1

Cell = tuple[int, int]  # (row, col)


class OccupiedCellError(ValueError):
    pass


@dataclass
class GridMap:
    cells: np.ndarray  # uint8, WALL/FREE
    cell_size: float  # meters per cell
    spawn: Cell

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def is_free(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width and self.cells[r, c] == FREE

    def to_meters(self, cell: Cell) -> tuple[float, float]:
        """Cell center in meters, (x, y) = (col, row) scaled."""
        r, c = cell
        return ((c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size)


def parse_grid(text: str, cell_size: float = 0.5) -> tuple[GridMap, dict[int, Cell]]:
    """Parse the plain-text fixture format. Returns the map and the goal
    positions keyed by their digit."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    h = len(lines)
    w = max(len(ln) for ln in lines)
    cells = np.full((h, w), WALL, dtype=np.uint8)
    spawn: Optional[Cell] = None
    goals: dict[int, Cell] = {}
    for r, ln in enumerate(lines):
        for c, ch in enumerate(ln):
            if ch == "#":
                continue
            if ch == ".":
                cells[r, c] = FREE
            elif ch == "S":
                cells[r, c] = FREE
                spawn = (r, c)
            elif ch.isdigit() and ch != "0":
                cells[r, c] = FREE
                goals[int(ch)] = (r, c)
            elif ch == " ":
                continue
            else:
                raise ValueError(f"unknown map character {ch!r} at {(r, c)}")
    if spawn is None:
        raise ValueError("map has no spawn cell 'S'")
    return GridMap(cells=cells, cell_size=cell_size, spawn=spawn), goals


_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def distance_field(gmap: GridMap, target: Cell) -> np.ndarray:
    """Geodesic distance in meters from every free cell to `target` over
    the 4-connected free grid; inf where disconnected or walled."""
    if not gmap.is_free(target):
        raise OccupiedCellError(f"target cell {target} is not free")
    h, w = gmap.cells.shape
    dist = np.full((h, w), np.inf, dtype=np.float64)
    dist[target] = 0.0
    free = gmap.cells
    q = deque([target])
    while q:
        r, c = q.popleft()
        d = dist[r, c] + 1.0
        for dr, dc in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] == FREE and dist[nr, nc] == np.inf:
                dist[nr, nc] = d
                q.append((nr, nc))
    return dist * gmap.cell_size


def geodesic_distance(gmap: GridMap, start: Cell, goal: Cell) -> float:
    """Shortest-path length in meters between two free cells; inf if
    disconnected."""
    if not gmap.is_free(start):
        raise OccupiedCellError(f"start cell {start} is not free")
    return float(distance_field(gmap, goal)[start])


def bfs_path(gmap: GridMap, start: Cell, target: Cell) -> Optional[list[Cell]]:
    """Shortest 4-connected path from start to target (exclusive of
    start), or None if unreachable."""
    if start == target:
        return []
    h, w = gmap.cells.shape
    free = gmap.cells
    parent: dict[Cell, Cell] = {start: start}
    q = deque([start])
    while q:
        cur = q.popleft()
        r, c = cur
        for dr, dc in _NEIGHBORS:
            nxt = (r + dr, c + dc)
            nr, nc = nxt
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] == FREE and nxt not in parent:
                parent[nxt] = cur
                if nxt == target:
                    path = [nxt]
                    while parent[path[-1]] != path[-1]:
                        path.append(parent[path[-1]])
                    path.reverse()
                    return path[1:]
                q.append(nxt)
    return None


def line_of_sight(gmap: GridMap, a: Cell, b: Cell) -> bool:
    """Integer-grid ray cast (Bresenham) with no wall intersection."""
    r0, c0 = a
    r1, c1 = b
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 > r0 else -1
    sc = 1 if c1 > c0 else -1
    err = dr - dc
    r, c = r0, c0
    while True:
        if gmap.cells[r, c] == WALL:
            return False
        if (r, c) == (r1, c1):
            return True
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc


@dataclass
class GoalInstance:
    goal_id: int
    category: str
    position: Cell  # nominal position; hidden from the navigator
    detectability: float = 0.9
    present: bool = True


@dataclass
class PerceptionParams:
    base_noise_mean: float = 0.10  # baseline score level
    noise_std: float = 0.05
    signal_amplitude: float = 0.80
    signal_range: float = 5.0  # meters
    false_positive_rate: float = 0.02
    spike_amplitude: float = 0.80  # one-step false-positive height

    def validate(self) -> None:
        if not (0.0 <= self.false_positive_rate <= 1.0):
            raise ValueError("false_positive_rate must be in [0, 1]")
        if self.signal_range <= 0:
            raise ValueError("signal_range must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


def emit_evidence(
    goal: GoalInstance,
    pose: Cell,
    gmap: GridMap,
    params: PerceptionParams,
    rng: random.Random,
    distance: Optional[float] = None,
) -> tuple[float, bool]:
    """One evidence score in [0, 1] for the active goal from the current
    pose. Returns (score, detected).

    A true detection requires the goal to be present, within signal
    range along the geodesic, in line of sight, and to pass a
    detectability draw; it adds a range-decayed amplitude on top of the
    noisy baseline. Otherwise the baseline is emitted, occasionally
    replaced by a one-step false-positive spike.

    `distance` is the precomputed geodesic distance from pose to the
    goal; it is computed on the fly when omitted.
    """
    if not gmap.is_free(pose):
        raise OccupiedCellError(f"pose {pose} is not free")
    p = params
    noise = rng.gauss(0.0, p.noise_std) if p.noise_std > 0 else 0.0

    detected = False
    if goal.present:
        if distance is None:
            distance = geodesic_distance(gmap, pose, goal.position)
        if distance <= p.signal_range and line_of_sight(gmap, pose, goal.position):
            if rng.random() < goal.detectability:
                detected = True

    if detected:
        score = p.base_noise_mean + p.signal_amplitude * math.exp(-distance / p.signal_range) + noise
    elif p.false_positive_rate > 0 and rng.random() < p.false_positive_rate:
        score = p.base_noise_mean + p.spike_amplitude + noise
    else:
        score = p.base_noise_mean + noise
    return (max(0.0, min(score, 1.0)), detected)


class NavigatorMode:
    EXPLORE = "EXPLORE"
    APPROACH = "APPROACH"


class Navigator:
    """Frontier-coverage explorer with an evidence-triggered approach
    mode. Never reads meta-states or budgets.

    EXPLORE plans a shortest path to the nearest unvisited free cell and
    follows it, marking coverage in a small sensing square around the
    pose. Evidence above the approach trigger for two consecutive steps
    locks in a believed target and switches to APPROACH, which descends
    the geodesic to that target. Sustained low evidence releases the
    target and resumes exploration.
    """

    TRIGGER_STEPS = 2
    RELEASE_STEPS = 5

    def __init__(self, gmap: GridMap, params: PerceptionParams, sense_radius: int = 2):
        self.gmap = gmap
        self.pose: Cell = gmap.spawn
        self.mode = NavigatorMode.EXPLORE
        self.believed_target: Optional[Cell] = None
        self.visited = np.zeros_like(gmap.cells, dtype=bool)
        self.sense_radius = sense_radius
        self.approach_trigger = params.base_noise_mean + params.signal_amplitude / 2.0
        self._path: deque[Cell] = deque()
        self._high_streak = 0
        self._low_streak = 0
        self._exhausted = False
        self._mark_visited()

    def begin_goal_context(self) -> None:
        """Fresh search for a newly activated goal: coverage, mode and
        any believed target are reset; the pose is kept."""
        self.visited[:] = False
        self.mode = NavigatorMode.EXPLORE
        self.believed_target = None
        self._path.clear()
        self._high_streak = 0
        self._low_streak = 0
        self._exhausted = False
        self._mark_visited()

    def coverage_fraction(self) -> float:
        free = self.gmap.cells == FREE
        return float(np.count_nonzero(self.visited & free)) / float(np.count_nonzero(free))

    def _mark_visited(self) -> None:
        r, c = self.pose
        s = self.sense_radius
        self.visited[max(0, r - s): r + s + 1, max(0, c - s): c + s + 1] = True

    def _plan_to_nearest_unvisited(self) -> Optional[list[Cell]]:
        """Shortest path (exclusive of the pose) to the nearest
        reachable unvisited free cell, or None when coverage is done."""
        h, w = self.gmap.cells.shape
        free = self.gmap.cells
        parent: dict[Cell, Cell] = {self.pose: self.pose}
        q = deque([self.pose])
        while q:
            cur = q.popleft()
            r, c = cur
            for dr, dc in _NEIGHBORS:
                nxt = (r + dr, c + dc)
                nr, nc = nxt
                if 0 <= nr < h and 0 <= nc < w and free[nr, nc] == FREE and nxt not in parent:
                    parent[nxt] = cur
                    if not self.visited[nr, nc]:
                        path = [nxt]
                        while parent[path[-1]] != path[-1]:
                            path.append(parent[path[-1]])
                        path.reverse()
                        return path[1:]
                    q.append(nxt)
        return None

    def observe(self, evidence: float, detected: bool, goal: GoalInstance,
                rng: random.Random) -> None:
        """Feed the current evidence sample before stepping; may flip
        between EXPLORE and APPROACH."""
        if evidence > self.approach_trigger:
            self._high_streak += 1
            self._low_streak = 0
        else:
            self._high_streak = 0
            self._low_streak += 1

        if self.mode == NavigatorMode.EXPLORE and self._high_streak >= self.TRIGGER_STEPS:
            target = self._locate_source(detected, goal, rng)
            if target is not None:
                self.believed_target = target
                self.mode = NavigatorMode.APPROACH
                self._path.clear()
        elif self.mode == NavigatorMode.APPROACH and self._low_streak >= self.RELEASE_STEPS:
            self.believed_target = None
            self.mode = NavigatorMode.EXPLORE
            self._path.clear()

    def _locate_source(self, detected: bool, goal: GoalInstance,
                       rng: random.Random) -> Optional[Cell]:
        # A genuine detection localizes the emitting goal; a trigger fed
        # by false positives latches onto a phantom cell near the pose.
        if detected and goal.present:
            return goal.position
        candidates = []
        r, c = self.pose
        h, w = self.gmap.cells.shape
        for dr in range(-6, 7):
            for dc in range(-6, 7):
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and self.gmap.cells[nr, nc] == FREE:
                    candidates.append((nr, nc))
        return candidates[rng.randrange(len(candidates))] if candidates else None

    def step(self) -> str:
        """Advance one primitive step. Returns the action taken
        ('move' or 'stay')."""
        if self.mode == NavigatorMode.APPROACH and self.believed_target is not None:
            if self.pose == self.believed_target:
                self._mark_visited()
                return "stay"
            if not self._path:
                path = bfs_path(self.gmap, self.pose, self.believed_target)
                if path is None:
                    # phantom or unreachable target: give up on it
                    self.believed_target = None
                    self.mode = NavigatorMode.EXPLORE
                else:
                    self._path = deque(path)

        if self.mode == NavigatorMode.EXPLORE and not self._path:
            if self._exhausted:
                return "stay"
            path = self._plan_to_nearest_unvisited()
            if path is None:
                self._exhausted = True
                self._mark_visited()
                return "stay"
            self._path = deque(path)

        if self._path:
            self.pose = self._path.popleft()
            self._mark_visited()
            return "move"
        self._mark_visited()
        return "stay"


@dataclass
class WorldParams:
    rooms_x: int = 3
    rooms_y: int = 3
    room_min: int = 6
    room_max: int = 10
    extra_door_prob: float = 0.25
    cell_size: float = 0.5


def generate_map(
    rng: random.Random,
    params: WorldParams,
    sealed_room: bool = False,
) -> tuple[GridMap, list[list[Cell]], Optional[int]]:
    """Procedural multi-room map: a rooms_y x rooms_x lattice of
    rectangular rooms joined by single-cell doors along a random spanning
    tree (plus optional extra doors).

    When `sealed_room` is set, one leaf room of the tree keeps its walls
    intact and its index is returned; its interior is unreachable from
    the rest of the map.

    Returns (map, per-room interior cells, sealed room index or None).
    """
    rx, ry = params.rooms_x, params.rooms_y
    widths = [rng.randint(params.room_min, params.room_max) for _ in range(rx)]
    heights = [rng.randint(params.room_min, params.room_max) for _ in range(ry)]
    # walls of thickness 1 between rooms and on the border
    col_off = [1]
    for wdt in widths:
        col_off.append(col_off[-1] + wdt + 1)
    row_off = [1]
    for hgt in heights:
        row_off.append(row_off[-1] + hgt + 1)
    total_w = col_off[-1]
    total_h = row_off[-1]
    cells = np.full((total_h, total_w), WALL, dtype=np.uint8)

    rooms: list[list[Cell]] = []
    for j in range(ry):
        for i in range(rx):
            r0, c0 = row_off[j], col_off[i]
            cells[r0: r0 + heights[j], c0: c0 + widths[i]] = FREE
            rooms.append([(r, c) for r in range(r0, r0 + heights[j])
                          for c in range(c0, c0 + widths[i])])

    def room_index(i: int, j: int) -> int:
        return j * rx + i

    # spanning tree over the room lattice (randomized DFS)
    edges: list[tuple[int, int, tuple[int, int], tuple[int, int]]] = []
    visited_rooms = {(0, 0)}
    stack = [(0, 0)]
    all_edges = []
    while stack:
        i, j = stack[-1]
        neigh = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                 if 0 <= i + di < rx and 0 <= j + dj < ry and (i + di, j + dj) not in visited_rooms]
        if not neigh:
            stack.pop()
            continue
        ni, nj = neigh[rng.randrange(len(neigh))]
        visited_rooms.add((ni, nj))
        edges.append((room_index(i, j), room_index(ni, nj), (i, j), (ni, nj)))
        stack.append((ni, nj))

    sealed_idx: Optional[int] = None
    if sealed_room:
        # a leaf of the tree: appears exactly once as a tree endpoint
        degree: dict[int, int] = {}
        for a, b, _, _ in edges:
            degree[a] = degree.get(a, 0) + 1
            degree[b] = degree.get(b, 0) + 1
        leaves = [k for k, d in degree.items() if d == 1 and k != room_index(0, 0)]
        sealed_idx = leaves[rng.randrange(len(leaves))]

    def carve_door(a: tuple[int, int], b: tuple[int, int]) -> None:
        (i0, j0), (i1, j1) = a, b
        if i0 == i1:  # vertical neighbors, door in horizontal wall
            j_hi = max(j0, j1)
            wall_r = row_off[j_hi] - 1
            c = col_off[i0] + rng.randrange(widths[i0])
            cells[wall_r, c] = FREE
        else:
            i_hi = max(i0, i1)
            wall_c = col_off[i_hi] - 1
            r = row_off[j0] + rng.randrange(heights[j0])
            cells[r, wall_c] = FREE

    for a, b, ra, rb in edges:
        if sealed_idx is not None and sealed_idx in (a, b):
            continue
        carve_door(ra, rb)

    # extra doors between adjacent rooms for loops
    for j in range(ry):
        for i in range(rx):
            for di, dj in ((1, 0), (0, 1)):
                ni, nj = i + di, j + dj
                if ni >= rx or nj >= ry:
                    continue
                a, b = room_index(i, j), room_index(ni, nj)
                if sealed_idx is not None and sealed_idx in (a, b):
                    continue
                if rng.random() < params.extra_door_prob:
                    carve_door((i, j), (ni, nj))

    # spawn in a non-sealed room
    open_rooms = [k for k in range(rx * ry) if k != sealed_idx]
    spawn_room = rooms[open_rooms[rng.randrange(len(open_rooms))]]
    spawn = spawn_room[rng.randrange(len(spawn_room))]
    return GridMap(cells=cells, cell_size=params.cell_size, spawn=spawn), rooms, sealed_idx
