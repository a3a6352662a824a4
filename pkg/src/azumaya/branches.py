"""Branch diagrams: tracked joint eigenvalue curves of a matrix curve map.

Every fiber is decomposed into joint generalized eigenspaces ("slots").
Tracks carry an integer length and are continued from fiber to fiber by an
optimal assignment of their unit shares to slot shares, so several tracks may
sit in one slot (they are then co-located) and a track whose shares go to
different slots splits into new tracks.
"""

from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .curves import MatrixCurveMap
from .errors import DomainError, FiberNotAdmissible, TrackingAmbiguous
from .point import describe_summands


@dataclass(frozen=True)
class Slot:
    """One joint generalized eigenspace of a fiber."""

    point: tuple[float, ...]
    length: int
    order: int
    filtration: tuple[int, ...]
    axis_orders: tuple[int, ...]
    jordan_type: tuple[int, ...]


@dataclass(frozen=True)
class Fiber:
    x: float
    slots: tuple[Slot, ...]
    scale: float


def fiber_slots(cmap: MatrixCurveMap, x: float) -> Fiber:
    """Decompose the fiber over ``x``; raises :class:`FiberNotAdmissible`."""
    try:
        amap = cmap.fiber(x)
        blocks = amap._blocks()
    except DomainError as exc:
        raise FiberNotAdmissible(float(x), type(exc).__name__) from exc
    slots = tuple(
        Slot(tuple(float(v) for v in b.point), b.size, b.radical_index, b.filtration, b.orders, b.jordan_type)
        for b in blocks
    )
    return Fiber(float(x), slots, amap.scale)


@dataclass(frozen=True)
class TrackPoint:
    index: int
    x: float
    point: tuple[float, ...]
    length: int
    order: int
    filtration: tuple[int, ...]
    axis_orders: tuple[int, ...]
    jordan_type: tuple[int, ...]
    shared: bool = False


@dataclass
class Track:
    id: int
    length: int
    points: list[TrackPoint] = field(default_factory=list)
    parent: int | None = None

    @property
    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.point for p in self.points])

    def profile(self) -> tuple[int, int]:
        """Most common ``(length, radical index)``, ignoring co-located samples when possible."""
        own = [p for p in self.points if not p.shared] or self.points
        counts = Counter((self.length, p.order if not p.shared else 1) for p in own)
        return max(counts.items(), key=lambda kv: (kv[1], kv[0]))[0]

    def generic_point(self) -> TrackPoint:
        own = [p for p in self.points if not p.shared] or self.points
        length, order = self.profile()
        matching = [p for p in own if p.order == order] or own
        return matching[len(matching) // 2]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "length": self.length,
            "parent": self.parent,
            "points": [
                {
                    "x": p.x,
                    "value": list(p.point),
                    "length": p.length,
                    "order": p.order,
                    "filtration": list(p.filtration),
                    "axis_orders": list(p.axis_orders),
                    "jordan_type": list(p.jordan_type),
                    "shared": p.shared,
                }
                for p in self.points
            ],
        }


@dataclass(frozen=True)
class Event:
    """``kind`` is one of crossing, meet, merge, separate, split."""

    kind: str
    x: float
    tracks: tuple[int, ...]
    axis: int | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "x": self.x, "tracks": list(self.tracks), "axis": self.axis}


@dataclass
class BranchDiagram:
    name: str
    r: int
    n: int
    grid: np.ndarray
    tracks: list[Track]
    events: list[Event]
    scale: float
    tol: float
    warnings: list[str] = field(default_factory=list)

    def track(self, track_id: int) -> Track:
        return next(t for t in self.tracks if t.id == track_id)

    def lengths_at(self, index: int) -> int:
        return sum(t.length for t in self.tracks for p in t.points if p.index == index)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "r": self.r,
            "n": self.n,
            "grid": [float(x) for x in self.grid],
            "scale": self.scale,
            "tol": self.tol,
            "tracks": [t.to_json() for t in self.tracks],
            "events": [e.to_json() for e in self.events],
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Tracking


def _predict(track: Track) -> np.ndarray:
    pts = track.points
    if len(pts) >= 2:
        return 2 * np.asarray(pts[-1].point) - np.asarray(pts[-2].point)
    return np.asarray(pts[-1].point)


class _Tracker:
    def __init__(self, n: int, tie_tol: float, strict: bool):
        self.n = n
        self.tie_tol = tie_tol
        self.strict = strict
        self.tracks: list[Track] = []
        self.active: list[Track] = []
        self.events: list[Event] = []
        self.warnings: list[str] = []
        self.colocated: set[tuple[int, ...]] = set()

    def _new(self, length: int, parent: int | None = None) -> Track:
        t = Track(len(self.tracks), length, parent=parent)
        self.tracks.append(t)
        return t

    def start(self, index: int, fiber: Fiber) -> None:
        groups = []
        for slot in fiber.slots:
            t = self._new(slot.length)
            groups.append([t])
        self._record(index, fiber, groups)

    def step(self, index: int, fiber: Fiber) -> None:
        atoms = [t for t in self.active for _ in range(t.length)]
        positions = [s for s, slot in enumerate(fiber.slots) for _ in range(slot.length)]
        preds = np.array([_predict(t) for t in atoms])
        pts = np.array([fiber.slots[s].point for s in positions])
        cost = np.sum((preds[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        rows, cols = linear_sum_assignment(cost)
        assigned = dict(zip(rows.tolist(), cols.tolist()))
        by_track: dict[int, list[int]] = {}
        for a, t in enumerate(atoms):
            by_track.setdefault(t.id, []).append(positions[assigned[a]])
        self._resolve_ties(fiber, by_track, cost, atoms, positions, assigned, index)
        groups: list[list[Track]] = [[] for _ in fiber.slots]
        for t in self.active:
            slots = sorted(set(by_track[t.id]))
            if len(slots) == 1:
                groups[slots[0]].append(t)
                continue
            children = []
            for s in slots:
                child = self._new(by_track[t.id].count(s), parent=t.id)
                groups[s].append(child)
                children.append(child.id)
            self.events.append(Event("split", fiber.x, (t.id, *children)))
        self._record(index, fiber, groups)

    def _resolve_ties(self, fiber, by_track, cost, atoms, positions, assigned, index) -> None:
        first = {}
        for a, t in enumerate(atoms):
            first.setdefault(t.id, a)
        ids = sorted(first)
        for ia, ib in itertools.combinations(ids, 2):
            a, b = first[ia], first[ib]
            p, q = assigned[a], assigned[b]
            sp, sq = positions[p], positions[q]
            if sp == sq or len(set(by_track[ia])) > 1 or len(set(by_track[ib])) > 1:
                continue
            delta = cost[a, q] + cost[b, p] - cost[a, p] - cost[b, q]
            if delta > self.tie_tol:
                continue
            msg = f"tracks {ia} and {ib} tie at x={fiber.x:.17g}; resolved lexicographically"
            if self.strict:
                raise TrackingAmbiguous(msg)
            self.warnings.append(msg)
            if sp > sq and self._lengths(ia) == self._lengths(ib):
                by_track[ia], by_track[ib] = by_track[ib], by_track[ia]

    def _lengths(self, track_id: int) -> int:
        return self.tracks[track_id].length

    def _record(self, index: int, fiber: Fiber, groups: list[list[Track]]) -> None:
        now = set()
        for slot, members in zip(fiber.slots, groups):
            shared = len(members) > 1
            for t in members:
                t.points.append(TrackPoint(index, fiber.x, slot.point, t.length, slot.order, slot.filtration,
                                           slot.axis_orders, slot.jordan_type, shared))
            if shared:
                now.add(tuple(sorted(t.id for t in members)))
        for key in sorted(now - self.colocated):
            self.events.append(Event("merge", fiber.x, key))
        for key in sorted(self.colocated - now):
            self.events.append(Event("separate", fiber.x, key))
        self.colocated = now
        self.active = [t for members in groups for t in members]


def _slot_near(fiber: Fiber, target: np.ndarray) -> int:
    d = [float(np.sum((np.asarray(s.point) - target) ** 2)) for s in fiber.slots]
    return int(np.argmin(d))


def _refine(cmap: MatrixCurveMap, x0, x1, va0, va1, vb0, vb1, axis: int, xtol: float):
    """Bisect for the zero of ``lam_a[axis] - lam_b[axis]`` between ``x0`` and ``x1``."""
    d0 = va0[axis] - vb0[axis]
    lo, hi = x0, x1
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        s = (mid - x0) / (x1 - x0)
        fib = fiber_slots(cmap, mid)
        ia = _slot_near(fib, (1 - s) * va0 + s * va1)
        ib = _slot_near(fib, (1 - s) * vb0 + s * vb1)
        if ia == ib:
            return mid
        dm = fib.slots[ia].point[axis] - fib.slots[ib].point[axis]
        if dm == 0.0:
            return mid
        if np.sign(dm) == np.sign(d0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _crossings(cmap: MatrixCurveMap, tracks: list[Track], grid: np.ndarray, scale: float, tol: float,
               refine: bool) -> list[Event]:
    zero = tol * scale
    near = np.sqrt(tol) * scale
    xtol = 1e-9 * max(1.0, float(grid[-1] - grid[0]))
    out: list[Event] = []
    for ta, tb in itertools.combinations(tracks, 2):
        ia = {p.index: p for p in ta.points}
        common = sorted(set(ia) & {p.index for p in tb.points})
        if len(common) < 2:
            continue
        ib = {p.index: p for p in tb.points}
        va = np.array([ia[j].point for j in common])
        vb = np.array([ib[j].point for j in common])
        found: list[tuple[float, int]] = []
        for axis in range(va.shape[1]):
            delta = va[:, axis] - vb[:, axis]
            signs = np.where(np.abs(delta) <= zero, 0, np.sign(delta))
            last = None
            for pos in range(len(common)):
                if signs[pos] == 0:
                    continue
                if last is not None and signs[pos] != signs[last]:
                    contiguous = common[pos] - common[last] == pos - last
                    if pos == last + 1 and contiguous and refine:
                        x = _refine(cmap, grid[common[last]], grid[common[pos]], va[last], va[pos],
                                    vb[last], vb[pos], axis, xtol)
                    elif pos == last + 1:
                        w = delta[last] / (delta[last] - delta[pos])
                        x = grid[common[last]] + w * (grid[common[pos]] - grid[common[last]])
                    else:
                        x = 0.5 * (grid[common[last + 1]] + grid[common[pos - 1]])
                    found.append((float(x), axis))
                last = pos
        for x, axis in sorted(found):
            j = int(np.clip(np.searchsorted(grid, x), 1, len(grid) - 1))
            # distance of the two curves at the crossing, from the bracketing samples
            pa = _interp(ta, grid, x, j)
            pb = _interp(tb, grid, x, j)
            meet = pa is not None and pb is not None and float(np.max(np.abs(pa - pb))) <= near
            if meet:
                if any(e.kind == "meet" and e.tracks == (ta.id, tb.id) and abs(e.x - x) <= 1e3 * xtol for e in out):
                    continue
                out.append(Event("meet", x, (ta.id, tb.id)))
            else:
                out.append(Event("crossing", x, (ta.id, tb.id), axis))
    return out


def _interp(track: Track, grid: np.ndarray, x: float, j: int):
    by = {p.index: np.asarray(p.point) for p in track.points}
    if j - 1 not in by or j not in by:
        return None
    x0, x1 = grid[j - 1], grid[j]
    s = (x - x0) / (x1 - x0)
    return (1 - s) * by[j - 1] + s * by[j]


def analyze(cmap: MatrixCurveMap, grid_size: int = 512, workers: int = 1, strict: bool = False,
            refine: bool = True) -> BranchDiagram:
    """Sample the fibers on a uniform grid and continue their joint eigenvalues into tracks.

    Fibers are decomposed concurrently when ``workers > 1``; the tracking pass
    runs sequentially in grid order, so the result does not depend on
    ``workers``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if cmap.base.kind == "rectangle":
        raise ValueError("analyze needs a real one-dimensional base")
    grid = cmap.base.grid(grid_size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fibers = list(pool.map(lambda x: fiber_slots(cmap, x), grid))
    else:
        fibers = [fiber_slots(cmap, x) for x in grid]
    scale = max(f.scale for f in fibers)
    tracker = _Tracker(cmap.n, (cmap.tol * scale) ** 2, strict)
    tracker.start(0, fibers[0])
    for j in range(1, len(fibers)):
        tracker.step(j, fibers[j])
    events = tracker.events + _crossings(cmap, tracker.tracks, grid, scale, cmap.tol, refine)
    events.sort(key=lambda e: (e.x, e.kind, e.tracks, -1 if e.axis is None else e.axis))
    return BranchDiagram(cmap.name, cmap.r, cmap.n, grid, tracker.tracks, events, scale, cmap.tol,
                         tracker.warnings)


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class Classification:
    label: str
    nilpotent_cloud_orders: tuple[int, ...]
    crossings: bool
    overlap: bool
    decomposition: str
    track_decompositions: tuple[str, ...]
    intervals: tuple[dict, ...]

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "nilpotent_cloud_orders": list(self.nilpotent_cloud_orders),
            "crossings": self.crossings,
            "overlap": self.overlap,
            "decomposition": self.decomposition,
            "track_decompositions": list(self.track_decompositions),
            "intervals": list(self.intervals),
        }


def classify(diag: BranchDiagram) -> Classification:
    """Label the diagram as all-simple, single-nilpotent-order-p, mixed-simple-nilpotent or general."""
    profiles = {t.id: t.profile() for t in diag.tracks}
    nilpotent = [t for t in diag.tracks if profiles[t.id][1] > 1]
    simple = [t for t in diag.tracks if profiles[t.id] == (1, 1)]
    split = any(e.kind == "split" for e in diag.events)
    if split:
        label = "general"
    elif not nilpotent:
        label = "all-simple"
    elif len(diag.tracks) == 1:
        label = f"single-nilpotent-order-{profiles[nilpotent[0].id][1] - 1}"
    elif len(nilpotent) + len(simple) == len(diag.tracks):
        label = "mixed-simple-nilpotent"
    else:
        label = "general"
    orders = tuple(sorted(profiles[t.id][1] - 1 for t in nilpotent))
    crossings = any(e.kind in ("crossing", "meet") for e in diag.events)
    overlap = any(p.shared for t in diag.tracks for p in t.points) or any(
        profiles[t.id][0] > 1 and profiles[t.id][1] == 1 for t in diag.tracks)
    per_track = tuple(describe_summands(t.generic_point().jordan_type) for t in diag.tracks)
    decomposition = per_track[0] if len(per_track) == 1 else " + ".join(per_track)
    return Classification(label, orders, crossings, overlap, decomposition, per_track, _intervals(diag))


def _intervals(diag: BranchDiagram) -> tuple[dict, ...]:
    lo, hi = float(diag.grid[0]), float(diag.grid[-1])
    cuts = sorted({e.x for e in diag.events if lo < e.x < hi})
    bounds = [lo] + cuts + [hi]
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        inside = [j for j, x in enumerate(diag.grid) if a < x < b] or [int(np.argmin(np.abs(diag.grid - 0.5 * (a + b))))]
        j = inside[len(inside) // 2]
        live = [(t, p) for t in diag.tracks for p in t.points if p.index == j]
        distinct = len({p.point for _, p in live})
        profile = sorted(p.order - 1 for _, p in live if not p.shared or p.order == 1)
        out.append({"lo": a, "hi": b, "points": distinct, "tracks": len(live), "nilpotency": profile})
    return tuple(out)


def branch_slopes(diag: BranchDiagram, axis: int = -1) -> list[dict]:
    """Least-squares line fit of each track's ``axis`` coordinate against ``x``."""
    out = []
    for t in diag.tracks:
        xs, ys = t.xs, t.values[:, axis]
        if len(xs) < 2:
            out.append({"track": t.id, "slope": float("nan"), "intercept": float("nan"), "residual": float("nan")})
            continue
        a = np.vstack([xs, np.ones_like(xs)]).T
        (slope, intercept), *_ = np.linalg.lstsq(a, ys, rcond=None)
        residual = float(np.max(np.abs(a @ np.array([slope, intercept]) - ys)))
        out.append({"track": t.id, "slope": float(slope), "intercept": float(intercept), "residual": residual})
    return out
