"""Corridor flight planning over a pylon sequence.

The plan flies the conductor line at a fixed clearance H, laterally offset to
the right of travel, once in each direction with a semicircular turn between
the passes.  Speeds anticipate pylons: because the sensor looks forward and
down at depression angle alpha, the slowdown to v_min starts d = H/tan(alpha)
before each pylon and ends at the pylon itself; ramps in between respect a
per-meter acceleration bound.

Elevation rule: a waypoint carries the interpolated line elevation plus H,
raised if needed to clear the closest centerline point of its laterally
offset position (matters on bends, where the offset track can hug a steeper
neighboring span).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "PylonSpec",
    "FlightPlanConfig",
    "Waypoint",
    "FlightPlan",
    "plan_trajectory",
    "speed_profile",
    "read_pylons",
    "write_plan",
]

_UTURN_POINTS = 5
_MIN_TURN_RADIUS = 5.0


@dataclass(frozen=True)
class PylonSpec:
    x: float
    y: float
    z_top: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z_top):
            if not math.isfinite(v):
                raise ValueError(f"pylon coordinates must be finite, got {v!r}")


@dataclass(frozen=True)
class FlightPlanConfig:
    height: float = 25.0                      # clearance above the line, m
    depression: float = math.radians(50.0)    # sensor angle below horizon
    lateral_offset: float = 5.0
    spacing: float = 10.0                     # waypoint pitch along a pass
    v_min: float = 2.0
    v_max: float = 10.0
    accel: float = 0.5                        # allowed |dv| per meter flown

    def __post_init__(self):
        if not (self.height > 0):
            raise ValueError("height must be positive")
        if not (0.0 < self.depression < math.pi / 2):
            raise ValueError("depression angle must lie in (0, pi/2)")
        if self.lateral_offset < 0:
            raise ValueError("lateral offset must be >= 0")
        if not (self.spacing > 0):
            raise ValueError("spacing must be positive")
        if not (0 < self.v_min <= self.v_max):
            raise ValueError("need 0 < v_min <= v_max")
        if not (self.accel > 0):
            raise ValueError("accel must be positive")


@dataclass
class Waypoint:
    position: np.ndarray          # (3,) float64
    speed: float
    heading: float                # radians, world XY
    leg: str                      # 'forward' | 'turn' | 'backward'


@dataclass
class FlightPlan:
    waypoints: list = field(default_factory=list)

    def positions(self, leg=None) -> np.ndarray:
        wps = self.waypoints if leg is None else [w for w in self.waypoints if w.leg == leg]
        if not wps:
            return np.empty((0, 3))
        return np.stack([w.position for w in wps])

    def speeds(self) -> np.ndarray:
        return np.array([w.speed for w in self.waypoints])

    def __len__(self):
        return len(self.waypoints)


def _line_elevation_at(pylons, x, y):
    """Conductor elevation at the closest XY point of the pylon polyline."""
    best_d2 = math.inf
    best_z = pylons[0].z_top
    for a, b in zip(pylons[:-1], pylons[1:]):
        vx = b.x - a.x
        vy = b.y - a.y
        vv = vx * vx + vy * vy
        if vv == 0.0:
            t = 0.0
        else:
            t = ((x - a.x) * vx + (y - a.y) * vy) / vv
            t = min(1.0, max(0.0, t))
        cx = a.x + t * vx
        cy = a.y + t * vy
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best_z = a.z_top + t * (b.z_top - a.z_top)
    return best_z


def _pass_points(pylons, config):
    """Waypoint positions for one directed pass; marks pylon stations.

    Returns (positions list, is_pylon list).  Offset is applied to the right
    of the travel direction: right = travel x up.
    """
    lat = config.lateral_offset
    h = config.height
    positions = []
    stations = []

    def add(px, py, pz, is_pylon):
        guard = _line_elevation_at(pylons, px, py) + h
        positions.append(np.array([px, py, max(pz, guard)]))
        stations.append(is_pylon)

    for a, b in zip(pylons[:-1], pylons[1:]):
        vx = b.x - a.x
        vy = b.y - a.y
        seg = math.hypot(vx, vy)
        if seg == 0.0:
            raise ValueError("consecutive pylons coincide in XY")
        ux, uy = vx / seg, vy / seg
        rx, ry = uy, -ux              # (ux, uy, 0) x (0, 0, 1)
        n_steps = int(math.floor(seg / config.spacing))
        ts = [min(1.0, i * config.spacing / seg) for i in range(n_steps + 1)]
        if ts[-1] < 1.0:
            ts.append(1.0)
        # both bend corners are kept; exact duplicates on straight joints
        # are squeezed out later
        for t in ts:
            px = a.x + t * vx + rx * lat
            py = a.y + t * vy + ry * lat
            pz = a.z_top + t * (b.z_top - a.z_top) + h
            add(px, py, pz, t == 0.0 or t == 1.0)
    return positions, stations


def _uturn_points(pylons, config):
    """Semicircular arc linking the forward end to the backward start."""
    a, b = pylons[-2], pylons[-1]
    vx = b.x - a.x
    vy = b.y - a.y
    seg = math.hypot(vx, vy)
    ux, uy = vx / seg, vy / seg
    rx, ry = uy, -ux
    radius = max(config.lateral_offset, _MIN_TURN_RADIUS)
    cx, cy = b.x, b.y
    base_z = b.z_top + config.height
    pts = []
    for i in range(_UTURN_POINTS):
        theta = math.pi * i / (_UTURN_POINTS - 1)
        px = cx + radius * (rx * math.cos(theta) + ux * math.sin(theta))
        py = cy + radius * (ry * math.cos(theta) + uy * math.sin(theta))
        guard = _line_elevation_at(pylons, px, py) + config.height
        pts.append(np.array([px, py, max(base_z, guard)]))
    return pts


def _dedupe(seq_pos, seq_tags, seq_leg, tol=1e-9):
    # Collapse consecutive duplicates.  A turn point absorbed by a pass
    # point yields the pass tag, so both passes keep their full endpoint
    # sets and reversing the pylon list mirrors them exactly.
    pos, tags, legs = [], [], []
    for p, t, leg in zip(seq_pos, seq_tags, seq_leg):
        if pos and np.max(np.abs(pos[-1] - p)) <= tol:
            tags[-1] = tags[-1] or t      # keep the pylon marker
            if legs[-1] == "turn" and leg != "turn":
                legs[-1] = leg
            continue
        pos.append(p)
        tags.append(t)
        legs.append(leg)
    return pos, tags, legs


def plan_trajectory(pylons, config: FlightPlanConfig = FlightPlanConfig()) -> FlightPlan:
    """Build the two-pass corridor plan with profiled speeds."""
    pylons = list(pylons)
    if len(pylons) < 2:
        raise ValueError(f"need at least 2 pylons, got {len(pylons)}")

    fwd_pos, fwd_sta = _pass_points(pylons, config)
    turn_pos = _uturn_points(pylons, config)
    back_pos, back_sta = _pass_points(list(reversed(pylons)), config)

    pos = fwd_pos + turn_pos + back_pos
    sta = fwd_sta + [False] * len(turn_pos) + back_sta
    leg = (["forward"] * len(fwd_pos) + ["turn"] * len(turn_pos)
           + ["backward"] * len(back_pos))
    pos, sta, leg = _dedupe(pos, sta, leg)

    headings = []
    for i in range(len(pos)):
        if i + 1 < len(pos):
            d = pos[i + 1] - pos[i]
        else:
            d = pos[i] - pos[i - 1]
        headings.append(math.atan2(d[1], d[0]))

    speeds = _profile(pos, sta, leg, config)
    plan = FlightPlan([
        Waypoint(position=p, speed=s, heading=hd, leg=lg)
        for p, s, hd, lg in zip(pos, speeds, headings, leg)
    ])
    return plan


def _profile(pos, stations, legs, config):
    n = len(pos)
    ds = [0.0] + [float(np.linalg.norm(pos[i] - pos[i - 1])) for i in range(1, n)]
    s = np.cumsum(ds)
    lookahead = config.height / math.tan(config.depression)

    target = np.full(n, config.v_max)
    station_s = [(s[i], legs[i]) for i in range(n) if stations[i]]
    for i in range(n):
        if legs[i] == "turn":
            target[i] = config.v_min
            continue
        for sp, sleg in station_s:
            if sleg != legs[i]:
                continue
            # inside [pylon - lookahead, pylon]: hold v_min
            if sp - lookahead <= s[i] <= sp:
                target[i] = config.v_min
                break

    v = target.copy()
    for i in range(1, n):          # accelerating out of constraints
        v[i] = min(v[i], v[i - 1] + config.accel * ds[i])
    for i in range(n - 2, -1, -1):  # braking into constraints
        v[i] = min(v[i], v[i + 1] + config.accel * ds[i + 1])
    return v


def speed_profile(plan: FlightPlan, pylons, config: FlightPlanConfig) -> np.ndarray:
    """Recompute target speeds for an existing plan's waypoints."""
    pos = [w.position for w in plan.waypoints]
    legs = [w.leg for w in plan.waypoints]
    # a waypoint is a pylon station when its XY lands on a pylon axis
    stations = []
    for p, leg in zip(pos, legs):
        hit = False
        if leg != "turn":
            for py in pylons:
                if math.hypot(p[0] - py.x, p[1] - py.y) <= config.lateral_offset + 1e-6:
                    hit = True
                    break
        stations.append(hit)
    return _profile(pos, stations, legs, config)


# ---------------------------------------------------------------------------
# text I/O

def read_pylons(path):
    """Parse 'id x y z_top' rows; '#' starts a comment."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 'id x y z_top'")
            try:
                out.append(PylonSpec(float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise DataError(f"{path}: no pylons found")
    return out


def write_plan(plan: FlightPlan, path):
    """Whitespace table: x y z speed heading leg."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# x y z speed_mps heading_rad leg\n")
        for w in plan.waypoints:
            fh.write(
                f"{w.position[0]:.3f} {w.position[1]:.3f} {w.position[2]:.3f} "
                f"{w.speed:.3f} {w.heading:.6f} {w.leg}\n"
            )
