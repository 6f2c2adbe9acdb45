"""1-Lipschitz slice functions, their level sets, and the slicing lower bound.

The four boundary transition points pair off into two chords; the function
zeta = max of two unit-gradient linear functions is 1-Lipschitz and strictly
monotone along each chord, so its level sets sweep the disk and every level
set carries a 1D transition problem whose energy is bounded below by a
well-to-well distance determined by which boundary regions its endpoints
touch.  Integrating those per-level bounds in the level value recovers a
lower bound for the 2D energy, by the coarea inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..heteroclinic1d import energy_1d
from ..metric import Path1D
from ..potential import Potential
from .angles import AngleSet
from .grid import Field2D


@dataclass(frozen=True)
class SliceFunction:
    """zeta(x) = max(x . u1 - lam1_off, x . u3 - lam3_off), 1-Lipschitz by
    construction, strictly increasing from b_i to a_i along each anchor
    chord."""

    R: float
    u1: np.ndarray
    u3: np.ndarray
    lam1_off: float
    lam3_off: float
    a1: np.ndarray
    b1: np.ndarray
    a3: np.ndarray
    b3: np.ndarray
    eps: float  # transition-angle verticality defect, used in the bound

    def zeta(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        z1 = pts @ self.u1 - self.lam1_off
        z3 = pts @ self.u3 - self.lam3_off
        return np.maximum(z1, z3)

    def anchor_values(self) -> dict:
        return {
            "a1": float(self.zeta(self.a1)),
            "b1": float(self.zeta(self.b1)),
            "a3": float(self.zeta(self.a3)),
            "b3": float(self.zeta(self.b3)),
        }

    def value_range(self, n: int = 720) -> tuple[float, float]:
        th = np.linspace(-np.pi, np.pi, n, endpoint=False)
        pts = self.R * np.stack([np.cos(th), np.sin(th)], axis=-1)
        z = self.zeta(pts)
        return float(np.min(z)), float(np.max(z))


def slice_function(angles: AngleSet, R: float | None = None) -> SliceFunction:
    """Build the slice function for an angle set.

    Directions are the normalized chords a_i - b_i.  The offsets must make
    the first plane active at a1, b1 and the second at a3, b3; those four
    linear inequalities constrain only the difference t = lam3 - lam1 to an
    interval.  The offset pair of least magnitude is chosen: t is clamped to
    the interval nearest zero and split symmetrically (lam1 = -t/2,
    lam3 = t/2), which minimizes |lam1| + |lam3| deterministically.
    """
    R = R if R is not None else angles.R
    a1, b1, a3, b3 = angles.a1, angles.b1, angles.a3, angles.b3
    u1 = (a1 - b1) / np.linalg.norm(a1 - b1)
    u3 = (a3 - b3) / np.linalg.norm(a3 - b3)
    d = u3 - u1
    # zeta1 >= zeta3 at a1, b1:  lam3 - lam1 >= x . (u3 - u1)
    m1 = max(float(a1 @ d), float(b1 @ d))
    # zeta3 >= zeta1 at a3, b3:  lam3 - lam1 <= x . (u3 - u1)
    m3 = min(float(a3 @ d), float(b3 @ d))
    if m1 > m3 + 1e-12:
        raise ConfigurationError(
            f"no offsets make the two chords the active planes at their own "
            f"anchors (need t in [{m1:.6g}, {m3:.6g}])"
        )
    t = float(np.clip(0.0, m1, m3))
    sf = SliceFunction(
        R=R,
        u1=u1,
        u3=u3,
        lam1_off=-t / 2.0,
        lam3_off=t / 2.0,
        a1=a1,
        b1=b1,
        a3=a3,
        b3=b3,
        eps=angles.eps,
    )
    vals = sf.anchor_values()
    checks = [
        abs((vals["a1"] - vals["b1"]) - np.linalg.norm(a1 - b1)),
        abs((vals["a3"] - vals["b3"]) - np.linalg.norm(a3 - b3)),
    ]
    if max(checks) > 1e-10:
        raise ConfigurationError(f"anchor difference identities violated by {max(checks):.2e}")
    return sf


# ---------------------------------------------------------------------------
# Level sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSet:
    t: float
    polylines: tuple  # tuple of (m, 2) arrays, endpoints on the circle
    case: str  # "a" | "b" | "c" | "d"

    def __iter__(self):
        return iter(self.polylines)

    def __len__(self):
        return len(self.polylines)


def _chord_piece(sf: SliceFunction, which: int, t: float):
    """The part of {zeta_i = t} inside the disk where the other plane is not
    larger; returns (P_lo, P_hi) endpoints or None."""
    u_a = sf.u1 if which == 1 else sf.u3
    u_b = sf.u3 if which == 1 else sf.u1
    lam_a = sf.lam1_off if which == 1 else sf.lam3_off
    lam_b = sf.lam3_off if which == 1 else sf.lam1_off
    c = t + lam_a
    if abs(c) >= sf.R:
        return None
    tang = np.array([-u_a[1], u_a[0]])
    S = np.sqrt(sf.R * sf.R - c * c)
    s_lo, s_hi = -S, S
    # clip by zeta_b <= t: (c u_a + s tang) . u_b <= t + lam_b
    alpha = float(tang @ u_b)
    beta = float(c * (u_a @ u_b) - (t + lam_b))
    # alpha * s + beta <= 0
    if abs(alpha) < 1e-14:
        if beta > 0.0:
            return None
    elif alpha > 0.0:
        s_hi = min(s_hi, -beta / alpha)
    else:
        s_lo = max(s_lo, -beta / alpha)
    if s_lo >= s_hi:
        return None
    p_lo = c * u_a + s_lo * tang
    p_hi = c * u_a + s_hi * tang
    return p_lo, p_hi


def extract_level_set(sf: SliceFunction, t: float, R: float | None = None) -> LevelSet:
    """The level set {zeta = t} inside the closed disk: one or two segments,
    merged into a broken line when they meet on the ridge.

    The case label records which anchor intervals contain t: "a" (first chord
    only), "b" (second only), "c" (both), "d" (neither).
    """
    R = R if R is not None else sf.R
    pieces = []
    for which in (1, 3):
        piece = _chord_piece(sf, which, t)
        if piece is not None:
            pieces.append(piece)
    polylines = []
    if len(pieces) == 2:
        (p0a, p0b), (p1a, p1b) = pieces
        same = (np.linalg.norm(p0a - p1a) < 1e-9 and np.linalg.norm(p0b - p1b) < 1e-9) or (
            np.linalg.norm(p0a - p1b) < 1e-9 and np.linalg.norm(p0b - p1a) < 1e-9
        )
        if same:
            # the two planes coincide on this level (parallel chords)
            polylines.append(np.stack(pieces[0]))
        else:
            merged = None
            ends = [p0a, p0b, p1a, p1b]
            for i in (0, 1):
                for j in (2, 3):
                    if np.linalg.norm(ends[i] - ends[j]) < 1e-9:
                        merged = np.stack([ends[1 - i], ends[i], ends[5 - j]])
                        break
                if merged is not None:
                    break
            if merged is not None:
                polylines.append(merged)
            else:
                polylines.append(np.stack(pieces[0]))
                polylines.append(np.stack(pieces[1]))
    elif len(pieces) == 1:
        polylines.append(np.stack(pieces[0]))
    return LevelSet(t=t, polylines=tuple(polylines), case=_case_label(sf, t))


def _case_label(sf: SliceFunction, t: float) -> str:
    vals = sf.anchor_values()
    # orientation: zeta(a_i) > zeta(b_i), so the test interval is
    # [zeta(b_i), zeta(a_i)]
    in1 = min(vals["b1"], vals["a1"]) <= t <= max(vals["b1"], vals["a1"])
    in3 = min(vals["b3"], vals["a3"]) <= t <= max(vals["b3"], vals["a3"])
    if in1 and in3:
        return "c"
    if in1:
        return "a"
    if in3:
        return "b"
    return "d"


# ---------------------------------------------------------------------------
# Slicing lower bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SliceRow:
    t: float
    case: str
    measured_energy: float
    predicted_bound: float
    delta: float
    in_central_set: bool
    length: float


@dataclass(frozen=True)
class SliceBoundReport:
    total_bound: float
    direct_integral: float
    rows: tuple[SliceRow, ...]
    dt: float


def _restrict_along(field: Field2D, polyline: np.ndarray):
    """Sample the field along a polyline at arclength spacing ~ h; returns
    (1D restriction, sampling points) or None for degenerate polylines."""
    seg = polyline[1:] - polyline[:-1]
    lens = np.linalg.norm(seg, axis=1)
    total = float(np.sum(lens))
    if total < 2.0 * field.h:
        return None
    n = max(int(np.ceil(total / field.h)) + 1, 5)
    s = np.linspace(0.0, total, n)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    pts = np.empty((n, 2))
    for c in range(2):
        pts[:, c] = np.interp(s, cum, polyline[:, c])
    # clamp sampling points inside the disk (polyline endpoints sit on it)
    r = np.linalg.norm(pts, axis=1)
    over = r > field.R
    if np.any(over):
        pts[over] *= (field.R / r[over])[:, None]
    return Path1D(0.0, total, field.sample(pts)), pts


def slice_lower_bound(
    potential: Potential,
    field: Field2D,
    sf: SliceFunction,
    eta: float,
    R0: float,
    n_slices: int = 400,
    d12: float | None = None,
    d23: float | None = None,
    d13: float | None = None,
    c_rate: float = 1.0,
    central_amplitude: float = 0.0,
    central_rate: float = 1.0,
) -> SliceBoundReport:
    """Per-level 1D energies against their case-dependent predicted bounds.

    For each of ``n_slices`` level values: extract the level set, restrict the
    field along it, measure the 1D energy, and emit the case bound (d12, d23,
    d13 or 0) minus the exponential correction

        exp(-c_rate * min(sqrt(R), delta(t) / (eps + R^{-1/2})))

    where delta(t) is the distance from t to the nearest anchor value.  Levels
    whose geometry meets both half-plane regions {x < -eta*R0} and
    {x > eta*R0} inside B_{R0} form the central set; there the stronger bound
    d13 + central_amplitude * exp(-central_rate * R0) applies.  The total is
    the level-value integral of the per-level bounds; the direct integral of
    the measured energies is reported alongside (coarea: it cannot exceed the
    2D energy).
    """
    if abs(field.R - sf.R) > 1e-9:
        raise DomainError(f"field radius {field.R} and slice radius {sf.R} differ")
    if d12 is None or d23 is None or d13 is None:
        from ..metric import degenerate_distance

        p1 = potential.well(1).position
        p2 = potential.well(2).position
        p3 = potential.well(3).position
        d12 = d12 if d12 is not None else degenerate_distance(potential, p1, p2).value
        d23 = d23 if d23 is not None else degenerate_distance(potential, p2, p3).value
        d13 = d13 if d13 is not None else degenerate_distance(potential, p1, p3).value
    case_bound = {"a": d12, "b": d23, "c": d13, "d": 0.0}
    vals = sf.anchor_values()
    anchors = np.array([vals["a1"], vals["b1"], vals["a3"], vals["b3"]])
    lo, hi = sf.value_range()
    ts = np.linspace(lo + 1e-9, hi - 1e-9, n_slices)
    dt = float(ts[1] - ts[0])
    R = field.R
    eps = sf.eps

    rows = []
    for t in ts:
        ls = extract_level_set(sf, float(t))
        measured = 0.0
        length = 0.0
        meets_left = False
        meets_right = False
        for poly in ls.polylines:
            restricted = _restrict_along(field, poly)
            if restricted is None:
                continue
            path, pts = restricted
            measured += energy_1d(potential, path)
            length += path.t_end
            # geometric test for the central set on the sampling points
            inside = np.linalg.norm(pts, axis=1) <= R0
            meets_left |= bool(np.any(inside & (pts[:, 0] < -eta * R0)))
            meets_right |= bool(np.any(inside & (pts[:, 0] > eta * R0)))
        delta = float(np.min(np.abs(t - anchors)))
        in_central = meets_left and meets_right
        if in_central:
            bound = d13 + central_amplitude * np.exp(-central_rate * R0)
            bound -= np.exp(-c_rate * np.sqrt(R))
        else:
            corr = np.exp(-c_rate * min(np.sqrt(R), delta / (eps + 1.0 / np.sqrt(R))))
            bound = max(case_bound[ls.case] - corr, 0.0)
        rows.append(
            SliceRow(
                t=float(t),
                case=ls.case,
                measured_energy=float(measured),
                predicted_bound=float(bound),
                delta=delta,
                in_central_set=in_central,
                length=float(length),
            )
        )
    bounds = np.array([r.predicted_bound for r in rows])
    meas = np.array([r.measured_energy for r in rows])
    w = np.ones_like(bounds)
    w[0] = w[-1] = 0.5
    return SliceBoundReport(
        total_bound=float(np.sum(w * bounds) * dt),
        direct_integral=float(np.sum(w * meas) * dt),
        rows=tuple(rows),
        dt=dt,
    )
