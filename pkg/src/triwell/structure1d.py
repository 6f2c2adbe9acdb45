"""Structure analysis of low-energy 1D transition paths.

A path on [-R, R] whose energy barely exceeds the well-to-well distance it
spans is forced into a rigid shape: plateaus glued to wells, separated by
short transition intervals, each close (in H1, after a shift) to a wall
profile.  This module detects that structure and measures the quantitative
bounds attached to it:

* :func:`transition_decomposition` tiles the parameter interval into plateaus
  and transitions using an eta / 4*eta threshold rule on the distance to the
  nearest well.
* :func:`locate_split` finds representative transition parameters a < T < b
  for a path with the two-transition (1 -> 2 -> 3) structure and reports H1
  distances to the shifted wall profiles.
* :func:`lower_bound_endwell` and :func:`interior_well_bound` measure the
  end-well and middle-well energy lower bounds; the constants in the bound
  forms are empirical and calibrated per potential.
* :func:`schatzman_gap` measures the stability ratio between the squared H1
  distance to the nearest translate of a wall profile and the energy excess.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import PreconditionError, StructureError
from .heteroclinic1d import (
    HeteroclinicProfile,
    energy_1d,
    energy_density,
    minimize_path_energy,
    solve_heteroclinic,
)
from .metric import Path1D, degenerate_distance, nearest_well_distance, well_distance
from .potential import Potential, Well, convexity_radius


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

def max_eta(potential: Potential) -> float:
    """Largest usable threshold: the smallest over wells of the degenerate
    distance to the edge of the sampled convexity region."""
    out = np.inf
    th = np.linspace(0.0, 2.0 * np.pi, 32, endpoint=False)
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    for w in potential.wells:
        r = convexity_radius(potential, w)
        pts = w.position + r * dirs
        out = min(out, float(np.min(well_distance(potential, pts, w))))
    return out


def default_eta(potential: Potential) -> float:
    """One fifth of the smallest convexity-region distance."""
    return max_eta(potential) / 5.0


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    kind: str  # "plateau" | "transition"
    i0: int
    i1: int
    t0: float
    t1: float
    label: int | None  # well label for plateaus
    energy: float


@dataclass(frozen=True)
class TransitionDecomposition:
    plateaus: tuple[Interval, ...]
    transitions: tuple[Interval, ...]
    eta: float
    anomalies: tuple[str, ...]
    total_energy: float

    def intervals(self) -> list[Interval]:
        out = sorted(self.plateaus + self.transitions, key=lambda iv: iv.i0)
        return out

    def plateau_labels(self) -> tuple[int, ...]:
        return tuple(p.label for p in sorted(self.plateaus, key=lambda iv: iv.i0))


def transition_decomposition(potential: Potential, path: Path1D, eta: float | None = None) -> TransitionDecomposition:
    """Tile [-R, R] into plateaus and transition intervals.

    The excursion set {d(f(t), wells) > eta} is split into maximal runs; runs
    that reach beyond 4*eta are transitions, everything else is absorbed into
    the neighbouring plateaus.  Plateaus are labeled by the nearest well; a
    label repeating in the plateau sequence is reported as a structure
    anomaly, not an error.
    """
    eta = eta if eta is not None else default_eta(potential)
    cap = max_eta(potential)
    if eta > cap:
        raise PreconditionError(f"eta={eta:.3g} exceeds the measured convexity threshold {cap:.3g}")
    dmin, labels = nearest_well_distance(potential, path.samples)
    if dmin[0] > eta or dmin[-1] > eta:
        raise PreconditionError(
            f"path endpoints must start and end within eta={eta:.3g} of a well "
            f"(distances {dmin[0]:.3g}, {dmin[-1]:.3g})"
        )
    n = path.n
    t = path.t
    excited = dmin > eta
    # maximal runs of the excursion set
    runs = []
    k = 0
    while k < n:
        if excited[k]:
            j = k
            while j + 1 < n and excited[j + 1]:
                j += 1
            runs.append((k, j))
            k = j + 1
        else:
            k += 1
    trans_runs = [(i, j) for (i, j) in runs if np.max(dmin[i : j + 1]) > 4.0 * eta]

    # plateaus tile the complement; adjacent intervals share boundary nodes
    # but not segments, so interval energies add up to the total exactly
    anomalies: list[str] = []
    plateaus = []
    transitions = []
    prev_end = 0
    for (i, j) in trans_runs:
        lab = _plateau_label(dmin, labels, prev_end, i, eta, anomalies)
        plateaus.append(
            Interval("plateau", prev_end, i, t[prev_end], t[i], lab, energy_1d(potential, path, prev_end, i))
        )
        transitions.append(
            Interval("transition", i, j, t[i], t[j], None, energy_1d(potential, path, i, j))
        )
        prev_end = j
    lab = _plateau_label(dmin, labels, prev_end, n - 1, eta, anomalies)
    plateaus.append(
        Interval("plateau", prev_end, n - 1, t[prev_end], t[n - 1], lab, energy_1d(potential, path, prev_end, n - 1))
    )

    seq = [p.label for p in plateaus]
    if len(set(seq)) != len(seq):
        anomalies.append(f"well label repeats in plateau sequence {seq}")
    return TransitionDecomposition(
        plateaus=tuple(plateaus),
        transitions=tuple(transitions),
        eta=eta,
        anomalies=tuple(anomalies),
        total_energy=energy_1d(potential, path),
    )


def _plateau_label(dmin, labels, i0, i1, eta, anomalies) -> int:
    l0, l1 = labels[i0], labels[i1]
    if l0 != l1:
        anomalies.append(f"plateau [{i0},{i1}] endpoint labels differ ({l0} vs {l1})")
    k = i0 + int(np.argmin(dmin[i0 : i1 + 1]))
    return int(labels[k])


# ---------------------------------------------------------------------------
# H1 comparison machinery
# ---------------------------------------------------------------------------

def _path_derivative(path: Path1D) -> np.ndarray:
    f = path.samples
    h = path.h
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d[0] = (f[1] - f[0]) / h
    d[-1] = (f[-1] - f[-2]) / h
    return d


def _profile_interpolants(profile: HeteroclinicProfile):
    t = profile.path.t
    f = profile.path.samples
    d = _path_derivative(profile.path)

    def value(tq):
        return np.stack([np.interp(tq, t, f[:, 0]), np.interp(tq, t, f[:, 1])], axis=-1)

    def deriv(tq):
        # derivative extended by zero beyond the support (profile constant)
        out = np.stack([np.interp(tq, t, d[:, 0]), np.interp(tq, t, d[:, 1])], axis=-1)
        out[(tq < t[0]) | (tq > t[-1])] = 0.0
        return out

    return value, deriv


def h1_sq_distance(
    path: Path1D,
    profile: HeteroclinicProfile,
    shift: float,
    t_lo: float | None = None,
    t_hi: float | None = None,
) -> float:
    """Squared discrete H1 distance between the path and the profile shifted
    by ``shift`` (compared at path sample points t via profile(t - shift)),
    restricted to the absolute parameter window [t_lo, t_hi].

    The profile is extended by its constant well values outside its support.
    """
    t = path.t
    lo = t[0] if t_lo is None else t_lo
    hi = t[-1] if t_hi is None else t_hi
    keep = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if np.sum(keep) < 2:
        return 0.0
    value, deriv = _profile_interpolants(profile)
    tq = t[keep] - shift
    df = path.samples[keep] - value(tq)
    dd = _path_derivative(path)[keep] - deriv(tq)
    w = np.ones(int(np.sum(keep)))
    w[0] = w[-1] = 0.5
    return float(path.h * np.sum(w * (np.sum(df * df, axis=1) + np.sum(dd * dd, axis=1))))


def _best_grid_shift(path, profile, shift0, t_lo, t_hi, span: float = 4.0):
    h = path.h
    K = max(1, int(round(span / h)))
    shifts = shift0 + h * np.arange(-K, K + 1)
    vals = np.array([h1_sq_distance(path, profile, s, t_lo, t_hi) for s in shifts])
    k = int(np.argmin(vals))
    return float(shifts[k]), float(vals[k])


# ---------------------------------------------------------------------------
# Split location
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPoints:
    a: float
    T: float
    b: float
    h1_dist_12: float
    h1_dist_23: float
    p2_gap: float
    h1_dist_12_shifted_window: float
    h1_dist_23_shifted_window: float
    separation: float
    separation_constant: float
    gamma: float


def _energy_median(potential: Potential, path: Path1D, iv: Interval) -> float:
    """Parameter where the cumulative interval energy reaches half its total."""
    e = energy_density(potential, path)[iv.i0 : iv.i1 + 1]
    seg = 0.5 * (e[1:] + e[:-1]) * path.h
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    half = 0.5 * cum[-1]
    k = int(np.searchsorted(cum, half))
    k = min(max(k, 1), len(cum) - 1)
    frac = (half - cum[k - 1]) / max(cum[k] - cum[k - 1], 1e-300)
    return path.t[iv.i0 + k - 1] + frac * path.h


def locate_split(
    potential: Potential,
    path: Path1D,
    eta: float | None = None,
    profiles: tuple[HeteroclinicProfile, HeteroclinicProfile] | None = None,
    d13: float | None = None,
) -> SplitPoints:
    """Locate the two walls and the middle resting parameter of a 1 -> 2 -> 3
    path.

    The representative parameters a, b start at the energy median of each
    transition interval and are refined by minimizing the discrete H1 distance
    to the corresponding wall profile over grid shifts; T is the leftmost
    minimizer of |f(t) - p2| over the middle plateau.  H1 distances are
    reported on the absolute windows [-R/2, T] and [T, R/2] (primary) and on
    the same windows in the shifted variable (secondary), since the window
    convention is not canonical.
    """
    decomp = transition_decomposition(potential, path, eta)
    labels = decomp.plateau_labels()
    if len(decomp.transitions) != 2 or labels != (1, 2, 3):
        raise StructureError(
            f"need exactly 2 transitions with plateau sequence (1, 2, 3); found "
            f"{len(decomp.transitions)} transitions with plateaus {labels}"
        )
    if profiles is None:
        profiles = (solve_heteroclinic(potential, 1, 2), solve_heteroclinic(potential, 2, 3))
    z12, z23 = profiles
    # half-width of the parameter interval; comparison windows span its middle
    # half on each side of T
    R = 0.5 * (path.t_end - path.t_start)
    win_lo = path.t_start + R / 2.0
    win_hi = path.t_end - R / 2.0
    p2 = potential.well(2).position

    mid = sorted(decomp.plateaus, key=lambda iv: iv.i0)[1]
    gaps = np.linalg.norm(path.samples[mid.i0 : mid.i1 + 1] - p2, axis=1)
    kT = mid.i0 + int(np.argmin(gaps))  # argmin is leftmost on ties
    T = float(path.t[kT])
    p2_gap = float(gaps[kT - mid.i0])

    a0 = _energy_median(potential, path, decomp.transitions[0])
    b0 = _energy_median(potential, path, decomp.transitions[1])
    a, h1_12 = _best_grid_shift(path, z12, a0, win_lo, T)
    b, h1_23 = _best_grid_shift(path, z23, b0, T, win_hi)
    if not a < T < b:
        raise StructureError(f"recovered ordering violated: a={a}, T={T}, b={b}")

    # secondary convention: same windows read in the shifted variable
    center = path.t_start + R
    h1_12_s = h1_sq_distance(path, z12, a, a - R / 2.0, a + (T - center))
    h1_23_s = h1_sq_distance(path, z23, b, b + (T - center), b + R / 2.0)

    if d13 is None:
        p1 = potential.well(1).position
        p3 = potential.well(3).position
        d13 = degenerate_distance(potential, p1, p3).value
    gamma = max(energy_1d(potential, path) - d13, 1e-300)
    separation = float(min(T - a, b - T))
    denom = min(abs(np.log(gamma)), R)
    return SplitPoints(
        a=float(a),
        T=T,
        b=float(b),
        h1_dist_12=float(h1_12),
        h1_dist_23=float(h1_23),
        p2_gap=p2_gap,
        h1_dist_12_shifted_window=float(h1_12_s),
        h1_dist_23_shifted_window=float(h1_23_s),
        separation=separation,
        separation_constant=float(separation / denom) if denom > 0 else float("inf"),
        gamma=float(gamma),
    )


# ---------------------------------------------------------------------------
# End-well lower bound
# ---------------------------------------------------------------------------

def pinned_start_minimize(
    potential: Potential,
    start,
    well: Well,
    R: float,
    n: int | None = None,
    tol_grad: float = 1e-10,
) -> Path1D:
    """Discrete minimizer on [0, R] with only the start pinned; the free end
    relaxes toward the well."""
    start = np.asarray(start, dtype=float)
    if n is None:
        n = int(round(R / 0.01)) + 1
    t = np.linspace(0.0, R, n)
    lam = np.exp(-np.sqrt(well.hessian_eigenvalues[0]) * t)
    init = Path1D(0.0, R, well.position[None, :] + lam[:, None] * (start - well.position)[None, :])
    path, converged, gnorm = minimize_path_energy(
        potential, init, pin_left=start, tol_grad=tol_grad, max_iters=4000
    )
    if not converged:
        raise PreconditionError(f"pinned-start solve stalled at gradient norm {gnorm:.2e}")
    return path


def lower_bound_endwell(
    potential: Potential,
    path: Path1D,
    well: Well,
    amplitude: float = 1.0,
    rate: float | None = None,
) -> tuple[float, float, float]:
    """Energy of a path on [0, R] anchored near a well, against the bound
    d(well, path(0)) - amplitude * exp(-rate * R).

    Returns (energy, bound, slack = energy - bound).  The (amplitude, rate)
    constants are empirical; the default rate is twice the slowest linear rate
    at the well, the decay the discrete minimizer itself exhibits.
    """
    eta_cap = max_eta(potential)
    d0 = well_distance(potential, path.samples[0], well)
    if d0 > eta_cap:
        raise PreconditionError(
            f"start point at degenerate distance {d0:.3g} from the well exceeds the "
            f"convexity threshold {eta_cap:.3g}"
        )
    if rate is None:
        rate = 2.0 * np.sqrt(well.hessian_eigenvalues[0])
    R = path.t_end - path.t_start
    energy = energy_1d(potential, path)
    d_exact = degenerate_distance(potential, well.position, path.samples[0]).value
    bound = d_exact - amplitude * np.exp(-rate * R)
    return energy, float(bound), float(energy - bound)


# ---------------------------------------------------------------------------
# Interior-well lower bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteriorWellReport:
    energy: float
    endpoint_distances: tuple[float, float]
    min_gap: float
    min_gap_sq: float
    excess: float


def interior_well_bound(
    potential: Potential,
    path: Path1D,
    eta: float,
    eps: float,
    well: Well | None = None,
) -> InteriorWellReport:
    """Measure the energy of a path crossing the middle well region against
    the sum of its endpoint distances.

    Preconditions (named on failure): both endpoints at degenerate distance
    ~eta from the well, on opposite sides along the small-eigenvalue axis,
    with transverse offsets bounded by eps times the axis offsets.
    """
    well = well or potential.well(2)
    V = well.hessian_eigenvectors
    a = V.T @ (path.samples[0] - well.position)
    b = V.T @ (path.samples[-1] - well.position)
    d_a = float(well_distance(potential, path.samples[0], well))
    d_b = float(well_distance(potential, path.samples[-1], well))
    for name, d in (("left", d_a), ("right", d_b)):
        if abs(d - eta) > 0.25 * eta:
            raise PreconditionError(f"{name} endpoint distance {d:.3g} is not ~eta={eta:.3g}")
    if not (a[0] < 0.0 < b[0]):
        raise PreconditionError(
            f"endpoints must lie on opposite sides of the well along its slow axis "
            f"(a1={a[0]:.3g}, b1={b[0]:.3g})"
        )
    if abs(a[1]) > eps * abs(a[0]) or abs(b[1]) > eps * abs(b[0]):
        raise PreconditionError(
            f"transverse eccentricity exceeded: |a2|={abs(a[1]):.3g} vs eps*|a1|="
            f"{eps * abs(a[0]):.3g}, |b2|={abs(b[1]):.3g} vs eps*|b1|={eps * abs(b[0]):.3g}"
        )
    gaps = np.linalg.norm(path.samples - well.position, axis=1)
    gmin = float(np.min(gaps))
    energy = energy_1d(potential, path)
    return InteriorWellReport(
        energy=energy,
        endpoint_distances=(d_a, d_b),
        min_gap=gmin,
        min_gap_sq=gmin * gmin,
        excess=float(energy - (d_a + d_b)),
    )


def axis_point_at_distance(potential: Potential, well: Well, direction, eta: float) -> np.ndarray:
    """Point along ``direction`` from the well at degenerate distance eta."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)

    def g(r):
        return well_distance(potential, well.position + r * direction, well) - eta

    r_hi = 0.05
    while g(r_hi) < 0.0 and r_hi < 100.0:
        r_hi *= 2.0
    r = scipy.optimize.brentq(g, 0.0, r_hi, xtol=1e-12)
    return well.position + r * direction


def quadratic_penalty_fit(
    potential: Potential,
    eta: float,
    deltas,
    R: float = 10.0,
    n: int = 2001,
    well: Well | None = None,
) -> tuple[float, float, np.ndarray]:
    """Fit of the excess energy of paths forced to clear the middle well.

    For each offset delta, the 1D energy is minimized on [-R, R] with the
    endpoints pinned at degenerate distance eta on opposite sides of the well
    along its slow axis and the middle sample pinned at the point offset by
    delta along the fast axis.  Returns (c, r_squared, excesses) for the
    through-origin fit excess ~ c * delta^2.
    """
    well = well or potential.well(2)
    e1 = well.hessian_eigenvectors[:, 0]
    e2 = well.hessian_eigenvectors[:, 1]
    a = axis_point_at_distance(potential, well, -e1, eta)
    b = axis_point_at_distance(potential, well, e1, eta)
    d_a = degenerate_distance(potential, well.position, a).value
    d_b = degenerate_distance(potential, well.position, b).value
    deltas = np.asarray(deltas, dtype=float)
    excesses = np.empty_like(deltas)
    t = np.linspace(-R, R, n)
    mid_idx = n // 2
    for k, d in enumerate(deltas):
        pin = well.position + d * e2
        lam = 0.5 * (1.0 + np.tanh(t))
        init = a[None, :] + lam[:, None] * (b - a)[None, :]
        init[mid_idx] = pin
        path, _, _ = minimize_path_energy(
            potential,
            Path1D(-R, R, init),
            pin_left=a,
            pin_right=b,
            pin_nodes={mid_idx: pin},
            tol_grad=1e-9,
        )
        excesses[k] = energy_1d(potential, path) - (d_a + d_b)
    x = deltas**2
    c = float(np.sum(excesses * x) / np.sum(x * x))
    ss_res = float(np.sum((excesses - c * x) ** 2))
    ss_tot = float(np.sum((excesses - np.mean(excesses)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return c, r2, excesses


# ---------------------------------------------------------------------------
# Stability ratio
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityGap:
    best_shift: float
    h1_sq_distance: float
    energy_excess: float
    ratio: float


def schatzman_gap(
    potential: Potential,
    candidate: Path1D,
    reference: HeteroclinicProfile,
    beta: float = 0.5,
    shift_span: float = 6.0,
) -> StabilityGap:
    """Ratio of the squared H1 distance to the best translate of a wall
    profile over the energy excess of the candidate.

    The shift is optimized by a coarse scan followed by golden-section
    refinement.  Fails the precondition when no shift brings the H1 norm
    within ``beta``.
    """
    def obj(s):
        return h1_sq_distance(candidate, reference, s)

    coarse = np.linspace(-shift_span, shift_span, 49)
    vals = np.array([obj(s) for s in coarse])
    k = int(np.argmin(vals))
    lo = coarse[max(k - 1, 0)]
    hi = coarse[min(k + 1, len(coarse) - 1)]
    res = scipy.optimize.minimize_scalar(obj, bracket=None, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    best_shift = float(res.x)
    h1_sq = float(res.fun)
    if np.sqrt(h1_sq) > beta:
        raise PreconditionError(
            f"no shift brings the H1 distance ({np.sqrt(h1_sq):.3g}) within beta={beta}"
        )
    excess = energy_1d(potential, candidate) - reference.connection_energy
    return StabilityGap(
        best_shift=best_shift,
        h1_sq_distance=h1_sq,
        energy_excess=float(excess),
        ratio=float(h1_sq / max(excess, 1e-14)),
    )
