"""Masked-grid fields on a disk and their energies.

Fields live on an ambient square grid [-R, R]^2; the disk mask and all
quadrature weights use exact circle-cell intersection areas, so the measured
energies are second-order accurate for Lipschitz fields.  Two discrete
functionals coexist by design:

* :func:`energy_2d` is the *measurement* rule: centered/one-sided nodal
  differences, nodal potential quadrature, exact in-disk node weights.
* the edge-based functional in :mod:`.minimize` is the *descent* rule; its
  kinetic term couples nearest neighbours and is therefore coercive against
  the node-alternating wiggles the centered rule cannot see.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..potential import Potential


# ---------------------------------------------------------------------------
# Exact circle-cell areas
# ---------------------------------------------------------------------------

def _disk_cdf(R: float, a: float, b: float) -> float:
    """Area of the disk of radius R intersected with {x <= a, y <= b}."""
    if a <= -R or b <= -R:
        return 0.0
    a = min(a, R)

    def I(x):
        x = np.clip(x, -R, R)
        return 0.5 * (x * np.sqrt(max(R * R - x * x, 0.0)) + R * R * np.arcsin(np.clip(x / R, -1.0, 1.0)))

    def J(absb, lo, hi):
        # integral over [lo, hi] of min(absb, sqrt(R^2 - x^2))
        if hi <= lo:
            return 0.0
        xb = np.sqrt(max(R * R - absb * absb, 0.0))
        out = 0.0
        mid_lo, mid_hi = max(lo, -xb), min(hi, xb)
        if mid_hi > mid_lo:
            out += absb * (mid_hi - mid_lo)
        l_hi = min(hi, -xb)
        if l_hi > lo:
            out += I(l_hi) - I(lo)
        r_lo = max(lo, xb)
        if hi > r_lo:
            out += I(hi) - I(r_lo)
        return out

    half = I(a) - I(-R)  # integral of the column half-height sqrt(R^2-x^2)
    if b >= 0.0:
        return half + J(min(b, R), -R, a)
    return half - J(min(-b, R), -R, a)


def cell_area_fractions(R: float, xs: np.ndarray) -> np.ndarray:
    """(n-1, n-1) in-disk area fraction of every grid cell, exact on the ring.

    xs are the node coordinates (shared by both axes); cell (i, j) spans
    [xs[i], xs[i+1]] x [xs[j], xs[j+1]].
    """
    n = xs.size
    h = xs[1] - xs[0]
    cx = 0.5 * (xs[1:] + xs[:-1])
    CX, CY = np.meshgrid(cx, cx, indexing="ij")
    rad = np.sqrt(CX * CX + CY * CY)
    half_diag = h / np.sqrt(2.0)
    frac = np.zeros((n - 1, n - 1))
    frac[rad + half_diag <= R] = 1.0
    ring = (rad + half_diag > R) & (rad - half_diag < R)
    idx = np.argwhere(ring)
    for i, j in idx:
        x0, x1 = xs[i], xs[i + 1]
        y0, y1 = xs[j], xs[j + 1]
        area = (
            _disk_cdf(R, x1, y1)
            - _disk_cdf(R, x0, y1)
            - _disk_cdf(R, x1, y0)
            + _disk_cdf(R, x0, y0)
        )
        frac[i, j] = max(min(area / (h * h), 1.0), 0.0)
    return frac


# ---------------------------------------------------------------------------
# Boundary traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryTrace:
    """Samples of a map on the circle of radius R at uniform angles.

    theta_k = -pi + 2 pi k / m for k = 0..m-1; the arclength variable is
    s = R * theta with theta in (-pi, pi].
    """

    R: float
    samples: np.ndarray  # (m, 2)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 8:
            raise DomainError(f"trace samples must be (m>=8, 2), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise DomainError("trace samples must be finite")

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def thetas(self) -> np.ndarray:
        return -np.pi + 2.0 * np.pi * np.arange(self.m) / self.m

    def at(self, theta) -> np.ndarray:
        """Periodic linear interpolation at arbitrary angles."""
        th = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi)  # in [0, 2pi)
        pos = th * self.m / (2.0 * np.pi)
        k0 = np.floor(pos).astype(int) % self.m
        k1 = (k0 + 1) % self.m
        lam = (pos - np.floor(pos))[..., None]
        return (1.0 - lam) * self.samples[k0] + lam * self.samples[k1]

    def energy(self, potential: Potential) -> float:
        """1D transition energy along the closed circle (arclength measure)."""
        ds = self.R * 2.0 * np.pi / self.m
        u = self.samples
        du = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2.0 * ds)
        e = 0.5 * np.sum(du * du, axis=1) + potential.w(u)
        return float(np.sum(e) * ds)

    def half_path(self, upper: bool, n: int | None = None):
        """Restriction to a half circle as a Path1D in the arclength variable:
        s in [0, pi R] (upper) or [-pi R, 0] (lower)."""
        from ..metric import Path1D

        if n is None:
            n = self.m // 2 + 1
        if upper:
            s = np.linspace(0.0, np.pi * self.R, n)
        else:
            s = np.linspace(-np.pi * self.R, 0.0, n)
        vals = self.at(s / self.R)
        return Path1D(s[0], s[-1], vals)

    def closed_ring(self, spacing: float) -> np.ndarray:
        """Ordered closed polyline (first = last) on the circle at arclength
        spacing ~ ``spacing``."""
        m = max(8, int(round(2.0 * np.pi * self.R / spacing)))
        th = -np.pi + 2.0 * np.pi * np.arange(m + 1) / m
        return self.at(th)


def trace_from_function(R: float, fn, m: int) -> BoundaryTrace:
    th = -np.pi + 2.0 * np.pi * np.arange(m) / m
    pts = R * np.stack([np.cos(th), np.sin(th)], axis=-1)
    return BoundaryTrace(R, np.asarray(fn(pts), dtype=float))


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass
class Field2D:
    """A map from the disk B_R into the target plane on an ambient grid.

    values[i, j] is the value at (xs[i], xs[j]); the mask marks in-disk nodes.
    Geometry arrays (cell fractions, node weights) are derived lazily and
    shared by the energy and descent rules.
    """

    R: float
    h: float
    values: np.ndarray  # (n, n, 2)
    trace: BoundaryTrace
    _geom: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = v.shape[0]
        if v.shape != (n, n, 2):
            raise DomainError(f"values must be (n, n, 2), got {v.shape}")
        expected = int(round(2.0 * self.R / self.h)) + 1
        if n != expected:
            raise DomainError(f"grid size {n} inconsistent with R={self.R}, h={self.h} (expected {expected})")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.n)

    @property
    def mask(self) -> np.ndarray:
        if "mask" not in self._geom:
            xs = self.xs
            X, Y = np.meshgrid(xs, xs, indexing="ij")
            self._geom["mask"] = X * X + Y * Y <= self.R * self.R + 1e-12
        return self._geom["mask"]

    @property
    def cell_fractions(self) -> np.ndarray:
        if "cells" not in self._geom:
            self._geom["cells"] = cell_area_fractions(self.R, self.xs)
        return self._geom["cells"]

    @property
    def node_weights(self) -> np.ndarray:
        """Per-node quadrature weight (units of area): quarter of each adjacent
        in-disk cell area."""
        if "nodew" not in self._geom:
            A = self.cell_fractions * (self.h * self.h)
            n = self.n
            w = np.zeros((n, n))
            q = 0.25 * A
            w[:-1, :-1] += q
            w[1:, :-1] += q
            w[:-1, 1:] += q
            w[1:, 1:] += q
            self._geom["nodew"] = w
        return self._geom["nodew"]

    @property
    def boundary_ring(self) -> np.ndarray:
        """Closed trace polyline at arclength spacing ~ h (first = last)."""
        return self.trace.closed_ring(self.h)

    def sample(self, points) -> np.ndarray:
        """Bilinear sampling of the field at arbitrary in-square points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        g = (pts + self.R) / self.h
        i = np.clip(np.floor(g[:, 0]).astype(int), 0, self.n - 2)
        j = np.clip(np.floor(g[:, 1]).astype(int), 0, self.n - 2)
        fx = np.clip(g[:, 0] - i, 0.0, 1.0)[:, None]
        fy = np.clip(g[:, 1] - j, 0.0, 1.0)[:, None]
        v = self.values
        out = (
            v[i, j] * (1 - fx) * (1 - fy)
            + v[i + 1, j] * fx * (1 - fy)
            + v[i, j + 1] * (1 - fx) * fy
            + v[i + 1, j + 1] * fx * fy
        )
        return out if np.asarray(points).ndim == 2 else out[0]


def field_from_function(R: float, h: float, fn, trace: BoundaryTrace | None = None) -> Field2D:
    """Rasterize a vectorized map (pts -> values) on the ambient grid; the
    trace defaults to the function's own restriction to the circle."""
    n = int(round(2.0 * R / h)) + 1
    xs = np.linspace(-R, R, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    vals = np.asarray(fn(pts.reshape(-1, 2)), dtype=float).reshape(n, n, 2)
    if trace is None:
        m = max(64, int(round(2.0 * np.pi * R / h)))
        trace = trace_from_function(R, fn, m)
    return Field2D(R=R, h=h, values=vals, trace=trace)


# ---------------------------------------------------------------------------
# Energy measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    total: float
    gradient_part: float
    potential_part: float
    regions: dict | None = None


def _nodal_gradient(field: Field2D) -> np.ndarray:
    """(n, n, 2, 2) nodal derivative d u_c / d x_a: centered where both
    neighbours are in the disk, one-sided toward the inside otherwise."""
    u = field.values
    m = field.mask
    h = field.h
    n = field.n
    grad = np.zeros((n, n, 2, 2))
    for axis in range(2):
        # neighbour availability without wraparound
        up = np.zeros_like(m)
        dn = np.zeros_like(m)
        u_up = np.zeros_like(u)
        u_dn = np.zeros_like(u)
        if axis == 0:
            up[:-1, :] = m[1:, :]
            dn[1:, :] = m[:-1, :]
            u_up[:-1] = u[1:]
            u_dn[1:] = u[:-1]
        else:
            up[:, :-1] = m[:, 1:]
            dn[:, 1:] = m[:, :-1]
            u_up[:, :-1] = u[:, 1:]
            u_dn[:, 1:] = u[:, :-1]
        cen = m & up & dn
        fwd = m & up & ~dn
        bwd = m & dn & ~up
        out = np.zeros_like(u)
        out[cen] = (u_up[cen] - u_dn[cen]) / (2.0 * h)
        out[fwd] = (u_up[fwd] - u[fwd]) / h
        out[bwd] = (u[bwd] - u_dn[bwd]) / h
        grad[:, :, :, axis] = out
    return grad


def energy_2d(potential: Potential, field: Field2D, region_masks: dict | None = None) -> EnergyReport:
    """Total transition energy of the field over the disk.

    Gradient term from nodal centered/one-sided differences, potential term by
    nodal quadrature, both weighted by exact in-disk node areas.  Optional
    region masks (boolean node arrays) give a per-region breakdown.
    """
    w = field.node_weights
    grad = _nodal_gradient(field)
    gsq = np.sum(grad * grad, axis=(2, 3))
    Wv = potential.w(field.values)
    dens_g = 0.5 * gsq
    g_part = float(np.sum(w * dens_g))
    p_part = float(np.sum(w * Wv))
    regions = None
    if region_masks:
        regions = {}
        for name, mask in region_masks.items():
            regions[name] = float(np.sum(w[mask] * (dens_g[mask] + Wv[mask])))
    return EnergyReport(total=g_part + p_part, gradient_part=g_part, potential_part=p_part, regions=regions)


# ---------------------------------------------------------------------------
# Rectangle energies and the rescaled functional
# ---------------------------------------------------------------------------

def _rect_cell_weights(field: Field2D, rect) -> np.ndarray:
    """(n-1, n-1) overlap area of each grid cell with the rectangle."""
    x0, x1, y0, y1 = rect
    xs = field.xs
    lo = xs[:-1]
    hi = xs[1:]
    ox = np.clip(np.minimum(hi, x1) - np.maximum(lo, x0), 0.0, None)
    oy = np.clip(np.minimum(hi, y1) - np.maximum(lo, y0), 0.0, None)
    return ox[:, None] * oy[None, :]


def _cell_energy_terms(potential: Potential, field: Field2D):
    """Cell-centered (grad^2, W) terms from the four corners of each cell."""
    u = field.values
    h = field.h
    dx = ((u[1:, :-1] - u[:-1, :-1]) + (u[1:, 1:] - u[:-1, 1:])) / (2.0 * h)
    dy = ((u[:-1, 1:] - u[:-1, :-1]) + (u[1:, 1:] - u[1:, :-1])) / (2.0 * h)
    gsq = np.sum(dx * dx + dy * dy, axis=-1)
    ubar = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])
    Wv = potential.w(ubar)
    return gsq, Wv


def energy_rect(potential: Potential, field: Field2D, rect) -> float:
    """Transition energy over an axis-aligned rectangle (parent coordinates),
    cell-based quadrature with exact partial-cell overlap weights."""
    gsq, Wv = _cell_energy_terms(potential, field)
    wts = _rect_cell_weights(field, rect)
    return float(np.sum(wts * (0.5 * gsq + Wv)))


def rescaled_energy(potential: Potential, field: Field2D, R_scale: float, omega) -> float:
    """The rescaled functional of the blowdown u(R_scale * .) over the
    rectangle ``omega`` (blowdown coordinates): gradient term weighted by
    1/(2 R_scale), potential term by R_scale.

    Satisfies E(u, R_scale*omega) = R_scale * E_R exactly up to floating-point
    bookkeeping.
    """
    x0, x1, y0, y1 = omega
    rect = (R_scale * x0, R_scale * x1, R_scale * y0, R_scale * y1)
    # the rectangle must stay inside the disk (and grid)
    corners = np.array([[rect[0], rect[2]], [rect[0], rect[3]], [rect[1], rect[2]], [rect[1], rect[3]]])
    if np.any(np.linalg.norm(corners, axis=1) > field.R + 1e-12):
        raise DomainError(f"rescaled window {rect} escapes the disk of radius {field.R}")
    gsq, Wv = _cell_energy_terms(potential, field)
    wts = _rect_cell_weights(field, rect) / (R_scale * R_scale)  # blowdown-frame cell areas
    # blowdown-frame gradient magnitude picks up a factor R_scale
    term_g = np.sum(wts * (0.5 / R_scale) * (R_scale * R_scale) * gsq)
    term_w = np.sum(wts * R_scale * Wv)
    return float(term_g + term_w)


# ---------------------------------------------------------------------------
# Sharp-interface energy and blowdown classification
# ---------------------------------------------------------------------------

def _clip_segment_rect(p0, p1, rect):
    """Liang-Barsky clip; returns clipped (q0, q1) or None."""
    x0, x1, y0, y1 = rect
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, x0, x1), (1, y0, y1)):
        if abs(d[coord]) < 1e-300:
            if p0[coord] < lo or p0[coord] > hi:
                return None
            continue
        ta = (lo - p0[coord]) / d[coord]
        tb = (hi - p0[coord]) / d[coord]
        ta, tb = min(ta, tb), max(ta, tb)
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return p0 + t0 * d, p0 + t1 * d


def _clip_segment_disk(p0, p1, R):
    d = p1 - p0
    a = float(np.dot(d, d))
    if a < 1e-300:
        return None
    b = 2.0 * float(np.dot(p0, d))
    c = float(np.dot(p0, p0)) - R * R
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return None
    ta = (-b - np.sqrt(disc)) / (2.0 * a)
    tb = (-b + np.sqrt(disc)) / (2.0 * a)
    t0, t1 = max(0.0, ta), min(1.0, tb)
    if t0 >= t1:
        return None
    return p0 + t0 * d, p0 + t1 * d


def sharp_energy(distances: dict, geometry: list, omega) -> float:
    """Sharp-interface energy: sum of d_ij * length(segment inside omega).

    ``distances`` maps pair labels like (1, 2) (or "12") to well-to-well
    distances; ``geometry`` is a list of (pair, (p_start, p_end)); ``omega``
    is ("disk", R) or ("rect", (x0, x1, y0, y1)).
    """
    total = 0.0
    for pair, seg in geometry:
        key = pair
        if isinstance(pair, str):
            key = (int(pair[0]), int(pair[1]))
        key = tuple(sorted(key))
        if key not in _normalize_distances(distances):
            raise KeyError(f"unknown well pair {pair!r}")
        dij = _normalize_distances(distances)[key]
        p0 = np.asarray(seg[0], dtype=float)
        p1 = np.asarray(seg[1], dtype=float)
        if omega[0] == "disk":
            clipped = _clip_segment_disk(p0, p1, float(omega[1]))
        elif omega[0] == "rect":
            clipped = _clip_segment_rect(p0, p1, omega[1])
        else:
            raise DomainError(f"unknown region kind {omega[0]!r}")
        if clipped is not None:
            total += dij * float(np.linalg.norm(clipped[1] - clipped[0]))
    return total


def _normalize_distances(distances: dict) -> dict:
    out = {}
    for k, v in distances.items():
        if isinstance(k, str):
            k = (int(k[0]), int(k[1]))
        out[tuple(sorted(k))] = float(v)
    return out


def blowdown_distance(
    potential: Potential,
    field: Field2D,
    R_scale: float,
    templates=("H12", "H23", "H13"),
    coarse_step_deg: float = 1.0,
    refine_step_deg: float = 0.05,
) -> tuple[str, float, float]:
    """Classify the blowdown u(R_scale * .) against rotated two-phase half
    plane maps by L1 distance on the unit disk.

    Returns (best template name, best rotation in degrees, L1 distance).
    The blowdown is sampled at the parent grid nodes inside B_{R_scale}, so a
    rasterized template at R_scale = R is recovered with zero distance.
    """
    if R_scale > field.R + 1e-12:
        raise DomainError(f"R_scale={R_scale} exceeds the field radius {field.R}")
    xs = field.xs
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    keep = X * X + Y * Y <= R_scale * R_scale
    pts_hat = np.stack([X[keep], Y[keep]], axis=-1) / R_scale
    vals = field.values[keep]
    w_hat = (field.h / R_scale) ** 2  # nodal weight in blowdown coordinates

    best = None
    for name in templates:
        i, j = int(name[1]), int(name[2])
        p_i = potential.well(i).position
        p_j = potential.well(j).position

        def l1(phi_deg):
            phi = np.deg2rad(phi_deg)
            normal = np.array([np.cos(phi), np.sin(phi)])
            side = pts_hat @ normal
            tmpl = np.where(side[:, None] < 0.0, p_i[None, :], p_j[None, :])
            return float(np.sum(np.linalg.norm(vals - tmpl, axis=1)) * w_hat)

        coarse = np.arange(-180.0, 180.0, coarse_step_deg)
        cv = np.array([l1(p) for p in coarse])
        k = int(np.argmin(cv))
        fine = coarse[k] + np.arange(-coarse_step_deg, coarse_step_deg + 1e-9, refine_step_deg)
        fv = np.array([l1(p) for p in fine])
        kf = int(np.argmin(fv))
        cand = (name, float(fine[kf]), float(fv[kf]))
        if best is None or cand[2] < best[2]:
            best = cand
    return best
