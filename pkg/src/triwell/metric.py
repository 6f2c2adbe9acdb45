"""The degenerate well metric: path actions, distances, geodesics.

The distance between target points weights Euclidean length by sqrt(2 W), so
it vanishes quadratically at the wells.  Distances are computed by a string
method: descent on the discrete action of a pinned polyline, alternated with
uniform-arclength reparametrization.  Convergence is certified on the normal
component of the action gradient (the tangential component is a discrete
remnant of parametrization freedom and is controlled by the reparametrization
step instead).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, PreconditionError
from .potential import Potential, Well

log = logging.getLogger(__name__)

_W_GUARD = 1e-300  # below this, treat sqrt(W)' as 0 (node sits on a well)


@dataclass(frozen=True)
class Path1D:
    """A uniformly sampled curve in the target plane on [t_start, t_end]."""

    t_start: float
    t_end: float
    samples: np.ndarray  # (n, 2)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 2:
            raise DomainError(f"samples must be (n>=2, 2), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise DomainError("path samples must be finite")
        if not self.t_end > self.t_start:
            raise DomainError("need t_end > t_start")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / (self.n - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n)

    def at(self, t) -> np.ndarray:
        """Linear interpolation at parameter values t (clamped to the range)."""
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        ts = self.t
        out = np.stack(
            [np.interp(tq, ts, self.samples[:, 0]), np.interp(tq, ts, self.samples[:, 1])],
            axis=-1,
        )
        return out if np.ndim(t) else out[0]

    def reversed(self) -> "Path1D":
        return Path1D(self.t_start, self.t_end, self.samples[::-1].copy())


@dataclass(frozen=True)
class DistanceResult:
    value: float
    path: Path1D
    iterations: int
    converged: bool
    residual: float
    multistart_values: tuple = ()


def path_action(potential: Potential, path: Path1D) -> float:
    """Midpoint quadrature of sqrt(2) * integral of sqrt(W) |gamma'|.

    Reparametrization-invariant up to quadrature error: only segment lengths
    and midpoint values enter.
    """
    x = path.samples
    seg = x[1:] - x[:-1]
    ell = np.linalg.norm(seg, axis=1)
    mid = 0.5 * (x[1:] + x[:-1])
    Wm = np.maximum(potential.w(mid), 0.0)
    return float(np.sqrt(2.0) * np.sum(np.sqrt(Wm) * ell))


def _action_gradient(potential: Potential, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Action and its gradient with respect to every node of the polyline."""
    seg = x[1:] - x[:-1]
    ell = np.linalg.norm(seg, axis=1)
    mid = 0.5 * (x[1:] + x[:-1])
    Wm = np.maximum(potential.w(mid), 0.0)
    sqW = np.sqrt(Wm)
    act = np.sqrt(2.0) * float(np.sum(sqW * ell))

    grad = np.zeros_like(x)
    # length variation: sqrt(W_k) * d|seg_k|
    safe = ell > 1e-300
    that = np.zeros_like(seg)
    that[safe] = seg[safe] / ell[safe, None]
    contrib = sqW[:, None] * that
    grad[:-1] -= contrib
    grad[1:] += contrib
    # potential variation through the midpoint: grad W/(2 sqrt W) * ell / 2 to
    # both segment endpoints; bounded near wells, zero-guarded at them
    gW = potential.grad(mid)
    fac = np.zeros_like(ell)
    ok = Wm > _W_GUARD
    fac[ok] = ell[ok] / (2.0 * sqW[ok])
    half = 0.5 * fac[:, None] * gW
    grad[:-1] += half
    grad[1:] += half
    return act, np.sqrt(2.0) * grad


def _normal_residual(x: np.ndarray, grad: np.ndarray) -> float:
    """Sup over interior nodes of the gradient component normal to the path."""
    if x.shape[0] < 3:
        return 0.0
    tang = x[2:] - x[:-2]
    norms = np.linalg.norm(tang, axis=1)
    safe = norms > 1e-300
    that = np.zeros_like(tang)
    that[safe] = tang[safe] / norms[safe, None]
    g = grad[1:-1]
    g_n = g - np.einsum("ij,ij->i", g, that)[:, None] * that
    return float(np.max(np.linalg.norm(g_n, axis=1)))


def _reparametrize_arclength(x: np.ndarray) -> np.ndarray:
    """Resample a polyline at uniform arclength, endpoints fixed."""
    seg = np.linalg.norm(x[1:] - x[:-1], axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0.0:
        return x.copy()
    target = np.linspace(0.0, total, x.shape[0])
    return np.stack([np.interp(target, s, x[:, 0]), np.interp(target, s, x[:, 1])], axis=-1)


@dataclass(frozen=True)
class DistanceOpts:
    n: int = 129
    max_iters: int = 4000
    tol_grad: float = 1e-6
    multistart: int = 5
    bend_amplitudes: tuple = (0.25, -0.25, 0.5, -0.5)
    inner_steps: int = 25
    atol_same: float = 1e-14


def _string_minimize(potential: Potential, x0: np.ndarray, opts: DistanceOpts):
    """Descent on the polyline action with periodic arclength reparametrization.

    Barzilai-Borwein spectral steps with a backtracking safeguard; the
    reparametrization keeps nodes from sliding tangentially into the wells,
    and convergence is measured on the normal gradient after it.
    """
    x = x0.copy()
    act, grad = _action_gradient(potential, x)
    iters = 0
    residual = np.inf
    step = 0.1
    x_prev = None
    g_prev = None
    while iters < opts.max_iters:
        for _ in range(opts.inner_steps):
            iters += 1
            g_int = grad[1:-1]
            gnorm2 = float(np.sum(g_int * g_int))
            if gnorm2 == 0.0:
                break
            if x_prev is not None:
                dx = (x[1:-1] - x_prev).ravel()
                dg = (g_int - g_prev).ravel()
                dxdg = float(np.dot(dx, dg))
                if dxdg > 1e-300:
                    step = float(np.dot(dx, dx)) / dxdg
                    step = min(max(step, 1e-12), 10.0)
            x_prev = x[1:-1].copy()
            g_prev = g_int.copy()
            while step > 1e-14:
                x_new = x.copy()
                x_new[1:-1] = x[1:-1] - step * g_int
                act_new, grad_new = _action_gradient(potential, x_new)
                if act_new <= act - 1e-4 * step * gnorm2:
                    x, act, grad = x_new, act_new, grad_new
                    break
                step *= 0.5
            if iters >= opts.max_iters:
                break
        x = _reparametrize_arclength(x)
        act, grad = _action_gradient(potential, x)
        x_prev = None  # BB memory is stale after resampling
        residual = _normal_residual(x, grad)
        if residual < opts.tol_grad:
            return x, act, iters, True, residual
    return x, act, iters, False, residual


def degenerate_distance(potential: Potential, p, q, opts: DistanceOpts | None = None) -> DistanceResult:
    """Distance in the sqrt(2W)-weighted metric, with the minimizing polyline.

    Multistart (straight segment plus bent perturbations) takes the least
    local minimum; geodesic non-uniqueness shows up as a spread of the
    reported multistart values, which is recorded but not certified.
    """
    opts = opts or DistanceOpts()
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise DomainError("endpoints must be finite")
    if np.linalg.norm(q - p) < opts.atol_same:
        path = Path1D(0.0, 1.0, np.stack([p, q]))
        return DistanceResult(0.0, path, 0, True, 0.0)

    t = np.linspace(0.0, 1.0, opts.n)[:, None]
    straight = p[None, :] + t * (q - p)[None, :]
    chord = np.linalg.norm(q - p)
    perp = np.array([-(q - p)[1], (q - p)[0]]) / chord
    starts = [straight]
    for amp in opts.bend_amplitudes[: max(0, opts.multistart - 1)]:
        bump = (amp * chord) * np.sin(np.pi * t[:, 0])[:, None] * perp[None, :]
        starts.append(straight + bump)

    best = None
    values = []
    total_iters = 0
    for x0 in starts:
        x, act, iters, ok, res = _string_minimize(potential, x0, opts)
        total_iters += iters
        values.append(act)
        if best is None or act < best[1]:
            best = (x, act, ok, res)
    x, act, ok, res = best
    x[0], x[-1] = p, q  # pinned exactly
    path = Path1D(0.0, 1.0, x)
    return DistanceResult(float(act), path, total_iters, bool(ok), float(res), tuple(values))


def dQ_distance(eigenvalues, eigenvectors, x) -> float:
    """Closed-form distance from a well in its quadratic model.

    ``eigenvalues`` are the model coefficients (lam1, lam2) of
    W ~ lam1 xi1^2 + lam2 xi2^2 in the orthonormal eigenbasis ``eigenvectors``
    (columns); these equal the D2W eigenvalues divided by two.  Returns

        (sqrt(lam1) xi1^2 + sqrt(lam2) xi2^2) / sqrt(2)

    for the displacement ``x``, normalized so it agrees with the
    sqrt(2W)-weighted path distance of the quadratic model (the separable
    eikonal solution; on an eigen-axis it reduces to the 1D quadrature
    sqrt(2) * sqrt(lam) * xi^2 / 2).
    """
    lam1, lam2 = eigenvalues
    if lam1 <= 0.0 or lam2 <= 0.0:
        raise DomainError(f"model eigenvalues must be positive, got ({lam1}, {lam2})")
    V = np.asarray(eigenvectors, dtype=float)
    xi = V.T @ np.asarray(x, dtype=float)
    return float((np.sqrt(lam1) * xi[0] ** 2 + np.sqrt(lam2) * xi[1] ** 2) / np.sqrt(2.0))


def Q_norm(eigenvalues, eigenvectors, x) -> float:
    """sqrt of dQ_distance; a norm on the plane."""
    return float(np.sqrt(dQ_distance(eigenvalues, eigenvectors, x)))


def triangle_defect(potential: Potential, opts: DistanceOpts | None = None) -> float:
    """d(p1,p2) + d(p2,p3) - d(p1,p3); ~0 exactly when the middle well splits
    the outer distance additively."""
    p1, p2, p3 = (potential.well(k).position for k in (1, 2, 3))
    r12 = degenerate_distance(potential, p1, p2, opts)
    r23 = degenerate_distance(potential, p2, p3, opts)
    r13 = degenerate_distance(potential, p1, p3, opts)
    return r12.value + r23.value - r13.value


def well_distance(potential: Potential, points, well: Well, n_quad: int = 33) -> np.ndarray:
    """Chord-action distance from points to a well: the action of the straight
    segment joining each point to the well, by midpoint quadrature.

    An upper bound on the true distance, exact whenever the straight chord is
    a geodesic (radial directions of the builtin families); accurate to
    O(|x - p|^3) inside the convexity region, which is all the threshold tests
    in the 1D structure analysis need.  Vectorized over points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = well.position
    # midpoints of n_quad subsegments for every point: (m, n_quad, 2)
    fr = (np.arange(n_quad) + 0.5) / n_quad
    mids = p[None, None, :] + fr[None, :, None] * (pts - p)[:, None, :]
    sqW = np.sqrt(np.maximum(potential.w(mids), 0.0))
    ell = np.linalg.norm(pts - p, axis=1) / n_quad
    out = np.sqrt(2.0) * np.sum(sqW, axis=1) * ell
    return out if np.asarray(points).ndim == 2 else out[0]


def nearest_well_distance(potential: Potential, points) -> tuple[np.ndarray, np.ndarray]:
    """(distance to the closest well, its label) for every point, using the
    chord-action distance."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dists = np.stack([well_distance(potential, pts, w) for w in potential.wells], axis=-1)
    idx = np.argmin(dists, axis=-1)
    labels = np.array([w.label for w in potential.wells])[idx]
    dmin = np.take_along_axis(dists, idx[:, None], axis=-1)[:, 0]
    if np.asarray(points).ndim == 2:
        return dmin, labels
    return dmin[0], labels[0]


# ---------------------------------------------------------------------------
# Gradient flow toward a well in the distance landscape
# ---------------------------------------------------------------------------

def _grad_distance_to_well(potential: Potential, well: Well, x: np.ndarray, fd_step: float, opts: DistanceOpts) -> np.ndarray:
    """Central differences of local distance solves; the distance function has
    no closed form away from the quadratic regime."""
    g = np.empty(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = fd_step
        dp = degenerate_distance(potential, well.position, x + e, opts).value
        dm = degenerate_distance(potential, well.position, x - e, opts).value
        g[k] = (dp - dm) / (2.0 * fd_step)
    return g


def geodesic_gradient_flow(
    potential: Potential,
    start,
    well: Well,
    T: float,
    dt: float = 0.1,
    fd_step: float = 1e-4,
    opts: DistanceOpts | None = None,
) -> Path1D:
    """Integrate gamma' = -grad d_p(gamma) from a point near the well.

    The start must lie inside the estimated convexity radius.  Near the well
    the flow contracts at rate sqrt(lam1) in the model eigenvalues (D2W/2),
    fastest along the large-eigenvalue direction first.
    """
    from .potential import convexity_radius

    start = np.asarray(start, dtype=float)
    eta = convexity_radius(potential, well)
    if np.linalg.norm(start - well.position) > eta:
        raise PreconditionError(
            f"start {start} outside the estimated convexity radius {eta:.3g} of well p{well.label}"
        )
    opts = opts or DistanceOpts(n=33, max_iters=600, tol_grad=1e-7, multistart=1)
    n_steps = max(1, int(round(T / dt)))
    xs = np.empty((n_steps + 1, 2))
    xs[0] = start
    x = start.copy()
    for k in range(n_steps):
        if np.linalg.norm(x - well.position) < 1e-12:
            xs[k + 1 :] = well.position
            break
        # Heun step
        g1 = _grad_distance_to_well(potential, well, x, fd_step, opts)
        x_pred = x - dt * g1
        g2 = _grad_distance_to_well(potential, well, x_pred, fd_step, opts)
        x = x - 0.5 * dt * (g1 + g2)
        xs[k + 1] = x
    return Path1D(0.0, n_steps * dt, xs)


def fit_decay_exponent(path: Path1D, center) -> tuple[float, float]:
    """Least-squares fit of log|path - center| ~ log A - rate * t, over the
    samples where the distance is resolvable."""
    c = np.asarray(center, dtype=float)
    r = np.linalg.norm(path.samples - c, axis=1)
    keep = r > 1e-13
    t = path.t[keep]
    y = np.log(r[keep])
    A = np.stack([np.ones_like(t), -t], axis=-1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[1]), float(np.exp(coef[0]))
