"""Heteroclinic wall profiles between wells, and their diagnostics.

A wall profile minimizes the 1D transition energy

    E(f) = integral of |f'|^2/2 + W(f)

over curves pinned to two wells at the ends of a long interval.  The solver
minimizes the nearest-neighbour finite-difference energy (segment kinetic term
plus trapezoidal nodal potential) and polishes with damped Newton steps on the
discrete Euler-Lagrange system; the reported energy uses :func:`energy_1d`,
the trapezoidal/central-difference measurement rule shared by all 1D analysis.
The two discretizations agree to quadrature order, but the central-difference
kinetic term is blind to node-alternating wiggles and therefore unusable as a
minimization objective wherever W has concave directions.

Profiles are normalized so that the point at parameter 0 is equidistant (in
the degenerate metric) from the two wells, which removes the translation
invariance of the problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from .errors import PreconditionError, NonConvergenceError
from .metric import Path1D
from .potential import Potential

log = logging.getLogger(__name__)

TOL_MID = 1e-6


# ---------------------------------------------------------------------------
# Measurement functional
# ---------------------------------------------------------------------------

def energy_density(potential: Potential, path: Path1D) -> np.ndarray:
    """Nodal energy density |f'|^2/2 + W(f) with central differences in the
    interior and one-sided differences at the ends."""
    f = path.samples
    h = path.h
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d[0] = (f[1] - f[0]) / h
    d[-1] = (f[-1] - f[-2]) / h
    return 0.5 * np.sum(d * d, axis=1) + potential.w(f)


def energy_1d(potential: Potential, path: Path1D, i0: int | None = None, i1: int | None = None) -> float:
    """Trapezoidal 1D transition energy, optionally restricted to the sample
    index range [i0, i1].

    Restrictions use the *global* derivative estimates, so energies of
    intervals tiling the domain add up to the total exactly.
    """
    e = energy_density(potential, path)
    sl = slice(i0 or 0, (i1 + 1) if i1 is not None else None)
    e = e[sl]
    if e.shape[0] < 2:
        return 0.0
    return float(path.h * (np.sum(e) - 0.5 * (e[0] + e[-1])))


# ---------------------------------------------------------------------------
# Discrete minimization engine
# ---------------------------------------------------------------------------

def _fd_energy_grad(potential: Potential, f: np.ndarray, h: float):
    """Energy and gradient of the nearest-neighbour FD functional."""
    seg = f[1:] - f[:-1]
    kin = 0.5 * np.sum(seg * seg) / h
    Wv = potential.w(f)
    pot = h * (np.sum(Wv) - 0.5 * (Wv[0] + Wv[-1]))
    g = np.zeros_like(f)
    g[:-1] -= seg / h
    g[1:] += seg / h
    gw = potential.grad(f)
    gw[0] *= 0.5
    gw[-1] *= 0.5
    g += h * gw
    return kin + pot, g


def _fd_hessian(potential: Potential, f: np.ndarray, h: float) -> scipy.sparse.csr_matrix:
    """Block-tridiagonal Hessian of the FD functional (all nodes)."""
    n = f.shape[0]
    lap = scipy.sparse.diags(
        [np.full(n - 1, -1.0 / h), np.full(n, 2.0 / h), np.full(n - 1, -1.0 / h)],
        offsets=[-1, 0, 1],
    ).tolil()
    lap[0, 0] = 1.0 / h
    lap[-1, -1] = 1.0 / h
    A = scipy.sparse.kron(lap.tocsr(), scipy.sparse.eye(2), format="lil")
    Hw = potential.hess(f)
    w = np.full(n, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    for k in range(n):
        A[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] += w[k] * Hw[k]
    return A.tocsr()


def minimize_path_energy(
    potential: Potential,
    init: Path1D,
    pin_left=None,
    pin_right=None,
    pin_nodes: dict | None = None,
    tol_grad: float = 1e-8,
    max_iters: int = 2000,
    newton_polish: bool = True,
) -> tuple[Path1D, bool, float]:
    """Minimize the discrete 1D transition energy with selected nodes pinned.

    Descent (L-BFGS with line search) on the free nodes until the sup-norm of
    the projected gradient drops below ``tol_grad``; an optional damped Newton
    polish on the full Euler-Lagrange system sharpens the tail convergence.
    Returns (path, converged, final gradient sup-norm).
    """
    f0 = init.samples.copy()
    h = init.h
    n = f0.shape[0]
    pinned = np.zeros(n, dtype=bool)
    if pin_left is not None:
        f0[0] = np.asarray(pin_left, dtype=float)
        pinned[0] = True
    if pin_right is not None:
        f0[-1] = np.asarray(pin_right, dtype=float)
        pinned[-1] = True
    for idx, val in (pin_nodes or {}).items():
        f0[idx] = np.asarray(val, dtype=float)
        pinned[idx] = True
    free = ~pinned
    fidx = np.where(free)[0]

    def fun(z):
        f = f0.copy()
        f[fidx] = z.reshape(-1, 2)
        e, g = _fd_energy_grad(potential, f, h)
        return e, g[fidx].ravel()

    res = scipy.optimize.minimize(
        fun,
        f0[fidx].ravel(),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iters, "ftol": 1e-18, "gtol": 0.1 * tol_grad, "maxcor": 20},
    )
    f = f0.copy()
    f[fidx] = res.x.reshape(-1, 2)
    _, g = _fd_energy_grad(potential, f, h)
    gnorm = float(np.max(np.abs(g[fidx]))) if len(fidx) else 0.0

    if newton_polish and gnorm > 0.0:
        mask2 = np.repeat(free, 2)
        for _ in range(40):
            if gnorm < 0.1 * tol_grad:
                break
            A = _fd_hessian(potential, f, h)[mask2][:, mask2]
            rhs = g[fidx].ravel()
            try:
                step = scipy.sparse.linalg.spsolve(A.tocsc(), rhs)
            except Exception:
                break
            # damped: accept the longest fraction that reduces the residual
            base = float(np.sum(rhs * rhs))
            alpha = 1.0
            improved = False
            while alpha > 1e-6:
                f_try = f.copy()
                f_try[fidx] = f[fidx] - alpha * step.reshape(-1, 2)
                _, g_try = _fd_energy_grad(potential, f_try, h)
                if float(np.sum(g_try[fidx] ** 2)) < base:
                    f, g = f_try, g_try
                    improved = True
                    break
                alpha *= 0.5
            if not improved:
                break
            gnorm = float(np.max(np.abs(g[fidx])))

    converged = gnorm < tol_grad
    return Path1D(init.t_start, init.t_end, f), converged, gnorm


# ---------------------------------------------------------------------------
# Heteroclinic profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeteroclinicProfile:
    pair: tuple[int, int]
    path: Path1D
    connection_energy: float
    midpoint_shift: float
    decay_rates: tuple[float, float]
    ode_residual: float
    converged: bool
    no_direct_connection: bool = False

    @property
    def L(self) -> float:
        return self.path.t_end

    def derivative(self) -> np.ndarray:
        f = self.path.samples
        h = self.path.h
        d = np.empty_like(f)
        d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
        d[0] = (f[1] - f[0]) / h
        d[-1] = (f[-1] - f[-2]) / h
        return d


def ode_residual(potential: Potential, path: Path1D) -> float:
    """Discrete L2 norm of f'' - grad W(f) over interior nodes."""
    f = path.samples
    h = path.h
    lap = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    r = lap - potential.grad(f[1:-1])
    return float(np.sqrt(h * np.sum(r * r)))


def _action_along_path(potential: Potential, path: Path1D) -> np.ndarray:
    """Cumulative degenerate action along the path (midpoint rule), so that
    entry k is the action of the sub-path up to sample k."""
    x = path.samples
    seg = x[1:] - x[:-1]
    ell = np.linalg.norm(seg, axis=1)
    mid = 0.5 * (x[1:] + x[:-1])
    sqW = np.sqrt(np.maximum(potential.w(mid), 0.0))
    return np.concatenate([[0.0], np.sqrt(2.0) * np.cumsum(sqW * ell)])


def midpoint_normalize(potential: Potential, profile: HeteroclinicProfile, tol_mid: float = TOL_MID) -> HeteroclinicProfile:
    """Shift the parameter so the sample at 0 is equidistant from both wells.

    Along the profile itself the sub-path action *is* the distance to either
    well (the profile traces a geodesic), so the crossing of
    g(s) = d(p_i, f(s)) - d(p_j, f(s)) is found by bisection on the cumulative
    action, which is monotone.  Leftmost crossing on ties.
    """
    path = profile.path
    cum = _action_along_path(potential, path)
    total = cum[-1]
    g = cum - (total - cum)  # d(p_i, f(s)) - d(p_j, f(s)) along the profile
    sign = g > 0.0
    if sign[0] or not sign[-1]:
        raise PreconditionError("profile does not transition: no sign change of the midpoint function")
    k = int(np.argmax(sign))  # leftmost index where g turns positive
    t = path.t
    # linear interpolation of the crossing parameter inside [k-1, k]
    g0, g1 = g[k - 1], g[k]
    s_star = t[k - 1] + (t[k] - t[k - 1]) * (-g0) / (g1 - g0)

    # resample on the same grid shifted so that s_star -> 0, extending by the
    # well values beyond the original window
    new_t = t + s_star
    samples = path.at(np.clip(new_t, t[0], t[-1]))
    new_path = Path1D(path.t_start, path.t_end, samples)
    cum2 = _action_along_path(potential, new_path)
    k0 = int(np.argmin(np.abs(new_path.t)))
    gap = abs(cum2[k0] - (cum2[-1] - cum2[k0]))
    if gap > 50 * tol_mid:
        log.debug("midpoint normalization residual %.3e", gap)
    return HeteroclinicProfile(
        pair=profile.pair,
        path=new_path,
        connection_energy=energy_1d(potential, new_path),
        midpoint_shift=float(profile.midpoint_shift + s_star),
        decay_rates=profile.decay_rates,
        ode_residual=ode_residual(potential, new_path),
        converged=profile.converged,
        no_direct_connection=profile.no_direct_connection,
    )


def _tanh_like_init(p_i: np.ndarray, p_j: np.ndarray, t: np.ndarray, rate: float = 1.0) -> np.ndarray:
    s = 0.5 * (1.0 + np.tanh(rate * t))
    return p_i[None, :] + s[:, None] * (p_j - p_i)[None, :]


def solve_heteroclinic(
    potential: Potential,
    i: int,
    j: int,
    L: float = 20.0,
    n: int = 2001,
    tol_grad: float = 1e-8,
    init_shift: float = 0.0,
    normalize: bool = True,
) -> HeteroclinicProfile:
    """Minimize the 1D transition energy between wells i and j on [-L, L].

    Endpoints are pinned exactly to the wells; the tail error this commits is
    exponentially small in L.  If the minimizer passes near a third well
    (which happens whenever the direct connection does not exist and the
    distance splits through the intermediate well), the result is flagged
    ``no_direct_connection`` and the profile carries the split structure.
    """
    wi, wj = potential.well(i), potential.well(j)
    rate_guess = np.sqrt(min(wi.hessian_eigenvalues[0], wj.hessian_eigenvalues[0]))
    if L * rate_guess < np.log(100.0):
        raise PreconditionError(
            f"half-length L={L} too short for the slowest tail rate {rate_guess:.3g}; "
            f"need exp(-rate*L) < 0.01"
        )
    t = np.linspace(-L, L, n)
    init = Path1D(-L, L, _tanh_like_init(wi.position, wj.position, t - init_shift, rate=rate_guess))
    path, converged, gnorm = minimize_path_energy(
        potential, init, pin_left=wi.position, pin_right=wj.position, tol_grad=tol_grad
    )

    # does the minimizer pause at an intermediate well?
    other = [w for w in potential.wells if w.label not in (i, j)]
    split = False
    for w in other:
        gap = float(np.min(np.linalg.norm(path.samples - w.position, axis=1)))
        if gap < 0.05:
            split = True
    profile = HeteroclinicProfile(
        pair=(i, j),
        path=path,
        connection_energy=energy_1d(potential, path),
        midpoint_shift=0.0,
        decay_rates=(float("nan"), float("nan")),
        ode_residual=ode_residual(potential, path),
        converged=converged,
        no_direct_connection=split,
    )
    if normalize and not split:
        profile = midpoint_normalize(potential, profile)
    rates = []
    for side in ("left", "right"):
        try:
            rates.append(decay_fit(profile, side)[0])
        except PreconditionError:
            rates.append(float("nan"))
    return HeteroclinicProfile(
        pair=profile.pair,
        path=profile.path,
        connection_energy=profile.connection_energy,
        midpoint_shift=profile.midpoint_shift,
        decay_rates=(rates[0], rates[1]),
        ode_residual=profile.ode_residual,
        converged=profile.converged,
        no_direct_connection=split,
    )


def reverse_profile(potential: Potential, profile: HeteroclinicProfile) -> HeteroclinicProfile:
    """The same wall traversed the other way (pair (j,i))."""
    path = profile.path.reversed()
    return HeteroclinicProfile(
        pair=(profile.pair[1], profile.pair[0]),
        path=path,
        connection_energy=profile.connection_energy,
        midpoint_shift=-profile.midpoint_shift,
        decay_rates=(profile.decay_rates[1], profile.decay_rates[0]),
        ode_residual=profile.ode_residual,
        converged=profile.converged,
        no_direct_connection=profile.no_direct_connection,
    )


# ---------------------------------------------------------------------------
# Decay fits and tail alignment
# ---------------------------------------------------------------------------

DECAY_WINDOW = (1e-6, 1e-2)  # below: float noise; above: nonlinearity


def _tail_window(profile: HeteroclinicProfile, side: str) -> tuple[np.ndarray, np.ndarray]:
    """(sample indices in the fit window, distances to the end-state) for one
    tail.  The end states are the pinned endpoint values themselves."""
    p = profile.path.samples[0] if side == "left" else profile.path.samples[-1]
    r = np.linalg.norm(profile.path.samples - p, axis=1)
    lo, hi = DECAY_WINDOW
    idx = np.where((r > lo) & (r < hi))[0]
    if side == "left":
        idx = idx[idx < profile.path.n // 2]
    else:
        idx = idx[idx > profile.path.n // 2]
    return idx, r[idx]


def decay_fit(profile: HeteroclinicProfile, side: str) -> tuple[float, float]:
    """Fit |f(t) - p| ~ A exp(-rate * |t|) over the tail window on one side.

    Returns (rate, prefactor); rate is positive for a decaying tail.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    idx, r = _tail_window(profile, side)
    if idx.size < 10:
        raise PreconditionError(
            f"decay window on the {side} holds {idx.size} samples (< 10); increase L"
        )
    t = profile.path.t[idx]
    sgn = -1.0 if side == "left" else 1.0
    A = np.stack([np.ones_like(t), -sgn * t], axis=-1)
    coef, *_ = np.linalg.lstsq(A, np.log(r), rcond=None)
    return float(coef[1]), float(np.exp(coef[0]))


def p2_alignment(
    potential: Potential,
    profile_12: HeteroclinicProfile,
    profile_32: HeteroclinicProfile,
) -> tuple[float, float]:
    """Angles between each profile's arrival direction at the shared well and
    the small-eigenvalue direction of the Hessian there.

    Both profiles must terminate (right end) at the same well.  The arrival
    direction is the normalized derivative averaged over the decay window.
    Eigenvector sign is fixed deterministically (first nonzero component
    positive), so generic geometry yields one angle near 0 and the other near
    pi when the arrival axis is the small-eigenvalue direction.
    """
    well = None
    for w in potential.wells:
        if np.linalg.norm(profile_12.path.samples[-1] - w.position) < 1e-6 and np.linalg.norm(
            profile_32.path.samples[-1] - w.position
        ) < 1e-6:
            well = w
    if well is None:
        raise PreconditionError("profiles do not terminate at a common well")
    e = well.hessian_eigenvectors[:, 0].copy()
    nz = np.argmax(np.abs(e) > 1e-14)
    if e[nz] < 0:
        e = -e

    angles = []
    for prof in (profile_12, profile_32):
        idx, _ = _tail_window(prof, "right")
        if idx.size < 3:
            raise PreconditionError("tail window too small for alignment")
        d = prof.derivative()[idx]
        norms = np.linalg.norm(d, axis=1)
        if np.max(norms) < 1e-14:
            raise PreconditionError("degenerate tail: derivative below 1e-14 throughout the window")
        mean_dir = np.sum(d / norms[:, None], axis=0)
        mean_dir /= np.linalg.norm(mean_dir)
        angles.append(float(np.arccos(np.clip(np.dot(mean_dir, e), -1.0, 1.0))))
    return angles[0], angles[1]


# ---------------------------------------------------------------------------
# Linearized operator spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray  # ascending
    near_zero_eigenvalue: float
    zero_mode_overlap: float
    spectral_gap: float


def assemble_linearized_operator(potential: Potential, path: Path1D) -> scipy.sparse.csr_matrix:
    """Symmetric operator v -> -v'' + D2W(f(t)) v on the interior nodes with
    zero boundary values; size 2(n-2)."""
    h = path.h
    n = path.n
    m = n - 2
    lap = scipy.sparse.diags(
        [np.full(m - 1, -1.0), np.full(m, 2.0), np.full(m - 1, -1.0)], offsets=[-1, 0, 1]
    ) / (h * h)
    A = scipy.sparse.kron(lap, scipy.sparse.eye(2), format="coo")
    Hw = potential.hess(path.samples[1:-1])
    rows, cols, vals = [], [], []
    for a in range(2):
        for b in range(2):
            rows.append(2 * np.arange(m) + a)
            cols.append(2 * np.arange(m) + b)
            vals.append(Hw[:, a, b])
    B = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * m, 2 * m)
    )
    return (A + B).tocsr()


def linearized_spectrum(
    potential: Potential,
    profile: HeteroclinicProfile | Path1D,
    k: int = 6,
    tol_ode: float = 1e-3,
) -> SpectrumReport:
    """Lowest eigenpairs of the linearized operator about a profile.

    Shift-invert Lanczos about a shift below the spectrum bottom; reports the
    eigenvalue nearest zero, the overlap of its eigenvector with the profile
    derivative, and the gap to the next eigenvalue.
    """
    path = profile.path if isinstance(profile, HeteroclinicProfile) else profile
    if isinstance(profile, HeteroclinicProfile) and profile.ode_residual > 10 * tol_ode * np.sqrt(1.0 / path.h):
        log.warning("spectrum requested about a profile with residual %.2e", profile.ode_residual)
    A = assemble_linearized_operator(potential, path)
    m2 = A.shape[0]
    # shift strictly below the spectrum: -(1 + max negative curvature along the path)
    Hw = potential.hess(path.samples[1:-1])
    tr = Hw[:, 0, 0] + Hw[:, 1, 1]
    det = Hw[:, 0, 0] * Hw[:, 1, 1] - Hw[:, 0, 1] * Hw[:, 1, 0]
    lam_min = float(np.min(0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))))
    sigma = min(lam_min, 0.0) - 1.0
    v0 = np.ones(m2) / np.sqrt(m2)  # fixed start vector: deterministic Lanczos
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(A, k=k, sigma=sigma, which="LM", v0=v0, maxiter=5000)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise NonConvergenceError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]

    i0 = int(np.argmin(np.abs(vals)))
    f = path.samples
    h = path.h
    dz = (f[2:] - f[:-2]) / (2.0 * h)
    zvec = dz.ravel()
    zvec = zvec / np.linalg.norm(zvec)
    v = vecs[:, i0] / np.linalg.norm(vecs[:, i0])
    overlap = float(abs(np.dot(v, zvec)))
    others = np.delete(vals, i0)
    gap = float(np.min(np.abs(others - vals[i0]))) if others.size else float("inf")
    return SpectrumReport(
        eigenvalues=vals,
        near_zero_eigenvalue=float(vals[i0]),
        zero_mode_overlap=overlap,
        spectral_gap=gap,
    )


# ---------------------------------------------------------------------------
# Truncation
# ---------------------------------------------------------------------------

def truncate_heteroclinic(profile: HeteroclinicProfile, ell: float) -> Path1D:
    """Clamp the profile to its wells outside |s| < ell.

    Equal to the left well for s <= -ell, untouched for |s| <= ell-1, equal to
    the right well for s >= ell, linear on the two unit buffer intervals.
    Clamps (with a log warning) when ell exceeds the profile half-length.
    """
    if ell < 2.0:
        raise PreconditionError(f"truncation half-width must be >= 2, got {ell}")
    path = profile.path
    L = path.t_end
    if ell > L:
        log.warning("truncation half-width %.3g exceeds the profile support %.3g; clamping", ell, L)
        ell = L
    t = path.t
    f = path.samples.copy()
    p_i = path.samples[0]
    p_j = path.samples[-1]
    left_val = profile_value_at(profile, -(ell - 1.0))
    right_val = profile_value_at(profile, ell - 1.0)
    f[t <= -ell] = p_i
    f[t >= ell] = p_j
    mL = (t > -ell) & (t < -(ell - 1.0))
    if np.any(mL):
        lam = (t[mL] + ell)  # 0 at -ell, 1 at -(ell-1)
        f[mL] = p_i[None, :] + lam[:, None] * (left_val - p_i)[None, :]
    mR = (t > (ell - 1.0)) & (t < ell)
    if np.any(mR):
        lam = (t[mR] - (ell - 1.0))
        f[mR] = right_val[None, :] + lam[:, None] * (p_j - right_val)[None, :]
    return Path1D(path.t_start, path.t_end, f)


def profile_value_at(profile: HeteroclinicProfile, s: float) -> np.ndarray:
    return profile.path.at(s)


@dataclass(frozen=True)
class TruncationReport:
    ells: np.ndarray
    energy_excess: np.ndarray
    l2_sq_deviation: np.ndarray
    fitted_amplitude: float
    fitted_rate: float


def truncation_report(potential: Potential, profile: HeteroclinicProfile, ells) -> TruncationReport:
    """Energy excess and L2 deviation of the truncated profile over a grid of
    half-widths, with the exponential fit A * exp(-a * ell)."""
    ells = np.asarray(ells, dtype=float)
    exc = np.empty_like(ells)
    dev = np.empty_like(ells)
    base = profile.connection_energy
    for k, ell in enumerate(ells):
        tr = truncate_heteroclinic(profile, float(ell))
        exc[k] = energy_1d(potential, tr) - base
        diff = tr.samples - profile.path.samples
        dev[k] = float(profile.path.h * np.sum(diff * diff))
    pos = exc > 1e-300
    if np.sum(pos) >= 2:
        A = np.stack([np.ones(int(np.sum(pos))), -ells[pos]], axis=-1)
        coef, *_ = np.linalg.lstsq(A, np.log(exc[pos]), rcond=None)
        amp, rate = float(np.exp(coef[0])), float(coef[1])
    else:
        amp, rate = 0.0, float("inf")
    return TruncationReport(ells, exc, dev, amp, rate)
