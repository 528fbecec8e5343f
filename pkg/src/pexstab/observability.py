"""Observability functionals and their minimisation over damping-signal classes.

The central quantity is the damped observability functional along the
*undamped* flow,

    J(z0, alpha) = int_0^theta alpha(t) ||B^T e^{tA} z0||^2 dt.

A lower bound J >= c ||z0||^2 valid over a whole class of signals turns every
window of length theta into a guaranteed energy-contraction step, so the
class constant

    c = min over unit z0, min over admissible alpha of J(z0, alpha)

is the bridge between signal structure and decay certificates.  Two signal
classes are supported on a uniform grid of ``n_cells`` cells over [0, theta]:

* ``rho-integral``: levels alpha_j in [0, 1] with total mass >= rho * theta.
  The inner minimisation is a continuous knapsack solved exactly by a greedy
  fill: switch on the cells with the smallest flow weight first, putting the
  leftover fractional mass on the marginal cell.
* ``pe-windows``: every window [t, t + T] inside [0, theta] must carry mass
  at least mu.  For cell-constant signals the window mass is piecewise linear
  in the start t, so finitely many window constraints (starts where a window
  edge meets a cell edge) are equivalent to the continuum of constraints; the
  finite LP is solved by scipy's HiGHS simplex.

The outer minimisation over the unit sphere is nonconvex; it is attacked by
multi-start local descent with a fixed, recorded seed.  Each descent step
alternates the exact inner solve with the exact sphere minimiser for frozen
alpha (the smallest eigenvector of the alpha-weighted Gramian), so the value
is nonincreasing and the result is deterministic.  Estimates report the
number of starts and the gap to the second-best local value; they are upper
bounds on the true class constant and carry any caveats attached to the
system (e.g. modal truncation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .linsys import LinearSystem
from .modal import SchrodingerModalSpec, build_schrodinger
from .signals import Signal, make_piecewise

EXPLORATION_LABEL = "exploration of an open problem — no claim"

DEFAULT_NODES_PER_CELL = 16


@dataclass(frozen=True)
class SignalClass:
    """Admissible damping-signal class on [0, horizon].

    ``rho-integral``: mass >= rho * horizon over the whole window.
    ``pe-windows``: mass >= mu over every subwindow of length T.
    """

    kind: str
    horizon: float
    rho: float = None
    T: float = None
    mu: float = None

    def __post_init__(self):
        if self.horizon is None or self.horizon <= 0:
            raise ValueError("class horizon must be positive")
        if self.kind == "rho-integral":
            if self.rho is None or not 0 < self.rho <= 1:
                raise ValueError("rho must lie in (0, 1]")
        elif self.kind == "pe-windows":
            if self.T is None or self.T <= 0:
                raise ValueError("window length T must be positive")
            if self.mu is None or not 0 < self.mu <= self.T:
                raise ValueError("need 0 < mu <= T")
            if self.horizon < self.T:
                raise ValueError("horizon must hold at least one window")
        else:
            raise ValueError("unknown signal class kind %r" % (self.kind,))

    @classmethod
    def rho_integral(cls, rho: float, horizon: float) -> "SignalClass":
        return cls(kind="rho-integral", horizon=horizon, rho=rho)

    @classmethod
    def pe_windows(cls, T: float, mu: float, horizon: float = None) -> "SignalClass":
        return cls(kind="pe-windows", horizon=T if horizon is None else horizon,
                   T=T, mu=mu)


@dataclass(frozen=True)
class OuterSearch:
    """Multi-start descent configuration for the sphere minimisation."""

    n_starts: int = 8
    n_iters: int = 100
    seed: int = 0
    tol: float = 1e-12
    dim_limit: int = 16
    nodes_per_cell: int = DEFAULT_NODES_PER_CELL


@dataclass(frozen=True)
class ObservabilityEstimate:
    """Best located value of the two-level minimisation with its witnesses.

    ``constant`` is an upper bound on the true class constant (the search is
    local); plugging the witnesses back into :func:`functional` on the same
    grid reproduces it.  ``runner_up_gap`` is the distance from the best to
    the second-best distinct local value found (0 when all starts agree).
    """

    constant: float
    witness_z0: np.ndarray
    witness_signal: Signal
    sclass: SignalClass
    n_cells: int
    nodes_per_cell: int
    seed: int
    n_starts: int
    runner_up_gap: float
    b_norm: float
    method: str = ""
    caveats: tuple = ()

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "method": self.method,
            "witness_z0": list(map(float, self.witness_z0)),
            "witness_signal": self.witness_signal.to_dict(),
            "class": {
                "kind": self.sclass.kind,
                "horizon": self.sclass.horizon,
                "rho": self.sclass.rho,
                "T": self.sclass.T,
                "mu": self.sclass.mu,
            },
            "grid": {"n_cells": self.n_cells, "nodes_per_cell": self.nodes_per_cell},
            "seed": self.seed,
            "n_starts": self.n_starts,
            "runner_up_gap": self.runner_up_gap,
            "caveats": list(self.caveats),
        }


def _flow_output_curves(sys: LinearSystem, times: np.ndarray) -> np.ndarray:
    """B^T e^{tA} for each t, shape (n_t, r, N)."""
    times = np.asarray(times, dtype=float)
    if sys.skew_flag:
        w, U = sys._skew_eig()
        phases = np.exp(np.outer(times, -1j * w))
        # e^{tA} = U diag(phases_t) U^H, assembled per time step
        BU = sys.B.T @ U
        return np.real(np.einsum("rk,tk,nk->trn", BU, phases, U.conj()))
    import scipy.linalg
    out = np.empty((len(times), sys.B.shape[1], sys.dim))
    F = np.eye(sys.dim)
    t_prev = 0.0
    cache = {}
    for i, t in enumerate(times):
        dt = float(t - t_prev)
        if dt < 0:
            raise ValueError("times must be nondecreasing")
        if dt > 0:
            P = cache.get(dt)
            if P is None:
                P = scipy.linalg.expm(sys.A * dt)
                cache[dt] = P
            F = P @ F
            t_prev = t
        out[i] = sys.B.T @ F
    return out


def _cell_gramians(sys: LinearSystem, theta: float, n_cells: int,
                   nodes_per_cell: int) -> np.ndarray:
    """Trapezoid cell integrals int_cell e^{tA^T} B B^T e^{tA} dt, (n_cells, N, N)."""
    edges = np.linspace(0.0, theta, n_cells + 1)
    out = np.empty((n_cells, sys.dim, sys.dim))
    for j in range(n_cells):
        ts = np.linspace(edges[j], edges[j + 1], nodes_per_cell + 1)
        C = _flow_output_curves(sys, ts)
        h = (edges[j + 1] - edges[j]) / nodes_per_cell
        weights = np.full(len(ts), h)
        weights[0] = weights[-1] = h / 2
        out[j] = np.einsum("t,trn,trm->nm", weights, C, C)
    return out


def observability_gramian(sys: LinearSystem, t0: float, t1: float,
                          n_quad: int = 2048, signal: Signal = None) -> np.ndarray:
    """Gramian int_{t0}^{t1} alpha(t) e^{tA^T} B B^T e^{tA} dt by trapezoid.

    With ``signal=None`` the weight alpha is 1.  Quadrature nodes are aligned
    with the signal cells so the discontinuous weight never straddles a
    panel.  The smallest eigenvalue of the result is the exact (discretised)
    observability constant of the fixed signal: no optimisation involved.
    """
    if not 0 <= t0 < t1:
        raise ValueError("need 0 <= t0 < t1")
    span = t1 - t0
    pieces = [(t0, t1, 1.0)] if signal is None else list(signal.cells_between(t0, t1))
    G = np.zeros((sys.dim, sys.dim))
    for c0, c1, level in pieces:
        if level == 0.0:
            continue
        m = max(4, int(math.ceil(n_quad * (c1 - c0) / span)))
        ts = np.linspace(c0, c1, m + 1)
        C = _flow_output_curves(sys, ts)
        h = (c1 - c0) / m
        weights = np.full(len(ts), h)
        weights[0] = weights[-1] = h / 2
        G += level * np.einsum("t,trn,trm->nm", weights, C, C)
    return (G + G.T) / 2


def functional(sys: LinearSystem, sig: Signal, z0, theta: float,
               n_quad: int = 512) -> float:
    """J(z0, alpha) = int_0^theta alpha(t) ||B^T e^{tA} z0||^2 dt.

    Trapezoid quadrature with nodes aligned to the signal cells (about
    ``n_quad`` nodes across [0, theta], at least 2 per cell); the flow is
    the undamped e^{tA}.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    z0 = np.asarray(z0, dtype=float).reshape(sys.dim)
    if abs(np.linalg.norm(z0) - 1.0) > 1e-9:
        raise ValueError("z0 must be a unit vector (within 1e-9)")
    total = 0.0
    for c0, c1, level in sig.cells_between(0.0, theta):
        if level == 0.0:
            continue
        m = max(2, int(math.ceil(n_quad * (c1 - c0) / theta)))
        ts = np.linspace(c0, c1, m + 1)
        ys = sys.flow(ts, z0)
        g = np.sum((ys @ sys.B) ** 2, axis=1)
        h = (c1 - c0) / m
        w = np.full(len(ts), h)
        w[0] = w[-1] = h / 2
        total += level * float(w @ g)
    return total


def rho_greedy_min(cell_values, dt: float, mass_budget: float):
    """Exact minimiser of sum_j alpha_j * cell_values[j] over the mass class.

    ``cell_values[j]`` is the integral of the flow weight over cell j (all
    cells of width ``dt``); admissible levels alpha_j in [0, 1] must carry
    total mass sum_j alpha_j * dt >= mass_budget.  The greedy fill - switch
    on the cheapest cells first, fractional level on the marginal cell - is
    the exact optimum of this LP (continuous knapsack); ties break toward
    the earlier cell, so the result is deterministic.

    Returns (alpha, value).
    """
    cell_values = np.asarray(cell_values, dtype=float)
    n = len(cell_values)
    if mass_budget > n * dt * (1 + 1e-12):
        raise ValueError("mass budget %s exceeds the horizon %s" % (mass_budget, n * dt))
    mass_budget = min(mass_budget, n * dt)
    order = np.argsort(cell_values, kind="stable")
    alpha = np.zeros(n)
    value = 0.0
    remaining = mass_budget
    for j in order:
        if remaining <= 0:
            break
        take = min(dt, remaining)
        alpha[j] = take / dt
        value += (take / dt) * cell_values[j]
        remaining -= take
    return alpha, float(value)


def pe_window_min(cell_values, dt: float, T: float, mu: float, horizon: float):
    """Minimise sum_j alpha_j * cell_values[j] under sliding-window mass >= mu.

    Constraints are imposed at every window start where a window edge meets a
    cell edge (plus the range endpoints); for cell-constant signals the
    window mass is piecewise linear in the start, so these finitely many
    constraints are equivalent to all starts in [0, horizon - T].  Solved as
    a dense LP (HiGHS).  Returns (alpha, value).
    """
    cell_values = np.asarray(cell_values, dtype=float)
    n = len(cell_values)
    edges = np.array([horizon * j / n for j in range(n + 1)])
    last = horizon - T
    cands = {0.0, last}
    for e in edges:
        if 0.0 <= e <= last:
            cands.add(float(e))
        if 0.0 <= e - T <= last:
            cands.add(float(e - T))
    starts = sorted(cands)
    # drop near-duplicates
    dedup = [starts[0]]
    for s in starts[1:]:
        if s - dedup[-1] > 1e-12 * max(1.0, horizon):
            dedup.append(s)
    rows = []
    for s in dedup:
        cover = np.clip(np.minimum(edges[1:], s + T) - np.maximum(edges[:-1], s), 0.0, None)
        rows.append(cover)
    A_ub = -np.asarray(rows)
    b_ub = np.full(len(rows), -mu)
    res = scipy.optimize.linprog(cell_values, A_ub=A_ub, b_ub=b_ub,
                                 bounds=[(0.0, 1.0)] * n, method="highs")
    if not res.success:
        raise RuntimeError("window LP failed: %s" % res.message)
    alpha = np.clip(res.x, 0.0, 1.0)
    return alpha, float(cell_values @ alpha)


def _signal_from_levels(alpha, theta: float) -> Signal:
    """Cell-constant signal on [0, theta] from per-cell levels (tail 0)."""
    n = len(alpha)
    breaks, vals = [], []
    levels = np.clip(np.asarray(alpha, dtype=float), 0.0, 1.0)
    # merge equal neighbours; final edge at theta closes the last cell
    for j in range(n):
        edge = theta * (j + 1) / n
        if j + 1 < n and levels[j + 1] == levels[j]:
            continue
        breaks.append(edge)
        vals.append(levels[j])
    return make_piecewise(breaks, vals, 0.0)


class _InnerProblem:
    """Cell Gramians for a (system, class, grid) triple with inner solvers."""

    def __init__(self, sys: LinearSystem, sclass: SignalClass, n_cells: int,
                 nodes_per_cell: int):
        if n_cells < 4:
            raise ValueError("need at least 4 cells")
        self.sys = sys
        self.sclass = sclass
        self.n_cells = n_cells
        self.nodes_per_cell = nodes_per_cell
        self.dt = sclass.horizon / n_cells
        self.Ms = _cell_gramians(sys, sclass.horizon, n_cells, nodes_per_cell)

    def cell_values(self, z0) -> np.ndarray:
        return np.einsum("jnm,n,m->j", self.Ms, z0, z0)

    def minimise(self, z0):
        g = self.cell_values(z0)
        if self.sclass.kind == "rho-integral":
            return rho_greedy_min(g, self.dt, self.sclass.rho * self.sclass.horizon)
        return pe_window_min(g, self.dt, self.sclass.T, self.sclass.mu,
                             self.sclass.horizon)

    def weighted_gramian(self, alpha) -> np.ndarray:
        return np.einsum("j,jnm->nm", np.asarray(alpha, dtype=float), self.Ms)


def inner_min_signal(sys: LinearSystem, z0, sclass: SignalClass,
                     n_cells: int = 64,
                     nodes_per_cell: int = DEFAULT_NODES_PER_CELL):
    """Worst admissible signal for a fixed initial state.

    Returns (signal, value): the cell-constant signal in ``sclass``
    minimising the observability functional of ``z0`` on the uniform grid,
    and the attained value.
    """
    z0 = np.asarray(z0, dtype=float).reshape(sys.dim)
    prob = _InnerProblem(sys, sclass, n_cells, nodes_per_cell)
    alpha, value = prob.minimise(z0)
    return _signal_from_levels(alpha, sclass.horizon), value


def class_constant(sys: LinearSystem, sclass: SignalClass, n_cells: int = 64,
                   outer: OuterSearch = None) -> ObservabilityEstimate:
    """Two-level minimisation of the observability functional.

    Runs ``outer.n_starts`` local descents from random orthonormalised unit
    starts (fixed seed).  Each descent alternates the exact inner signal
    solve with the exact outer step for frozen signal - the unit eigenvector
    of the smallest eigenvalue of the alpha-weighted Gramian - so the value
    never increases; descent stops when the improvement drops below
    ``outer.tol``.

    The returned constant is the best (smallest) local value; it always
    satisfies the necessary upper bound c <= horizon * ||B||^2.
    """
    outer = outer or OuterSearch()
    N = sys.dim
    if N > outer.dim_limit:
        raise ValueError(
            "outer search limited to dimension %d (got %d); raise "
            "OuterSearch.dim_limit explicitly for larger systems"
            % (outer.dim_limit, N)
        )
    prob = _InnerProblem(sys, sclass, n_cells, outer.nodes_per_cell)
    rng = np.random.default_rng(outer.seed)
    starts = []
    while len(starts) < outer.n_starts:
        batch = rng.standard_normal((N, min(N, outer.n_starts - len(starts))))
        Q, _ = np.linalg.qr(batch)
        starts.extend(Q.T)
    locals_found = []
    for z in starts[: outer.n_starts]:
        z = z / np.linalg.norm(z)
        value = None
        alpha = None
        for _ in range(outer.n_iters):
            alpha, val = prob.minimise(z)
            W = prob.weighted_gramian(alpha)
            evals, evecs = np.linalg.eigh((W + W.T) / 2)
            z_new, val_new = evecs[:, 0], float(evals[0])
            if value is not None and value - val_new <= outer.tol:
                z, value = z_new, min(val_new, value)
                break
            z, value = z_new, val_new
        locals_found.append((value, z, alpha))
    locals_found.sort(key=lambda rec: rec[0])
    best_val, best_z, best_alpha = locals_found[0]
    distinct = [best_val]
    for v, _, _ in locals_found[1:]:
        if v - distinct[-1] > 1e-10 * max(1.0, abs(best_val)):
            distinct.append(v)
    gap = (distinct[1] - distinct[0]) if len(distinct) > 1 else 0.0
    bound = sclass.horizon * sys.b_norm ** 2
    if best_val > bound * (1 + 1e-9) + 1e-12:
        raise RuntimeError(
            "estimate %.6g exceeds the necessary bound horizon*||B||^2 = %.6g; "
            "quadrature grid too coarse" % (best_val, bound)
        )
    inner_tag = "greedy fill" if sclass.kind == "rho-integral" else "window LP"
    return ObservabilityEstimate(
        constant=float(best_val),
        witness_z0=best_z,
        witness_signal=_signal_from_levels(best_alpha, sclass.horizon),
        sclass=sclass,
        n_cells=n_cells,
        nodes_per_cell=outer.nodes_per_cell,
        seed=outer.seed,
        n_starts=outer.n_starts,
        runner_up_gap=float(gap),
        b_norm=sys.b_norm,
        method="multi-start alternating descent / " + inner_tag,
        caveats=sys.caveats,
    )


def wave_pe_lower_bound(T: float, mu: float, lambda_min: float, d0: float = 1.0) -> float:
    """Certified observability constant for uniformly damped string modes.

    For any mode mix with eigenvalues >= lambda_min and any T-mu
    persistently exciting signal,

        J(z0, alpha) >= d0^2 * mu * eps^2 / 2 * ||z0||^2,
        eps = min(1, (mu/2) / (2 T / pi + 2 / lambda_min)),

    independent of the number of modes: away from an eps-sublevel set of the
    mode oscillation (whose measure the term 2 T eps / pi + 2 eps / lambda
    controls), the squared sinusoid exceeds eps^2, and the signal keeps at
    least mu/2 of its window mass on that good set.
    """
    if T <= 0 or not 0 < mu <= T:
        raise ValueError("need T > 0 and 0 < mu <= T")
    if lambda_min <= 0 or d0 <= 0:
        raise ValueError("lambda_min and d0 must be positive")
    eps = min(1.0, (mu / 2.0) / (2.0 * T / math.pi + 2.0 / lambda_min))
    return d0 * d0 * mu * eps * eps / 2.0


def wave_rho_threshold(rho: float, lambda1: float) -> float:
    """Largest window length with a valid cubic strong-stability bound.

    Two conditions cap the window: eps = rho * lambda1 * T / 6 must stay
    <= 1, and the sublevel-measure estimate needs lambda1 * T <= pi / 2.
    The second is always the binding one for rho <= 1, but the minimum is
    taken literally.
    """
    return min(math.pi / (2.0 * lambda1), 6.0 / (rho * lambda1))


def wave_rho_lower_bound(T: float, rho: float, lambda1: float, d0: float = 1.0) -> float:
    """Interval cost c(T) = d0^2 rho^3 lambda1^2 T^3 / 72 for short windows.

    Valid for T up to :func:`wave_rho_threshold`: below it the choice
    eps = rho * lambda1 * T / 6 both stays within (0, 1] and keeps the
    sublevel-set measure small enough that a rho-fraction window retains
    half its mass on the good set.  Raises ValueError above the threshold
    (the bound's derivation breaks there, not merely its quality).
    """
    if T <= 0 or not 0 < rho <= 1:
        raise ValueError("need T > 0 and rho in (0, 1]")
    if lambda1 <= 0 or d0 <= 0:
        raise ValueError("lambda1 and d0 must be positive")
    thr = wave_rho_threshold(rho, lambda1)
    if T > thr:
        raise ValueError(
            "window length %g exceeds the validity threshold %g = pi/(2 lambda1); "
            "the cubic lower bound is only derived below it" % (T, thr)
        )
    return d0 * d0 * rho ** 3 * lambda1 ** 2 * T ** 3 / 72.0


@dataclass(frozen=True)
class KappaScanReport:
    """Log-log fit of the class constant against the window length."""

    T_grid: tuple
    constants: tuple
    slope: float
    kappa: float
    kalman_index: int
    expected_slope: float
    rho: float
    seed: int
    caveats: tuple = ()

    def to_dict(self) -> dict:
        return {
            "T_grid": list(self.T_grid),
            "constants": list(self.constants),
            "slope": self.slope,
            "kappa": self.kappa,
            "kalman_index": self.kalman_index,
            "expected_slope": self.expected_slope,
            "rho": self.rho,
            "seed": self.seed,
            "caveats": list(self.caveats),
        }


def kappa_scan(sys: LinearSystem, rho: float, T_grid, n_cells: int = 64,
               outer: OuterSearch = None) -> KappaScanReport:
    """Estimate c(T) ~ kappa T^(2K+1) over small windows for skew systems.

    For controllable (A, B) with skew A, the rho-integral class constant
    scales like T to the power 2K+1 where K is the Kalman index (smallest K
    with rank [B, AB, ..., A^K B] full).  The scan computes the class
    constant on each window length, fits log c against log T by least
    squares, and reports the fitted slope and prefactor next to the
    structural prediction.
    """
    from .linsys import kalman_index as _kidx
    if not sys.skew_flag:
        raise ValueError("kappa scan requires skew-symmetric A")
    K = _kidx(sys)  # raises UncontrollableError when rank-deficient
    outer = outer or OuterSearch()
    T_grid = tuple(float(T) for T in T_grid)
    if len(T_grid) < 2:
        raise ValueError("need at least two window lengths to fit a slope")
    if any(not 0 < T <= 1 for T in T_grid):
        raise ValueError("window lengths must lie in (0, 1]")
    if any(b >= a for a, b in zip(T_grid, T_grid[1:])):
        raise ValueError("window lengths must be strictly decreasing")
    consts = []
    for T in T_grid:
        est = class_constant(sys, SignalClass.rho_integral(rho, T), n_cells, outer)
        consts.append(est.constant)
    consts = np.asarray(consts)
    if np.any(consts <= 0):
        raise RuntimeError("nonpositive class constant in scan; grid too coarse")
    X = np.vstack([np.log(T_grid), np.ones(len(T_grid))]).T
    coef, *_ = np.linalg.lstsq(X, np.log(consts), rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    return KappaScanReport(
        T_grid=T_grid,
        constants=tuple(float(c) for c in consts),
        slope=slope,
        kappa=float(math.exp(intercept)),
        kalman_index=K,
        expected_slope=float(2 * K + 1),
        rho=float(rho),
        seed=outer.seed,
        caveats=sys.caveats,
    )


@dataclass(frozen=True)
class WindowScanReport:
    """Exploration of worst measure-mu damping windows for quantum particles.

    ``free_constants[i]`` is the LP-relaxed worst constant over arbitrary
    measure-mu level profiles for ``n_modes_list[i]`` modes;
    ``interval_constants[i]`` restricts the profile to a single interval of
    length mu (always >= the free value).  No limit claim is made: the scan
    merely reports the finite-truncation trend, and the label says so.
    """

    label: str
    n_modes_list: tuple
    free_constants: tuple
    interval_constants: tuple
    interval_argmin: tuple
    trend: str
    T: float
    mu: float
    seed: int
    caveats: tuple = ()

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_modes": list(self.n_modes_list),
            "free_constants": list(self.free_constants),
            "interval_constants": list(self.interval_constants),
            "interval_argmin": list(self.interval_argmin),
            "trend": self.trend,
            "T": self.T,
            "mu": self.mu,
            "seed": self.seed,
            "caveats": list(self.caveats),
        }


def window_scan(spec: SchrodingerModalSpec, T: float, mu: float,
                n_cells: int = 64, outer: OuterSearch = None,
                n_modes_list=None) -> WindowScanReport:
    """Scan worst-case damping windows for growing quantum-particle truncations.

    For each truncation size the free problem minimises the functional over
    unit states and measure-mu level profiles on [0, T] (the LP relaxation
    of indicator windows); the interval problem restricts to contiguous
    windows [s, s + mu] and minimises the smallest Gramian eigenvalue over
    the start s on a grid.  Whether the free constants approach a positive
    limit as the truncation grows is open; the report is labelled
    accordingly and carries the modal-truncation caveat.
    """
    if not 0 < mu <= T:
        raise ValueError("need 0 < mu <= T")
    outer = outer or OuterSearch()
    if n_modes_list is None:
        n_modes_list = tuple(range(1, spec.n_modes + 1))
    n_modes_list = tuple(int(n) for n in n_modes_list)
    free_vals, interval_vals, interval_arg = [], [], []
    caveats = ()
    for n in n_modes_list:
        sys_n = build_schrodinger(replace(spec, n_modes=n))
        caveats = sys_n.caveats
        est = class_constant(sys_n, SignalClass.rho_integral(mu / T, T),
                             n_cells, outer)
        free_vals.append(est.constant)
        # contiguous windows: smallest Gramian eigenvalue over interval starts
        best_s, best_v = 0.0, None
        for s in np.linspace(0.0, T - mu, 33):
            G = observability_gramian(sys_n, float(s), float(s) + mu, n_quad=512)
            v = float(np.linalg.eigvalsh(G)[0])
            if best_v is None or v < best_v:
                best_s, best_v = float(s), v
        interval_vals.append(best_v)
        interval_arg.append(best_s)
    first, last = free_vals[0], free_vals[-1]
    trend = "decreasing" if last < 0.95 * first else "plateau"
    return WindowScanReport(
        label=EXPLORATION_LABEL,
        n_modes_list=n_modes_list,
        free_constants=tuple(free_vals),
        interval_constants=tuple(interval_vals),
        interval_argmin=tuple(interval_arg),
        trend=trend,
        T=float(T),
        mu=float(mu),
        seed=outer.seed,
        caveats=tuple(caveats) + (EXPLORATION_LABEL,),
    )
