"""Piecewise-constant damping signals and persistent-excitation checks.

A damping signal is a function ``alpha : [0, inf) -> [0, 1]`` that switches
between finitely many levels.  All signal algebra here is exact: breakpoints
and levels are mirrored internally as rationals, integrals are computed as
exact sums over cells, and the persistent-excitation (PE) check minimises the
sliding-window mass

    g(t) = integral of alpha over [t, t + T]

over candidate window starts rather than sampling.  Because ``g`` is piecewise
linear in ``t`` with kinks only where a window edge crosses a breakpoint, the
minimum over a closed range is attained at a breakpoint, at a breakpoint
shifted by ``-T``, or at an endpoint of the range; enumerating these gives the
exact minimiser.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational


def _frac(x) -> Fraction:
    """Exact rational mirror of a float (or pass rationals through)."""
    if isinstance(x, Rational):
        return Fraction(x)
    return Fraction(float(x))


@dataclass(frozen=True)
class Signal:
    """Piecewise-constant damping level on [0, inf).

    ``values[i]`` applies on the cell ``[breakpoints[i-1], breakpoints[i])``
    (with an implicit left edge at 0), and ``tail_value`` applies beyond the
    last breakpoint.  With no breakpoints the signal is constantly
    ``tail_value``.

    Attributes
    ----------
    breakpoints : tuple of float
        Strictly increasing cell edges, all positive.  A breakpoint at 0
        would create an empty leading cell and is rejected.
    values : tuple of float
        One level per cell, each in [0, 1]; same length as ``breakpoints``.
    tail_value : float
        Level on ``[breakpoints[-1], inf)``.
    """

    breakpoints: tuple
    values: tuple
    tail_value: float
    # exact rational mirrors, set in __post_init__
    _fbreaks: tuple = field(init=False, repr=False, compare=False, default=())
    _fvalues: tuple = field(init=False, repr=False, compare=False, default=())
    _ftail: Fraction = field(init=False, repr=False, compare=False, default=Fraction(0))
    _fprefix: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        fbreaks = tuple(_frac(b) for b in self.breakpoints)
        fvalues = tuple(_frac(v) for v in self.values)
        ftail = _frac(self.tail_value)
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in fbreaks))
        object.__setattr__(self, "values", tuple(float(v) for v in fvalues))
        object.__setattr__(self, "tail_value", float(ftail))
        if len(fbreaks) != len(fvalues):
            raise ValueError(
                "need exactly one value per cell: got %d breakpoints but %d values"
                % (len(fbreaks), len(fvalues))
            )
        prev = Fraction(0)
        for b in fbreaks:
            if b <= prev:
                raise ValueError(
                    "breakpoints must be strictly increasing and positive; "
                    "a breakpoint at or before %s creates a degenerate cell" % float(prev)
                )
            prev = b
        for v in list(fvalues) + [ftail]:
            if not 0 <= v <= 1:
                raise ValueError("signal levels must lie in [0, 1], got %s" % float(v))
        # prefix[i] = exact integral over [0, breakpoints[i]]
        prefix = []
        acc = Fraction(0)
        lo = Fraction(0)
        for b, v in zip(fbreaks, fvalues):
            acc += (b - lo) * v
            prefix.append(acc)
            lo = b
        object.__setattr__(self, "_fbreaks", fbreaks)
        object.__setattr__(self, "_fvalues", fvalues)
        object.__setattr__(self, "_ftail", ftail)
        object.__setattr__(self, "_fprefix", tuple(prefix))

    def __call__(self, t: float) -> float:
        return self.value_at(t)

    def value_at(self, t: float) -> float:
        """Level at time ``t`` (right-continuous at breakpoints)."""
        if t < 0:
            raise ValueError("signal domain is [0, inf), got t=%s" % t)
        i = bisect.bisect_right(self.breakpoints, t)
        if i < len(self.values):
            return self.values[i]
        return self.tail_value

    def _primitive(self, x: Fraction) -> Fraction:
        """Exact integral over [0, x]."""
        i = bisect.bisect_right(self._fbreaks, x)
        if i == 0:
            level = self._fvalues[0] if self._fvalues else self._ftail
            return x * level
        base = self._fprefix[i - 1]
        edge = self._fbreaks[i - 1]
        level = self._fvalues[i] if i < len(self._fvalues) else self._ftail
        return base + (x - edge) * level

    def integral(self, a, b) -> Fraction:
        """Exact mass of the signal over [a, b], returned as a Fraction."""
        fa, fb = _frac(a), _frac(b)
        if fa < 0 or fb < fa:
            raise ValueError("need 0 <= a <= b, got a=%s b=%s" % (a, b))
        return self._primitive(fb) - self._primitive(fa)

    def cells_between(self, a: float, b: float):
        """Yield (start, end, level) covering [a, b], split at breakpoints."""
        if a < 0 or b < a:
            raise ValueError("need 0 <= a <= b, got a=%s b=%s" % (a, b))
        if b == a:
            return
        lo = a
        i = bisect.bisect_right(self.breakpoints, a)
        while i < len(self.breakpoints) and self.breakpoints[i] < b:
            yield lo, self.breakpoints[i], self.values[i]
            lo = self.breakpoints[i]
            i += 1
        level = self.values[i] if i < len(self.values) else self.tail_value
        yield lo, b, level

    def shifted(self, t0: float) -> "Signal":
        """The signal ``t -> alpha(t0 + t)`` as a new Signal."""
        f0 = _frac(t0)
        if f0 < 0:
            raise ValueError("shift must be nonnegative, got %s" % t0)
        breaks, vals = [], []
        for b, v in zip(self._fbreaks, self._fvalues):
            if b > f0:
                breaks.append(b - f0)
                vals.append(v)
        if not breaks:
            return Signal((), (), self._ftail)
        return Signal(tuple(breaks), tuple(vals), self._ftail)

    def to_dict(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "values": list(self.values),
            "tail": self.tail_value,
        }


@dataclass(frozen=True)
class PEReport:
    """Result of an exact T-mu persistent-excitation check."""

    holds: bool
    T: float
    mu: float
    horizon: float
    worst_window_start: float
    worst_window_mass: float
    # float fields above are lossy views; the exact minimiser lives here
    worst_window_start_exact: Fraction
    worst_window_mass_exact: Fraction
    tolerance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "T": self.T,
            "mu": self.mu,
            "horizon": self.horizon,
            "worst_window_start": self.worst_window_start,
            "worst_window_mass": self.worst_window_mass,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class IntervalSequence:
    """Ordered disjoint intervals (a_n, b_n) with a mass fraction rho.

    ``rho`` is the guaranteed fraction of each interval carrying damping mass:
    the associated signal satisfies ``integral(a_n, b_n) >= rho * (b_n - a_n)``.
    ``costs`` optionally attaches a per-interval observability cost c_n.
    """

    intervals: tuple
    rho: float
    costs: tuple = None

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if not ivs:
            raise ValueError("interval sequence must be nonempty")
        prev_end = None
        for a, b in ivs:
            if b <= a:
                raise ValueError("empty interval (%s, %s)" % (a, b))
            if prev_end is not None and a < prev_end:
                raise ValueError("intervals must be ordered and disjoint")
            prev_end = b
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1], got %s" % self.rho)
        if self.costs is not None:
            costs = tuple(float(c) for c in self.costs)
            object.__setattr__(self, "costs", costs)
            if len(costs) != len(ivs):
                raise ValueError("need one cost per interval")
            if any(c <= 0 for c in costs):
                raise ValueError("interval costs must be positive")

    @property
    def lengths(self) -> tuple:
        return tuple(b - a for a, b in self.intervals)


def make_piecewise(breakpoints, values, tail_value) -> Signal:
    """Build a piecewise-constant signal from cell edges, levels and a tail."""
    return Signal(tuple(breakpoints), tuple(values), tail_value)


def integral(sig: Signal, a, b) -> Fraction:
    """Exact mass of ``sig`` over [a, b].

    The result is a :class:`fractions.Fraction`; exactness makes the additive
    splitting ``integral(a, c) == integral(a, b) + integral(b, c)`` hold with
    equality, not merely to rounding.
    """
    return sig.integral(a, b)


def pe_check(sig: Signal, T, mu, horizon, tolerance: float = 0.0) -> PEReport:
    """Exact T-mu persistent-excitation check over [0, horizon].

    Verifies ``integral(sig, t, t + T) >= mu`` for every window start
    ``t in [0, horizon - T]`` by exact candidate enumeration: the window mass
    is piecewise linear in ``t``, so its minimum is attained where a window
    edge meets a breakpoint or at the range endpoints.

    Parameters
    ----------
    T, mu : float
        Window length and required mass, ``0 < mu <= T``.
    horizon : float
        Windows are scanned on [0, horizon]; must satisfy ``horizon >= T``.
    tolerance : float
        Slack in the comparison; 0 keeps the check exact.

    Returns
    -------
    PEReport
        ``holds`` is True iff the worst window mass is at least
        ``mu - tolerance``; ties in mass report the earliest window start.
    """
    fT, fmu, fH = _frac(T), _frac(mu), _frac(horizon)
    if fT <= 0:
        raise ValueError("window length T must be positive")
    if not 0 < fmu <= fT:
        raise ValueError("need 0 < mu <= T (levels never exceed 1), got mu=%s T=%s" % (mu, T))
    if fH < fT:
        raise ValueError("horizon must be at least one window long")
    last = fH - fT
    cands = {Fraction(0), last}
    for b in sig._fbreaks:
        if 0 <= b <= last:
            cands.add(b)
        if 0 <= b - fT <= last:
            cands.add(b - fT)
    worst_t, worst_m = None, None
    for t in sorted(cands):
        m = sig._primitive(t + fT) - sig._primitive(t)
        if worst_m is None or m < worst_m:
            worst_t, worst_m = t, m
    holds = worst_m >= fmu - _frac(tolerance)
    return PEReport(
        holds=bool(holds),
        T=float(fT),
        mu=float(fmu),
        horizon=float(fH),
        worst_window_start=float(worst_t),
        worst_window_mass=float(worst_m),
        worst_window_start_exact=worst_t,
        worst_window_mass_exact=worst_m,
        tolerance=float(tolerance),
    )


def periodic_gate(period, pulse_halfwidth, horizon) -> Signal:
    """Periodic on/off gate: level 1 on [k*period - h, k*period + h), else 0.

    The pulse train is generated exactly out to at least ``horizon`` plus one
    full period and then truncated (tail level 0), so any window analysis on
    [0, horizon] sees the exact periodic signal.  ``h = period / 2`` makes the
    pulses touch and the gate degenerates to the constant 1.
    """
    P, h, H = _frac(period), _frac(pulse_halfwidth), _frac(horizon)
    if P <= 0:
        raise ValueError("period must be positive")
    if not 0 < h <= P / 2:
        raise ValueError("pulse halfwidth must lie in (0, period/2]")
    if H < 0:
        raise ValueError("horizon must be nonnegative")
    if 2 * h == P:
        return Signal((), (), 1.0)
    breaks, vals = [], []
    k = 0
    # first pulse is clipped to [0, h)
    edge = h
    breaks.append(edge)
    vals.append(Fraction(1))
    while True:
        k += 1
        on = k * P - h
        off = k * P + h
        breaks.append(on)
        vals.append(Fraction(0))
        breaks.append(off)
        vals.append(Fraction(1))
        if on > H + P:
            break
    return Signal(tuple(breaks), tuple(vals), 0.0)


def periodic_extension(sig: Signal, period, horizon) -> Signal:
    """Tile the restriction of ``sig`` to [0, period) periodically.

    The pattern is repeated exactly (in rational arithmetic) out to at least
    ``horizon`` plus one full period; after the generated range the signal
    holds the pattern's first level.  Useful for turning a single-window
    minimiser into a signal of the same class on a long horizon: a
    period-T-periodic signal has identical mass in every window of length T.
    """
    fP, fH = _frac(period), _frac(horizon)
    if fP <= 0:
        raise ValueError("period must be positive")
    if fH <= 0:
        raise ValueError("horizon must be positive")
    edges = [Fraction(0)]
    levels = []
    for b, v in zip(sig._fbreaks, sig._fvalues):
        if b >= fP:
            break
        edges.append(b)
        levels.append(v)
    levels.append(sig._fvalues[len(edges) - 1]
                  if len(edges) - 1 < len(sig._fvalues) else sig._ftail)
    edges.append(fP)
    n_rep = int(math.ceil(float(fH / fP))) + 1
    breaks, vals = [], []
    for k in range(n_rep):
        off = k * fP
        for e, v in zip(edges[1:], levels):
            breaks.append(off + e)
            vals.append(v)
    return Signal(tuple(breaks), tuple(vals), levels[0])


def haraux_gap(n_max: int):
    """Gate with shrinking pulses I_n = (s_n, s_n + 1/n), s_n = sum_{k<n} 2/k.

    The n-th pulse has length 1/n and is followed by a gap of the same
    length, so the long-run duty cycle is 1/2 while the per-pulse mass 1/n
    decays.  Returns the signal truncated after ``n_max`` pulses together
    with the pulse intervals as an :class:`IntervalSequence` (rho = 1).
    """
    if n_max < 1:
        raise ValueError("need at least one pulse")
    breaks, vals, ivs = [], [], []
    s = Fraction(0)
    for n in range(1, n_max + 1):
        a, b = s, s + Fraction(1, n)
        ivs.append((a, b))
        if a > 0:
            breaks.append(a)
            vals.append(Fraction(0))
        breaks.append(b)
        vals.append(Fraction(1))
        s += Fraction(2, n)
    sig = Signal(tuple(breaks), tuple(vals), 0.0)
    return sig, IntervalSequence(tuple(ivs), rho=1.0)


def from_intervals(seq: IntervalSequence, level=1.0) -> Signal:
    """Signal equal to ``level`` on each interval of ``seq`` and 0 elsewhere."""
    flevel = _frac(level)
    if not 0 < flevel <= 1:
        raise ValueError("level must lie in (0, 1]")
    breaks, vals = [], []
    for a, b in seq.intervals:
        fa, fb = _frac(a), _frac(b)
        if fa > 0 and (not breaks or breaks[-1] < fa):
            breaks.append(fa)
            vals.append(Fraction(0))
        breaks.append(fb)
        vals.append(flevel)
    return Signal(tuple(breaks), tuple(vals), 0.0)
