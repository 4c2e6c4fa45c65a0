"""Backward solver for driver-priced claims on the binomial lattice.

The one-step scheme is implicit in ``y``: at each node the solver finds

    y = m + g(t_i, y, z) * dt + dK_i

where ``m`` is the one-step conditional expectation of the next slice, ``z``
its martingale-increment coefficient and ``dK_i`` the dividend paid over the
step.  The fixed point is found by Picard iteration started at ``m``, which
contracts whenever ``mu * dt < 1``.

Order-sensitive verdicts (comparison, domination) additionally require the
monotone-scheme condition ``mu * (sqrt(dt) + dt) <= 1``; without it the
one-step map need not be nondecreasing in the next-step values and discrete
order verdicts are unreliable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    BadPartition,
    BadStepOrder,
    ContractionViolation,
    PicardDivergence,
    SchemeNotMonotone,
    StepOutOfRange,
)
from .generators import Generator, domination_generator
from .lattice import AdaptedProcess, Lattice

PICARD_TOL = 1e-12
PICARD_CAP = 100
PICARD_FAIL = 1e-9


# -- claims and dividend streams ----------------------------------------------

@dataclass(frozen=True)
class TerminalClaim:
    """A payoff that is a pure function of the walk value at maturity."""

    payoff: Callable
    name: str = ""

    def values(self, lattice: Lattice, step: int) -> np.ndarray:
        raw = np.asarray(self.payoff(lattice.node_values(step)), dtype=float)
        vals = np.array(np.broadcast_to(raw, (step + 1,)), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"claim {self.name!r} is not finite on step {step}")
        return vals


def claim_from_values(lattice: Lattice, step: int, values) -> TerminalClaim:
    """Wrap a slice of node values as a claim maturing at ``step``.

    The payoff inverts walk values back to node indices, so it reproduces the
    given values exactly on the lattice (off-grid queries clamp to the range).
    """
    vals = np.array(values, dtype=float)
    if vals.shape != (step + 1,):
        raise StepOutOfRange(f"need {step + 1} node values, got shape {vals.shape}")

    def payoff(b):
        return vals[lattice.node_index(step, b)]

    return TerminalClaim(payoff, name=f"slice@{step}")


def make_underlying_map(s0: float, sigma: float, horizon: float, drift: float = 0.0):
    """Terminal stock map ``B -> s0 * exp(sigma * B + (drift - sigma^2/2) * horizon)``."""

    def terminal_price(b):
        return s0 * np.exp(sigma * np.asarray(b, dtype=float)
                           + (drift - 0.5 * sigma * sigma) * horizon)

    return terminal_price


def random_claim(rng, bound: float = 1.0, slope: float = 1.0, kinks: int = 3,
                 knot_range: float = 2.0) -> TerminalClaim:
    """Random bounded piecewise-linear payoff of the terminal walk value.

    The result is clipped to ``[-bound, bound]`` and has total slope at most
    ``slope``; clipping preserves the Lipschitz bound.
    """
    knots = rng.uniform(-knot_range, knot_range, size=kinks)
    w = rng.normal(size=kinks + 1)
    w *= slope / max(float(np.sum(np.abs(w))), 1e-12)
    const = float(rng.uniform(-0.5 * bound, 0.5 * bound))

    def payoff(b):
        b = np.asarray(b, dtype=float)
        out = const + w[0] * b
        for k in range(kinks):
            out = out + w[k + 1] * (np.abs(b - knots[k]) - abs(knots[k]))
        return np.clip(out, -bound, bound)

    return TerminalClaim(payoff, name="random")


class DividendStream:
    """Per-step, per-node payout increments ``dK_i`` (cumulative value starts at 0).

    The increment at step ``i`` accrues to the price at step ``i`` during the
    backward pass, i.e. it is the payout earned between ``t_i`` and
    ``t_{i+1}``.  A stream is *increasing* when every increment is >= 0.
    """

    __slots__ = ("increments",)

    def __init__(self, increments: AdaptedProcess):
        if increments.stop > increments.lattice.n_steps - 1:
            raise StepOutOfRange("dividend increments may cover steps 0..n-1 only")
        self.increments = increments

    @property
    def lattice(self) -> Lattice:
        return self.increments.lattice

    def increment(self, i: int) -> np.ndarray:
        """Increment slice at step ``i``; zero outside the defined range."""
        if self.increments.start <= i <= self.increments.stop:
            return self.increments.at(i)
        return np.zeros(i + 1)

    def is_increasing(self, tol: float = 0.0) -> bool:
        return all(np.all(s >= -tol) for s in self.increments.slices)

    @classmethod
    def zero(cls, lattice: Lattice) -> "DividendStream":
        return cls(AdaptedProcess.constant(lattice, 0.0, 0, lattice.n_steps - 1))

    @classmethod
    def from_rate(cls, lattice: Lattice, rate: float) -> "DividendStream":
        """Constant payout rate: every node of every step pays ``rate * dt``."""
        return cls(AdaptedProcess.constant(lattice, rate * lattice.dt, 0,
                                           lattice.n_steps - 1))

    @classmethod
    def from_arrays(cls, lattice: Lattice, arrays: Sequence, start: int = 0) -> "DividendStream":
        return cls(AdaptedProcess(lattice, start, arrays))

    @classmethod
    def from_function(cls, lattice: Lattice, fn) -> "DividendStream":
        """Build from ``fn(t_i, node_values) -> increments`` on steps 0..n-1."""
        return cls(AdaptedProcess.from_function(lattice, fn, 0, lattice.n_steps - 1))

    def difference(self, other: "DividendStream") -> "DividendStream":
        """Node-wise increment difference ``self - other`` on steps 0..n-1."""
        lat = self.lattice
        return DividendStream.from_arrays(
            lat,
            [self.increment(i) - other.increment(i) for i in range(lat.n_steps)],
        )


def _increment_at(dividends: Optional[DividendStream], i: int):
    if dividends is None:
        return 0.0
    return dividends.increment(i)


# -- one-step kernel -----------------------------------------------------------

def monotone_condition(mu: float, lattice: Lattice) -> bool:
    return mu * (lattice.sqrt_dt + lattice.dt) <= 1.0


def require_monotone(mu: float, lattice: Lattice) -> None:
    if not monotone_condition(mu, lattice):
        raise SchemeNotMonotone(
            f"mu * (sqrt(dt) + dt) = {mu * (lattice.sqrt_dt + lattice.dt):.6g} > 1; "
            "refine the grid or lower mu"
        )


def _implicit_step(g: Generator, t: float, m, z, dk, dt: float):
    """Solve ``y = m + g(t, y, z) dt + dk`` by Picard iteration from ``y0 = m``.

    Drivers that carry a closed-form one-step inverse bypass the iteration.
    """
    if g.exact_step is not None:
        return np.asarray(g.exact_step(t, m, z, dk, dt), dtype=float), 1, 0.0
    y = np.asarray(m, dtype=float)
    resid = np.inf
    iters = 0
    for iters in range(1, PICARD_CAP + 1):
        y_next = m + g(t, y, z) * dt + dk
        resid = float(np.max(np.abs(y_next - y))) if y_next.size else 0.0
        y = y_next
        if resid <= PICARD_TOL:
            break
    if resid > PICARD_FAIL:
        raise PicardDivergence(
            f"one-step iteration stuck at residual {resid:.3g} (t={t:.6g})"
        )
    return y, iters, resid


# -- full solves ----------------------------------------------------------------

@dataclass
class PricingResult:
    """Solution of the backward recursion: value process and hedge process.

    ``y.at(i)`` are node prices; ``z.at(i)`` the martingale-increment
    coefficients used over step ``i``.  The terminal slice of ``y`` equals the
    claim payoff bitwise.
    """

    y: AdaptedProcess
    z: AdaptedProcess
    picard_iters: int
    residual: float


def solve_bsde(
    g: Generator,
    claim: TerminalClaim,
    dividends: Optional[DividendStream],
    lattice: Lattice,
    t_step: int | None = None,
    s_step: int = 0,
) -> PricingResult:
    """Backward-solve the claim plus dividend stream from ``t_step`` to ``s_step``."""
    n = lattice.n_steps if t_step is None else t_step
    if not 0 <= s_step <= n <= lattice.n_steps:
        raise BadStepOrder(f"need 0 <= s={s_step} <= t={n} <= {lattice.n_steps}")
    if g.mu * lattice.dt >= 1.0:
        raise ContractionViolation(
            f"mu * dt = {g.mu * lattice.dt:.6g} >= 1; refine the grid"
        )

    dt = lattice.dt
    y_slices = [claim.values(lattice, n)]
    z_slices = []
    worst_iters, worst_resid = 0, 0.0
    for i in range(n - 1, s_step - 1, -1):
        cur = y_slices[0]
        m = 0.5 * (cur[1:] + cur[:-1])
        zz = (cur[1:] - cur[:-1]) / (2.0 * lattice.sqrt_dt)
        dk = _increment_at(dividends, i)
        y, iters, resid = _implicit_step(g, lattice.grid.time(i), m, zz, dk, dt)
        worst_iters = max(worst_iters, iters)
        worst_resid = max(worst_resid, resid)
        y_slices.insert(0, y)
        z_slices.insert(0, zz)

    y_proc = AdaptedProcess(lattice, s_step, y_slices)
    if z_slices:
        z_proc = AdaptedProcess(lattice, s_step, z_slices)
    else:
        z_proc = AdaptedProcess(lattice, s_step, [y_slices[0] * 0.0])
    return PricingResult(y=y_proc, z=z_proc, picard_iters=worst_iters,
                         residual=worst_resid)


def price(
    g: Generator,
    s_step: int,
    t_step: int,
    claim: TerminalClaim,
    dividends: Optional[DividendStream],
    lattice: Lattice,
) -> np.ndarray:
    """Node prices at ``s_step`` of a claim maturing at ``t_step``.

    With ``s_step == t_step`` this is the payoff itself (the identity leg of
    the pricing system).
    """
    if not 0 <= s_step <= t_step <= lattice.n_steps:
        raise BadStepOrder(
            f"need 0 <= s={s_step} <= t={t_step} <= {lattice.n_steps}"
        )
    if s_step == t_step:
        return claim.values(lattice, t_step)
    res = solve_bsde(g, claim, dividends, lattice, t_step=t_step, s_step=s_step)
    return res.y.at(s_step)


def solve_terminal_batch(
    g: Generator,
    terminal: np.ndarray,
    lattice: Lattice,
    t_step: int | None = None,
) -> np.ndarray:
    """Backward-solve a batch of terminal payoff rows; returns root values.

    ``terminal`` has shape ``(batch, t_step + 1)``.  No dividends, no surface
    retention: this is the bulk kernel for inequality audits.
    """
    n = lattice.n_steps if t_step is None else t_step
    if g.mu * lattice.dt >= 1.0:
        raise ContractionViolation(
            f"mu * dt = {g.mu * lattice.dt:.6g} >= 1; refine the grid"
        )
    cur = np.atleast_2d(np.asarray(terminal, dtype=float))
    if cur.shape[1] != n + 1:
        raise StepOutOfRange(f"terminal rows must have {n + 1} entries")
    dt = lattice.dt
    for i in range(n - 1, -1, -1):
        m = 0.5 * (cur[:, 1:] + cur[:, :-1])
        zz = (cur[:, 1:] - cur[:, :-1]) / (2.0 * lattice.sqrt_dt)
        cur, _, _ = _implicit_step(g, lattice.grid.time(i), m, zz, 0.0, dt)
    return cur[:, 0]


# -- mechanism handles -----------------------------------------------------------

class MechanismHandle:
    """Black-box dynamic pricing interface over one lattice.

    ``price_at(s_step, t_step, claim, dividends)`` returns node values at
    ``s_step``; implementations must be pure and reentrant.  ``mu`` is the
    declared domination constant (``None`` when unknown).
    """

    def __init__(self, lattice: Lattice, price_at: Callable, mu: Optional[float],
                 name: str = "", surface_fn: Optional[Callable] = None):
        self.lattice = lattice
        self._price_at = price_at
        self.mu = mu
        self.name = name
        self._surface_fn = surface_fn

    def price_at(self, s_step: int, t_step: int, claim: TerminalClaim,
                 dividends: Optional[DividendStream] = None) -> np.ndarray:
        if not 0 <= s_step <= t_step <= self.lattice.n_steps:
            raise BadStepOrder(
                f"need 0 <= s={s_step} <= t={t_step} <= {self.lattice.n_steps}"
            )
        return np.asarray(self._price_at(s_step, t_step, claim, dividends),
                          dtype=float)

    def price_surface(self, t_step: int, claim: TerminalClaim,
                      dividends: Optional[DividendStream] = None) -> AdaptedProcess:
        """Prices at every step 0..t_step (one call per step unless optimized)."""
        if self._surface_fn is not None:
            return self._surface_fn(t_step, claim, dividends)
        slices = [self.price_at(s, t_step, claim, dividends)
                  for s in range(t_step + 1)]
        return AdaptedProcess(self.lattice, 0, slices)


def as_mechanism(g: Generator, lattice: Lattice) -> MechanismHandle:
    """Wrap a driver's backward solver as a pricing mechanism on the lattice."""

    def price_at(s_step, t_step, claim, dividends):
        return price(g, s_step, t_step, claim, dividends, lattice)

    def surface_fn(t_step, claim, dividends):
        res = solve_bsde(g, claim, dividends, lattice, t_step=t_step, s_step=0)
        return res.y

    return MechanismHandle(lattice, price_at, mu=g.mu,
                           name=g.name or "mechanism", surface_fn=surface_fn)


def paste(mechs: Sequence[MechanismHandle], boundaries: Sequence[int]) -> MechanismHandle:
    """Join mechanisms end to end along a step partition of ``[0, n]``.

    ``boundaries`` is the full partition ``0 = c_0 < c_1 < ... < c_N = n``
    with ``mechs[k]`` governing ``[c_k, c_{k+1}]``.  Within one segment the
    pasted mechanism delegates; across segments it prices the inner value
    slice recursively, which is the unique consistent extension.
    """
    if not mechs:
        raise BadPartition("need at least one mechanism")
    lattice = mechs[0].lattice
    for m in mechs:
        if m.lattice is not lattice:
            raise BadPartition("all mechanisms must share one lattice")
    cuts = [int(c) for c in boundaries]
    n = lattice.n_steps
    if (len(cuts) != len(mechs) + 1 or cuts[0] != 0 or cuts[-1] != n
            or any(a >= b for a, b in zip(cuts, cuts[1:]))):
        raise BadPartition(f"boundaries {cuts} do not partition [0, {n}] "
                           f"into {len(mechs)} segments")

    def segment_of(step: int) -> int:
        # segment k covers (c_k, c_{k+1}]; step 0 belongs to segment 0
        for k in range(len(cuts) - 1):
            if cuts[k] < step <= cuts[k + 1]:
                return k
        return 0

    def price_at(s_step, t_step, claim, dividends):
        if s_step == t_step:
            return claim.values(lattice, t_step)
        cur_step, cur_claim = t_step, claim
        while cur_step > s_step:
            k = segment_of(cur_step)
            lo = max(cuts[k], s_step)
            vals = mechs[k].price_at(lo, cur_step, cur_claim, dividends)
            cur_step, cur_claim = lo, claim_from_values(lattice, lo, vals)
        return cur_claim.values(lattice, s_step)

    mus = [m.mu for m in mechs]
    mu = None if any(v is None for v in mus) else max(mus)
    return MechanismHandle(lattice, price_at, mu=mu,
                           name="paste(" + ",".join(m.name for m in mechs) + ")")


# -- order verdicts ---------------------------------------------------------------

@dataclass
class ComparisonVerdict:
    applicable: bool
    passed: Optional[bool]
    worst_margin: float = 0.0
    worst_node: Optional[tuple] = None
    reason: str = ""


def compare(
    g: Generator,
    claim_a: TerminalClaim,
    dividends_a: Optional[DividendStream],
    claim_b: TerminalClaim,
    dividends_b: Optional[DividendStream],
    lattice: Lattice,
    tol: float = 1e-9,
) -> ComparisonVerdict:
    """Order verdict: larger payoff and larger payouts give larger prices.

    Applicable only when the terminal payoffs are ordered node-wise and the
    payout difference is an increasing stream; otherwise the verdict is
    "not applicable" rather than a failure.
    """
    require_monotone(g.mu, lattice)
    n = lattice.n_steps
    xa = claim_a.values(lattice, n)
    xb = claim_b.values(lattice, n)
    if np.min(xa - xb) < -tol:
        return ComparisonVerdict(applicable=False, passed=None,
                                 reason="terminal payoffs are not ordered")
    ka = dividends_a or DividendStream.zero(lattice)
    kb = dividends_b or DividendStream.zero(lattice)
    if not ka.difference(kb).is_increasing(tol=tol):
        return ComparisonVerdict(applicable=False, passed=None,
                                 reason="payout difference is not increasing")

    ya = solve_bsde(g, claim_a, dividends_a, lattice).y
    yb = solve_bsde(g, claim_b, dividends_b, lattice).y
    worst_margin, worst_node = np.inf, None
    for i in range(n + 1):
        diff = ya.at(i) - yb.at(i)
        j = int(np.argmin(diff))
        if diff[j] < worst_margin:
            worst_margin, worst_node = float(diff[j]), (i, j)
    return ComparisonVerdict(applicable=True, passed=bool(worst_margin >= -tol),
                             worst_margin=worst_margin, worst_node=worst_node)


@dataclass
class DominationVerdict:
    passed: bool
    worst_margin: float
    worst_node: Optional[tuple] = None


def check_domination(
    mech: MechanismHandle,
    claim_a: TerminalClaim,
    claim_b: TerminalClaim,
    mu: float,
    lattice: Lattice,
    dividends_a: Optional[DividendStream] = None,
    dividends_b: Optional[DividendStream] = None,
    tol: float = 1e-9,
) -> DominationVerdict:
    """Check that the mechanism's price spread is capped by the mu-driver price.

    At every node of every step the spread ``mech(A) - mech(B)`` must not
    exceed the extremal-driver price of the difference claim (with the
    difference payout stream); the worst margin ``cap - spread`` is reported.
    """
    require_monotone(mu, lattice)
    n = lattice.n_steps
    sa = mech.price_surface(n, claim_a, dividends_a)
    sb = mech.price_surface(n, claim_b, dividends_b)

    diff_claim = TerminalClaim(
        lambda b: np.asarray(claim_a.payoff(b), dtype=float)
        - np.asarray(claim_b.payoff(b), dtype=float),
        name="difference",
    )
    ka = dividends_a or DividendStream.zero(lattice)
    kb = dividends_b or DividendStream.zero(lattice)
    cap = solve_bsde(domination_generator(mu), diff_claim, ka.difference(kb),
                     lattice).y

    worst_margin, worst_node = np.inf, None
    for i in range(n + 1):
        margin = cap.at(i) - (sa.at(i) - sb.at(i))
        j = int(np.argmin(margin))
        if margin[j] < worst_margin:
            worst_margin, worst_node = float(margin[j]), (i, j)
    return DominationVerdict(passed=bool(worst_margin >= -tol),
                             worst_margin=worst_margin, worst_node=worst_node)


@dataclass
class SignFlipVerdict:
    passed: bool
    max_error: float


def sign_flip_check(
    g: Generator,
    claim: TerminalClaim,
    dividends: Optional[DividendStream],
    lattice: Lattice,
    tol: float = 1e-10,
) -> SignFlipVerdict:
    """Duality identity: negating claim and payouts under the reflected driver
    ``g_(t,y,z) = -g(t,-y,-z)`` negates every node price."""
    reflected = Generator(
        fn=lambda t, y, z: -g(t, -np.asarray(y, float), -np.asarray(z, float)),
        mu=g.mu,
        name=f"reflected({g.name})",
    )
    neg_claim = TerminalClaim(lambda b: -np.asarray(claim.payoff(b), dtype=float))
    k = dividends or DividendStream.zero(lattice)
    neg_div = DividendStream.zero(lattice).difference(k)

    y = solve_bsde(g, claim, dividends, lattice).y
    y_neg = solve_bsde(reflected, neg_claim, neg_div, lattice).y
    err = max(float(np.max(np.abs(y_neg.at(i) + y.at(i))))
              for i in range(lattice.n_steps + 1))
    return SignFlipVerdict(passed=bool(err <= tol), max_error=err)
